"""Exception hierarchy shared by all tdrc modules."""


class TDRError(Exception):
    """Base class for every error raised by tdrc."""


class DomainError(TDRError, ValueError):
    """A kernel was evaluated outside its real domain."""


class NonFiniteError(TDRError, FloatingPointError):
    """A computation overflowed or a trajectory escaped to inf/nan."""


class NotAnEquilibrium(TDRError, ValueError):
    """The supplied point does not satisfy f(x0, 0) = x0."""


class DegenerateError(TDRError, ValueError):
    """The requested construction is undefined for these inputs."""


class MomentLengthError(TDRError, ValueError):
    """Not enough input moments were supplied."""


class SingularError(TDRError, ArithmeticError):
    """A linear system is singular or numerically ill-conditioned."""


class UnstableError(TDRError, ArithmeticError):
    """The VAR(1) surrogate has spectral radius >= 1."""


class NonPositiveVariance(TDRError, ValueError):
    """A variance that must be positive is zero or negative."""


class DimensionError(TDRError, ValueError):
    """Array shapes are inconsistent."""


class NoFeasiblePoint(TDRError, RuntimeError):
    """Every start of a constrained optimization was infeasible."""


class ConfigError(TDRError, ValueError):
    """An experiment configuration failed validation."""


class BasinEscape(TDRError):
    """A trajectory left the basin interval of its operating equilibrium.

    ``nmse`` carries the Monte Carlo error measured anyway, if available.
    """

    def __init__(self, message, nmse=float("nan")):
        super().__init__(message)
        self.nmse = nmse
