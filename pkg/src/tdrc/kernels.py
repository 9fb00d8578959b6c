"""Nonlinear delay kernels, their derivatives, and equilibrium analysis.

Two parametric families are provided:

* :class:`MackeyGlass` -- ``f(x, I) = eta * u / (1 + u**p)`` with ``u = x + gamma * I``
* :class:`Ikeda` -- ``f(x, I) = eta * sin(x + gamma * I + phi)**2``

Derivatives with respect to the state are analytic. Derivatives of any
order with respect to the input are produced by propagating a truncated
Taylor series through the kernel expression, which avoids high-order
finite differences.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass
from typing import Union

import numpy as np
from scipy.optimize import brentq

from . import _series
from .errors import ConfigError, DomainError, NonFiniteError, NotAnEquilibrium

ROOT_TOL = 1e-10
RESIDUAL_TOL = 1e-9
UNIT_TOL = 1e-12


def _check_finite(value):
    arr = np.asarray(value)
    if arr.dtype == object:
        ok = all(math.isfinite(float(v)) for v in arr.ravel())
    else:
        ok = bool(np.all(np.isfinite(arr)))
    if not ok:
        raise NonFiniteError("kernel evaluation produced a non-finite value")
    return value


def _scalar(x):
    # floats stay floats; other number types (mpmath) pass through untouched
    return float(x) if isinstance(x, (float, int, np.floating, np.integer)) else x


@dataclass(frozen=True)
class MackeyGlass:
    """Mackey-Glass kernel with feedback gain ``eta``, input gain ``gamma``
    and exponent ``p``."""

    eta: float
    gamma: float = 1.0
    p: float = 2.0

    def __post_init__(self):
        for name in ("eta", "gamma", "p"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"Mackey-Glass parameter {name} must be finite")
        if self.p <= 0:
            raise ConfigError("Mackey-Glass exponent p must be positive")

    @property
    def integer_p(self) -> bool:
        return float(self.p).is_integer()

    def _base(self, x, I):
        u = np.asarray(x, dtype=float) + self.gamma * np.asarray(I, dtype=float)
        if not self.integer_p and np.any(u <= 0):
            raise DomainError(
                f"x + gamma*I must be positive for non-integer p={self.p}")
        return u

    def _upow(self, u):
        if self.integer_p:
            return u ** int(self.p)
        return u ** self.p

    def f(self, x, I=0.0):
        u = self._base(x, I)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            out = self.eta * u / (1.0 + self._upow(u))
        return _check_finite(out)

    def dfdx(self, x, I=0.0):
        u = self._base(x, I)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            up = self._upow(u)
            out = self.eta * (1.0 + (1.0 - self.p) * up) / (1.0 + up) ** 2
        return _check_finite(out)

    def input_series(self, x0, order):
        """Taylor coefficients of ``I -> f(x0, I)`` around ``I = 0``."""
        u = _series.variable(_scalar(x0), self.gamma, order)
        if self.integer_p:
            up = _series.ipow(u, int(self.p))
        else:
            if u[0] <= 0:
                raise DomainError(
                    f"x0 must be positive for non-integer p={self.p}")
            up = _series.rpow(u, self.p)
        den = up.copy()
        den[0] += 1.0
        try:
            out = self.eta * _series.mul(u, _series.recip(den))
        except ZeroDivisionError as exc:
            raise DomainError("1 + u**p vanishes at x0") from exc
        return _check_finite(out)

    def search_interval(self):
        r = abs(self.eta) + 2.0
        return (-r, r) if self.integer_p else (1e-12, r)

    def to_dict(self):
        return {"type": "mackey_glass", **asdict(self)}


@dataclass(frozen=True)
class Ikeda:
    """Ikeda kernel with feedback gain ``eta``, input gain ``gamma`` and
    phase ``phi``."""

    eta: float
    gamma: float = 1.0
    phi: float = 0.0

    def __post_init__(self):
        for name in ("eta", "gamma", "phi"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"Ikeda parameter {name} must be finite")

    def f(self, x, I=0.0):
        arg = np.asarray(x, dtype=float) + self.gamma * np.asarray(I, dtype=float) + self.phi
        return _check_finite(self.eta * np.sin(arg) ** 2)

    def dfdx(self, x, I=0.0):
        arg = np.asarray(x, dtype=float) + self.gamma * np.asarray(I, dtype=float) + self.phi
        return _check_finite(self.eta * np.sin(2.0 * arg))

    def input_series(self, x0, order):
        u = _series.variable(_scalar(x0) + self.phi, self.gamma, order)
        ctx = getattr(u[0], "context", np)   # mpmath numbers carry their own sin/cos
        s, _ = _series.sincos(u, ctx.sin, ctx.cos)
        return _check_finite(self.eta * _series.mul(s, s))

    def search_interval(self):
        # every root of eta*sin^2(x+phi) = x lies between 0 and eta
        return (min(0.0, self.eta) - 0.5, max(0.0, self.eta) + 0.5)

    def to_dict(self):
        return {"type": "ikeda", **asdict(self)}


Kernel = Union[MackeyGlass, Ikeda]


def kernel_from_dict(spec: dict) -> Kernel:
    """Build a kernel from a config fragment such as
    ``{"type": "ikeda", "eta": 2, "gamma": 1, "phi": -0.3}``."""
    spec = dict(spec)
    kind = spec.pop("type", None)
    try:
        if kind == "mackey_glass":
            return MackeyGlass(**{k: float(v) for k, v in spec.items()})
        if kind == "ikeda":
            return Ikeda(**{k: float(v) for k, v in spec.items()})
    except TypeError as exc:
        raise ConfigError(f"bad kernel parameters: {exc}") from exc
    raise ConfigError(f"unknown kernel type {kind!r}")


def eval_kernel(k: Kernel, x, I=0.0):
    return k.f(x, I)


def kernel_x_derivative(k: Kernel, x, I=0.0):
    return k.dfdx(x, I)


def kernel_input_derivatives(k: Kernel, x0: float, order: int) -> np.ndarray:
    """Return ``(d^i f / dI^i)(x0, 0)`` for ``i = 1..order``.

    Passing ``x0`` as an ``mpmath.mpf`` evaluates the jets at that
    precision and returns an object array.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    return _series.derivatives(k.input_series(x0, order))[1:]


class Certificate(enum.Enum):
    ASYMPTOTICALLY_STABLE = "certified_asymptotically_stable"
    STABLE = "certified_stable"
    NOT_CERTIFIED = "not_certified"


@dataclass(frozen=True)
class Equilibrium:
    """An equilibrium together with its stability certificate.

    ``NOT_CERTIFIED`` only means that the sufficient condition
    ``|df/dx(x0)| <= 1`` fails; the point may still be stable.
    """

    x0: float
    derivative: float
    certificate: Certificate

    @property
    def certified(self) -> bool:
        return self.certificate is not Certificate.NOT_CERTIFIED

    def to_dict(self):
        return {"x0": self.x0, "derivative": self.derivative,
                "certificate": self.certificate.value}


def _classify(derivative: float) -> Certificate:
    a = abs(derivative)
    if abs(a - 1.0) <= UNIT_TOL:
        return Certificate.STABLE
    if a < 1.0:
        return Certificate.ASYMPTOTICALLY_STABLE
    return Certificate.NOT_CERTIFIED


def certify_stability(k: Kernel, x0: float, tol: float = RESIDUAL_TOL) -> Equilibrium:
    residual = abs(float(k.f(x0, 0.0)) - x0)
    if residual > tol:
        raise NotAnEquilibrium(f"|f(x0) - x0| = {residual:.3g} exceeds {tol:g}")
    d = float(k.dfdx(x0, 0.0))
    return Equilibrium(float(x0), d, _classify(d))


def find_equilibria(k: Kernel, search_interval=None,
                    points_per_unit: int = 10_000) -> list[Equilibrium]:
    """All simple roots of ``f(x, 0) - x`` inside ``search_interval``.

    The interval is scanned on a uniform grid for sign changes and each
    bracket is refined with Brent's method. Tangential (even-multiplicity)
    roots produce no sign change and are not reported.
    """
    lo, hi = search_interval if search_interval is not None else k.search_interval()
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        raise ValueError("search interval must be finite with lo < hi")
    n = max(2, int(math.ceil((hi - lo) * points_per_unit)) + 1)
    xs = np.linspace(lo, hi, n)
    # points where the kernel is undefined simply carry no sign information
    with np.errstate(all="ignore"):
        try:
            g = k.f(xs, 0.0) - xs
        except (DomainError, NonFiniteError):
            g = np.array([_safe_g(k, x) for x in xs])
    s = np.sign(g)
    roots = list(xs[s == 0])
    for i in np.nonzero(s[:-1] * s[1:] < 0)[0]:
        roots.append(brentq(lambda x: float(k.f(x, 0.0)) - x,
                            xs[i], xs[i + 1], xtol=ROOT_TOL / 100, rtol=8.9e-16))
    return [certify_stability(k, r) for r in sorted(roots)]


def _safe_g(k, x):
    try:
        return float(k.f(x, 0.0)) - x
    except (DomainError, NonFiniteError):
        return np.nan


def basin_interval(equilibria, x0: float, tol: float = 1e-8):
    """Open interval between the equilibria adjacent to ``x0``.

    Ends without a neighbour are infinite. Accepts :class:`Equilibrium`
    objects or plain numbers.
    """
    xs = sorted(float(getattr(e, "x0", e)) for e in equilibria)
    lo = max((x for x in xs if x < x0 - tol), default=-math.inf)
    hi = min((x for x in xs if x > x0 + tol), default=math.inf)
    return lo, hi
