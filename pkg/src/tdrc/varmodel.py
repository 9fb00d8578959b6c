"""VAR(1) surrogate of a time-delay reservoir around a stable fixed point.

Linearizing the reservoir map in the state and expanding it to order ``R``
in the input gives

    x(t) = x0 + A (x(t-1) - x0) + eps(t),

where ``A`` is the connectivity matrix and ``eps(t)`` is a polynomial in
the scalar input ``z(t)``. For IID input this is a VAR(1) process whose
moments are available in closed form.

Input moments are passed as an array ``m`` with ``m[i] = E[z**i]``
(``m[0] = 1``). Products with ``z`` or ``z**2`` are taken by shifting the
moment index, never by raising the mean to a power.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (DegenerateError, MomentLengthError, NotAnEquilibrium,
                     SingularError, UnstableError)
from .kernels import RESIDUAL_TOL, Kernel, kernel_input_derivatives
from .reservoir import ReservoirConfig, check_mask

DEFAULT_ORDER = 8
KRON_MAX_N = 40


def _phi(cfg: ReservoirConfig, fprime: float) -> float:
    return (1.0 - cfg.decay) * fprime


def connectivity_matrix(cfg: ReservoirConfig, fprime: float) -> np.ndarray:
    """Connectivity matrix for a kernel slope ``fprime`` at the fixed point."""
    N, e = cfg.N, cfg.decay
    i = np.arange(N)
    lag = i[:, None] - i[None, :]
    A = _phi(cfg, fprime) * np.where(lag >= 0, e ** np.maximum(lag, 0), 0.0)
    A[:, -1] += e ** np.arange(1, N + 1)
    return A


def _require_equilibrium(k: Kernel, x0: float):
    residual = abs(float(k.f(x0, 0.0)) - x0)
    if residual > RESIDUAL_TOL:
        raise NotAnEquilibrium(f"|f(x0) - x0| = {residual:.3g}")


def connectivity(cfg: ReservoirConfig, k: Kernel, x0: float) -> np.ndarray:
    """Jacobian of the reservoir map at the fixed point ``x0 * ones(N)``."""
    _require_equilibrium(k, x0)
    return connectivity_matrix(cfg, float(k.dfdx(x0, 0.0)))


def row_sum_norm(A) -> float:
    return float(np.max(np.sum(np.abs(A), axis=1)))


def spectral_radius(A) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def norm_bound_holds(cfg: ReservoirConfig, fprime: float) -> bool:
    return row_sum_norm(connectivity_matrix(cfg, fprime)) < 1.0


def norm_bound_stable(cfg: ReservoirConfig, k: Kernel, x0: float) -> bool:
    """Whether the maximum row-sum norm of the connectivity matrix is < 1."""
    return row_sum_norm(connectivity(cfg, k, x0)) < 1.0


def char_poly_coefficients(cfg: ReservoirConfig, phi: float) -> np.ndarray:
    """Coefficients (highest degree first) of the polynomial whose roots
    times ``phi`` are the eigenvalues of the connectivity matrix."""
    if phi == 0.0:
        raise DegenerateError("phi = 0: spectral radius is exp(-N xi) directly")
    N = cfg.N
    coeffs = np.zeros(N + 1)
    coeffs[0] = 1.0
    coeffs[1] = -(math.exp(-N * cfg.xi) / phi + N)
    for j in range(N - 1):
        coeffs[N - j] = math.comb(N, j) * (-1) ** (N - j)
    return coeffs


def char_poly_spectral_radius(cfg: ReservoirConfig, phi: float) -> float:
    roots = np.roots(char_poly_coefficients(cfg, phi))
    return float(np.max(np.abs(phi * roots)))


def gaussian_moments(sigma_z: float, max_order: int) -> np.ndarray:
    """Raw moments ``E[z**i]``, ``i = 0..max_order``, of ``N(0, sigma_z**2)``."""
    if sigma_z < 0:
        raise ValueError("sigma_z must be non-negative")
    m = np.zeros(max_order + 1)
    m[0] = 1.0
    for i in range(2, max_order + 1, 2):
        l = i // 2
        m[i] = math.factorial(i) / (2 ** l * math.factorial(l)) * sigma_z ** i
    return m


def q_coefficients(cfg: ReservoirConfig, k: Kernel, x0: float, mask, R: int) -> np.ndarray:
    """Coefficients ``a[i-1, r-1]`` of the input polynomials of each neuron.

    ``a_i^{(r)} = (1/i!) (d^i f/dI^i)(x0, 0) * sum_{j<=r} e^{-(r-j) xi} c_j^i``.
    """
    c = check_mask(cfg, mask)
    deriv = kernel_input_derivatives(k, x0, R)
    decay = _decay(cfg, deriv)
    if deriv.dtype == object:
        zero = deriv[0] * 0
        c = np.array([zero + v for v in c], dtype=object)
    fact = np.array([math.factorial(i) for i in range(1, R + 1)], dtype=float)
    powers = c[None, :] ** np.arange(1, R + 1)[:, None]          # (R, N)
    # discounted prefix sums along the delay line
    S = np.empty_like(powers)
    acc = powers[:, 0] * 0
    for r in range(cfg.N):
        acc = decay * acc + powers[:, r]
        S[:, r] = acc
    return (deriv / fact)[:, None] * S


def _decay(cfg: ReservoirConfig, like: np.ndarray):
    # exact 1 / (1 + d) in the number type of ``like``
    if like.dtype != object:
        return cfg.decay
    one = like.flat[0] * 0 + 1
    return one / (one + cfg.d)


def _poly_moment(a: np.ndarray, m: np.ndarray, shift: int = 0) -> np.ndarray:
    """``sum_i a[i-1, r] * m[i + shift]`` for every neuron ``r``."""
    R = a.shape[0]
    need = R + shift
    if len(m) <= need:
        raise MomentLengthError(f"need moments up to order {need}, got {len(m) - 1}")
    return m[1 + shift:R + 1 + shift] @ a


def noise_vector(cfg: ReservoirConfig, k: Kernel, x0: float, mask, R: int, z) -> np.ndarray:
    """Taylor noise ``eps`` for input ``z`` (scalar or 1-d array of inputs).

    Returns shape ``(N,)`` for scalar ``z`` and ``(len(z), N)`` otherwise.
    With ``x0`` and ``z`` given as ``mpmath.mpf`` the whole evaluation runs
    at that precision.
    """
    a = q_coefficients(cfg, k, x0, mask, R)
    return _noise_from_coeffs(cfg, a, z)


def _noise_from_coeffs(cfg, a, z):
    z = np.asarray(z, dtype=object if a.dtype == object else float)
    zp = z[..., None] ** np.arange(1, a.shape[0] + 1)
    return (1 - _decay(cfg, a)) * (zp @ a)


def noise_moments_from_coeffs(cfg: ReservoirConfig, a: np.ndarray, m):
    m = np.asarray(m, dtype=float)
    R = a.shape[0]
    if len(m) < 2 * R + 1:
        raise MomentLengthError(f"need moments up to order {2 * R}, got {len(m) - 1}")
    s = 1.0 - cfg.decay
    q = m[1:R + 1] @ a
    idx = np.arange(1, R + 1)
    hankel = m[idx[:, None] + idx[None, :]]
    Sigma = s ** 2 * (a.T @ hankel @ a - np.outer(q, q))
    return s * q, 0.5 * (Sigma + Sigma.T)


def noise_moments(cfg: ReservoirConfig, k: Kernel, x0: float, mask, R: int, m):
    """Mean vector and covariance matrix of the Taylor noise."""
    return noise_moments_from_coeffs(cfg, q_coefficients(cfg, k, x0, mask, R), m)


def stationary_mean(A, mu_eps, x0: float, image=None) -> np.ndarray:
    """Mean of the stationary VAR(1) solution.

    ``image`` is ``F(x0 * ones, 0)``; it defaults to ``x0 * ones``, which
    holds at every fixed point.
    """
    A = np.asarray(A, dtype=float)
    N = A.shape[0]
    x0v = np.full(N, float(x0))
    image = x0v if image is None else np.asarray(image, dtype=float)
    M = np.eye(N) - A
    if np.linalg.cond(M) > 1e12:
        raise SingularError("I - A is numerically singular")
    return np.linalg.solve(M, image - A @ x0v + np.asarray(mu_eps, dtype=float))


def yule_walker_gamma0(A, Sigma_eps) -> np.ndarray:
    """Stationary covariance solving ``G = A G A^T + Sigma_eps``."""
    A = np.asarray(A, dtype=float)
    Sigma_eps = np.asarray(Sigma_eps, dtype=float)
    N = A.shape[0]
    if spectral_radius(A) >= 1.0:
        raise UnstableError("connectivity matrix has spectral radius >= 1")
    if N <= KRON_MAX_N:
        K = np.eye(N * N) - np.kron(A, A)
        G = np.linalg.solve(K, Sigma_eps.reshape(-1)).reshape(N, N)
    else:
        G = scipy.linalg.solve_discrete_lyapunov(A, Sigma_eps)
    return 0.5 * (G + G.T)


def autocovariance(A, Gamma0, lag: int) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    G = np.asarray(Gamma0, dtype=float)
    if lag < 0:
        return autocovariance(A, G, -lag).T
    return np.linalg.matrix_power(A, lag) @ G


@dataclass
class VarApprox:
    """Closed-form VAR(1) surrogate of a reservoir at a fixed point."""

    cfg: ReservoirConfig
    x0: float
    R: int
    A: np.ndarray
    coeffs: np.ndarray
    moments: np.ndarray
    mu_eps: np.ndarray
    Sigma_eps: np.ndarray
    mu_x: np.ndarray
    Gamma0: np.ndarray
    stable: bool = field(default=True)

    @property
    def N(self) -> int:
        return self.cfg.N

    def noise(self, z):
        return _noise_from_coeffs(self.cfg, self.coeffs, z)

    def to_dict(self):
        return {
            "N": self.cfg.N, "d": self.cfg.d, "x0": self.x0, "R": self.R,
            "stable": self.stable,
            "A": self.A.tolist(), "mu_eps": self.mu_eps.tolist(),
            "Sigma_eps": self.Sigma_eps.tolist(), "mu_x": self.mu_x.tolist(),
            "Gamma0": self.Gamma0.tolist(), "coeffs": self.coeffs.tolist(),
            "moments": self.moments.tolist(),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d):
        arr = lambda key: np.asarray(d[key], dtype=float)
        return cls(ReservoirConfig(int(d["N"]), float(d["d"])), float(d["x0"]), int(d["R"]),
                   arr("A"), arr("coeffs"), arr("moments"), arr("mu_eps"),
                   arr("Sigma_eps"), arr("mu_x"), arr("Gamma0"), bool(d["stable"]))


def required_moment_order(R: int) -> int:
    # Sigma_eps needs 2R, the quadratic task covariance needs R + 2
    return max(2 * R, R + 2, 4)


def build_var_approx(cfg: ReservoirConfig, k: Kernel, x0: float, mask,
                     sigma_z: float = 0.01, R: int = DEFAULT_ORDER,
                     moments=None) -> VarApprox:
    """Assemble every closed-form ingredient of the surrogate.

    Raises :class:`UnstableError` when the connectivity matrix has
    spectral radius >= 1.
    """
    A = connectivity(cfg, k, x0)
    if moments is None:
        moments = gaussian_moments(sigma_z, required_moment_order(R))
    moments = np.asarray(moments, dtype=float)
    a = q_coefficients(cfg, k, x0, mask, R)
    mu_eps, Sigma_eps = noise_moments_from_coeffs(cfg, a, moments)
    Gamma0 = yule_walker_gamma0(A, Sigma_eps)
    mu_x = stationary_mean(A, mu_eps, x0)
    return VarApprox(cfg, float(x0), R, A, a, moments, mu_eps, Sigma_eps, mu_x, Gamma0, True)


def simulate_var(var: VarApprox, signal, init=None) -> np.ndarray:
    """Drive the surrogate ``x(t) = x0 + A (x(t-1) - x0) + eps(z(t))``.

    Returns ``(T, N)`` states; the initial state defaults to ``x0 * ones``.
    """
    z = np.asarray(signal, dtype=float)
    eps = var.noise(z)
    dev = np.zeros(var.N) if init is None else np.asarray(init, dtype=float) - var.x0
    out = np.empty((z.size, var.N))
    A = var.A
    for t in range(z.size):
        dev = A @ dev + eps[t]
        out[t] = dev
    return out + var.x0
