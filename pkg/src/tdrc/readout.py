"""Closed-form memory capacity and empirical ridge readouts.

The closed form uses the stationary moments of the VAR(1) surrogate; the
Monte Carlo path trains a ridge readout on simulated layers and reports
the out-of-sample NMSE. Population (``1/T``) moments are used throughout.
"""

from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass

import numpy as np
import scipy.linalg

from .errors import BasinEscape, NonFiniteError, NonPositiveVariance, SingularError
from .kernels import Kernel
from .reservoir import ReservoirConfig, run_continuous, run_discrete
from .tasks import (MemoryTask, StateProbe, task_mean, task_series,
                    task_state_covariance, task_variance)
from .varmodel import DEFAULT_ORDER, VarApprox, build_var_approx, simulate_var

DEFAULT_SIGMA_Z = 0.01
DEFAULT_LAMBDA = 1e-15
BAND_TOL = 1e-9


@dataclass
class CapacityReport:
    capacity: float
    nmse_theoretical: float
    W_out: np.ndarray
    a_out: float
    lam: float

    def to_dict(self):
        return {"capacity": self.capacity, "nmse_theoretical": self.nmse_theoretical,
                "W_out": np.asarray(self.W_out).tolist(), "a_out": self.a_out,
                "lambda": self.lam}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def capacity(var: VarApprox, cov_yx, var_y: float, lam: float = DEFAULT_LAMBDA,
             mean_y: float = 0.0) -> CapacityReport:
    """Capacity of the optimal ridge readout on the surrogate.

    ``C = c^T (G + lam I)^{-1} (G + 2 lam I) (G + lam I)^{-1} c / var_y``
    with ``G = Gamma0`` and ``c = Cov(y, x)``.
    """
    if not var_y > 0:
        raise NonPositiveVariance(f"task variance must be positive, got {var_y}")
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    G = np.asarray(var.Gamma0, dtype=float)
    c = np.asarray(cov_yx, dtype=float)
    N = G.shape[0]
    try:
        factor = scipy.linalg.cho_factor(G + lam * np.eye(N))
    except np.linalg.LinAlgError as exc:
        raise SingularError("Gamma0 + lambda I is not positive definite") from exc
    W = scipy.linalg.cho_solve(factor, c)
    C = float(W @ (G @ W) + 2.0 * lam * W @ W) / var_y
    if not np.isfinite(C) or C < -BAND_TOL or C > 1.0 + BAND_TOL:
        raise SingularError(f"capacity {C!r} outside [0, 1]; Gamma0 + lambda I is ill-conditioned")
    C = min(max(C, 0.0), 1.0)
    a = float(mean_y - W @ var.mu_x)
    return CapacityReport(C, 1.0 - C, W, a, float(lam))


def task_capacity(var: VarApprox, task: MemoryTask, sigma_z: float,
                  lam: float = DEFAULT_LAMBDA) -> CapacityReport:
    """Capacity of ``task`` for the surrogate's own input moments."""
    cov = task_state_covariance(task, var)
    vy = task_variance(task, sigma_z, var.moments)
    return capacity(var, cov, vy, lam, task_mean(task, var.moments))


def theoretical_capacity(cfg: ReservoirConfig, k: Kernel, x0: float, mask,
                         task: MemoryTask, sigma_z: float = DEFAULT_SIGMA_Z,
                         lam: float = DEFAULT_LAMBDA, R: int = DEFAULT_ORDER) -> CapacityReport:
    var = build_var_approx(cfg, k, x0, mask, sigma_z, R)
    return task_capacity(var, task, sigma_z, lam)


def ridge_fit(X, y, lam: float = 0.0):
    """Ridge regression with intercept on centered population moments.

    Solves ``(S_xx + lam I) W = s_xy`` through an equivalent augmented
    least-squares problem, which avoids squaring the condition number.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    T, N = X.shape
    xm, ym = X.mean(axis=0), y.mean()
    Xc, yc = X - xm, y - ym
    if lam > 0:
        Xa = np.vstack([Xc, np.sqrt(T * lam) * np.eye(N)])
        ya = np.concatenate([yc, np.zeros(N)])
    else:
        Xa, ya = Xc, yc
    W, _, rank, _ = np.linalg.lstsq(Xa, ya, rcond=None)
    if lam == 0 and rank < N:
        raise SingularError("sample covariance is rank deficient and lambda = 0")
    return W, float(ym - W @ xm)


def nmse(pred, target) -> float:
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    v = target.var()
    if not v > 0:
        raise NonPositiveVariance("target has zero variance")
    return float(np.mean((pred - target) ** 2) / v)


class Model(str, enum.Enum):
    DISCRETE = "discrete"
    CONTINUOUS = "continuous"
    LINEARIZED = "linearized"


@dataclass(frozen=True)
class MCSettings:
    t_train: int = 40_000
    t_test: int = 10_000
    washout: int = 200
    seed: int = 0

    def to_dict(self):
        return asdict(self)


def gaussian_signal(n: int, sigma_z: float, seed) -> np.ndarray:
    return np.random.default_rng(seed).normal(0.0, sigma_z, size=n)


def simulate_model(model, cfg, k, mask, x0, signal, sigma_z=DEFAULT_SIGMA_Z,
                   R: int = DEFAULT_ORDER) -> np.ndarray:
    """Layers ``(T, N)`` of the requested model started at ``x0 * ones``."""
    model = Model(model)
    if model is Model.DISCRETE:
        return run_discrete(cfg, k, mask, signal, x0)
    if model is Model.CONTINUOUS:
        return run_continuous(cfg, k, mask, signal, x0)
    var = build_var_approx(cfg, k, x0, mask, sigma_z, R)
    out = simulate_var(var, signal)
    if not np.all(np.isfinite(out)):
        raise NonFiniteError("surrogate trajectory escaped to a non-finite value")
    return out


def monte_carlo_nmse(cfg: ReservoirConfig, k: Kernel, mask, task, x0: float,
                     sigma_z: float = DEFAULT_SIGMA_Z, lam: float = DEFAULT_LAMBDA,
                     t_train: int = 40_000, t_test: int = 10_000, washout: int = 200,
                     seed=0, model="discrete", R: int = DEFAULT_ORDER,
                     basin=None) -> float:
    """Out-of-sample NMSE of a ridge readout trained on simulated layers.

    The model is driven by seeded IID ``N(0, sigma_z**2)`` input starting
    from ``x0 * ones``. The first ``max(washout, h)`` layers are dropped,
    the next ``t_train`` train the readout and the following ``t_test``
    are scored.

    With ``basin=(lo, hi)`` a trajectory that reaches either end raises
    :class:`BasinEscape` carrying the NMSE measured anyway.
    """
    if min(t_train, t_test) < 10 * cfg.N:
        raise ValueError("t_train and t_test must be at least 10 N")
    skip = max(int(washout), task.h)
    T = skip + t_train + t_test
    z = gaussian_signal(T, sigma_z, seed)
    X = simulate_model(model, cfg, k, mask, x0, z, sigma_z, R)
    if isinstance(task, StateProbe):
        y = X[:, task.index]
    else:
        y = np.concatenate([np.full(task.h, np.nan), task_series(task, z)])
    escaped = basin is not None and bool(np.any(X <= basin[0]) or np.any(X >= basin[1]))
    X, y = X[skip:], y[skip:]
    W, a = ridge_fit(X[:t_train], y[:t_train], lam)
    err = nmse(X[t_train:] @ W + a, y[t_train:])
    if escaped:
        raise BasinEscape("trajectory left the basin of the operating equilibrium", err)
    return err
