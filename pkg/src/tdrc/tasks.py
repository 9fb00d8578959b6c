"""h-lag memory tasks and their exact moments under IID input.

A task maps the input window ``w = (z(t), z(t-1), ..., z(t-h))`` to
``y(t) = L^T w`` (linear) or ``y(t) = w^T Q w`` (quadratic). Input moments
follow the raw-moment convention of :mod:`tdrc.varmodel`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, DimensionError, MomentLengthError, UnstableError
from .varmodel import VarApprox, spectral_radius


@dataclass(frozen=True)
class LinearTask:
    L: tuple

    def __post_init__(self):
        object.__setattr__(self, "L", tuple(float(v) for v in np.ravel(self.L)))
        if len(self.L) == 0:
            raise DimensionError("L must have at least one entry")

    @property
    def h(self) -> int:
        return len(self.L) - 1

    @property
    def weights(self) -> np.ndarray:
        return np.array(self.L)

    def to_dict(self):
        return {"type": "linear", "h": self.h, "L": list(self.L)}


@dataclass(frozen=True)
class QuadraticTask:
    Q: tuple

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise DimensionError("Q must be a square matrix")
        if not np.allclose(Q, Q.T, rtol=0, atol=1e-12):
            raise ValueError("Q must be symmetric")
        object.__setattr__(self, "Q", tuple(map(tuple, Q)))

    @classmethod
    def diagonal(cls, diag):
        return cls(np.diag(np.asarray(diag, dtype=float)))

    @property
    def h(self) -> int:
        return len(self.Q) - 1

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.Q)

    def to_dict(self):
        return {"type": "quadratic", "h": self.h, "Q": [list(r) for r in self.Q]}


@dataclass(frozen=True)
class StateProbe:
    """Target ``y(t) = x_index(t)``; a sanity harness, not a memory task."""

    index: int = 0
    h: int = 0


MemoryTask = Union[LinearTask, QuadraticTask]


def task_from_dict(spec: dict) -> MemoryTask:
    """Parse ``{"type": "linear"|"quadratic", "h": n, "L" | "Q_diag" | "Q": ...}``."""
    kind = spec.get("type")
    h = spec.get("h")
    if kind == "linear":
        if "L" not in spec:
            raise ConfigError("linear task needs L")
        task = LinearTask(spec["L"])
    elif kind == "quadratic":
        if "Q" in spec:
            task = QuadraticTask(spec["Q"])
        elif "Q_diag" in spec:
            task = QuadraticTask.diagonal(spec["Q_diag"])
        else:
            raise ConfigError("quadratic task needs Q or Q_diag")
    else:
        raise ConfigError(f"unknown task type {kind!r}")
    if h is not None and int(h) != task.h:
        raise ConfigError(f"task h={h} does not match weights of dimension {task.h + 1}")
    return task


def eval_task(task: MemoryTask, window) -> float:
    w = np.asarray(window, dtype=float)
    if w.shape != (task.h + 1,):
        raise DimensionError(f"window must have length {task.h + 1}")
    if isinstance(task, LinearTask):
        return float(task.weights @ w)
    return float(w @ task.matrix @ w)


def task_series(task: MemoryTask, signal) -> np.ndarray:
    """Targets ``y(t)`` for ``t = h..T-1`` (0-based) of an input sequence."""
    z = np.asarray(signal, dtype=float)
    if z.size <= task.h:
        raise DimensionError("signal shorter than the task window")
    # rows are (z(t), z(t-1), ..., z(t-h))
    windows = sliding_window_view(z, task.h + 1)[:, ::-1]
    if isinstance(task, LinearTask):
        return windows @ task.weights
    return np.einsum("ti,ij,tj->t", windows, task.matrix, windows)


def _need(m, order):
    if len(m) <= order:
        raise MomentLengthError(f"need input moments up to order {order}")


def task_mean(task: MemoryTask, input_moments) -> float:
    m = np.asarray(input_moments, dtype=float)
    _need(m, 2)
    if isinstance(task, LinearTask):
        return float(m[1] * task.weights.sum())
    Q = task.matrix
    off = Q.sum() - np.trace(Q)
    return float(m[2] * np.trace(Q) + m[1] ** 2 * off)


def task_variance(task: MemoryTask, sigma_z: float, input_moments=None) -> float:
    """Exact variance of ``y(t)`` for IID centered input.

    The quadratic case uses the raw fourth moment ``E[z**4]``; Gaussian
    moments are assumed when ``input_moments`` is omitted.
    """
    if isinstance(task, LinearTask):
        return float(sigma_z ** 2 * task.weights @ task.weights)
    Q = task.matrix
    s4 = sigma_z ** 4
    mu4 = 3.0 * s4 if input_moments is None else float(input_moments[4])
    diag = np.diag(Q)
    upper = np.triu(Q, 1)
    return float((mu4 - s4) * diag @ diag + 4.0 * s4 * np.sum(upper ** 2))


def _shifted(var: VarApprox, shift: int) -> np.ndarray:
    m = var.moments
    R = var.coeffs.shape[0]
    _need(m, R + shift)
    return m[1 + shift:R + 1 + shift] @ var.coeffs


def task_state_covariance(task: MemoryTask, var: VarApprox) -> np.ndarray:
    """``Cov(y(t), x(t))`` from the moving-average form of the surrogate.

    Only the lags that enter the task contribute, so the sum stops at
    ``j = h + 1``. For the quadratic task only the diagonal of ``Q``
    enters; off-diagonal products of independent centered inputs are
    uncorrelated with the state.
    """
    if spectral_radius(var.A) >= 1.0:
        raise UnstableError("connectivity matrix has spectral radius >= 1")
    m = var.moments
    s = 1.0 - var.cfg.decay
    q = _shifted(var, 0)
    if isinstance(task, LinearTask):
        weights = task.weights
        w = s * (_shifted(var, 1) - m[1] * q)
    else:
        weights = np.diag(task.matrix)
        w = s * (_shifted(var, 2) - m[2] * q)
    out = np.zeros(var.N)
    v = w.copy()                      # A^{j-1} w
    for j, coef in enumerate(weights):
        if j:
            v = var.A @ v
        if coef:
            out += coef * v
    return out
