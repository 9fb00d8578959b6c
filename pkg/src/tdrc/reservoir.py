"""Time-delay reservoir simulation.

Neuron layers are stored as rows of a ``(T, N)`` array: ``layers[t, i-1]``
is the ``i``-th virtual neuron of layer ``t``. Two models are available:

discrete
    The Euler recursion
    ``x_i(t) = e^{-xi} x_{i-1}(t) + (1 - e^{-xi}) f(x_i(t-1), c_i z(t))``
    with ``x_0(t) = x_N(t-1)`` and ``xi = log(1 + d)``.
continuous
    Fixed-step RK4 on ``x'(t) = -x(t) + f(x(t - tau), I(t))`` with step
    ``d / substeps``, zero-order hold of ``c_i z(t)`` on the ``i``-th neuron
    sub-interval, and linear interpolation of the stored history for the
    delayed argument.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.signal import lfilter

from .errors import DimensionError, NonFiniteError
from .kernels import Kernel


@dataclass(frozen=True)
class ReservoirConfig:
    """Number of virtual neurons ``N`` and their separation ``d``."""

    N: int
    d: float

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")
        if not (math.isfinite(self.d) and self.d > 0):
            raise ValueError("d must be a positive real")

    @property
    def tau(self) -> float:
        return self.N * self.d

    @property
    def xi(self) -> float:
        return math.log1p(self.d)

    @cached_property
    def decay(self) -> float:
        """``e^{-xi} = 1 / (1 + d)``."""
        return math.exp(-self.xi)

    @cached_property
    def _carry(self) -> np.ndarray:
        # weight of x_N(t-1) in x_i(t): e^{-i xi}
        return self.decay ** np.arange(1, self.N + 1)

    @cached_property
    def _mix(self) -> np.ndarray:
        # (1 - e^{-xi}) e^{-(i-j) xi} for j <= i
        i = np.arange(self.N)
        expo = i[:, None] - i[None, :]
        m = np.where(expo >= 0, self.decay ** np.maximum(expo, 0), 0.0)
        return (1.0 - self.decay) * m


def check_mask(cfg: ReservoirConfig, mask) -> np.ndarray:
    c = np.asarray(mask, dtype=float)
    if c.shape != (cfg.N,):
        raise DimensionError(f"mask must have length N={cfg.N}, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise ValueError("mask entries must be finite")
    return c


def multiplex(mask, z: float) -> np.ndarray:
    """Spread the scalar input ``z`` over the delay line: ``I = c z``."""
    return np.asarray(mask, dtype=float) * z


def step_discrete(cfg: ReservoirConfig, k: Kernel, prev, I) -> np.ndarray:
    """One application of the reservoir map ``F(prev, I)``.

    Evaluated in the unrolled form
    ``x_i = e^{-i xi} x_N(t-1) + (1-e^{-xi}) sum_j e^{-(i-j) xi} f_j``.
    """
    prev = np.asarray(prev)
    fv = k.f(prev, I)
    return cfg._carry * prev[-1] + cfg._mix @ fv


def step_discrete_sweep(cfg: ReservoirConfig, k: Kernel, prev, I) -> np.ndarray:
    """Same map as :func:`step_discrete`, computed neuron by neuron."""
    prev = np.asarray(prev, dtype=float)
    I = np.asarray(I, dtype=float)
    e = cfg.decay
    out = np.empty(cfg.N)
    left = prev[-1]
    for i in range(cfg.N):
        left = e * left + (1.0 - e) * float(k.f(prev[i], I[i]))
        out[i] = left
    return out


def run_discrete(cfg: ReservoirConfig, k: Kernel, mask, signal, init) -> np.ndarray:
    """Drive the discrete reservoir with ``signal``; returns ``(T, N)`` layers.

    ``init`` is layer 0 (a length-N vector or a scalar broadcast to all
    neurons); the returned array holds layers ``1..T``.
    """
    c = check_mask(cfg, mask)
    z = np.asarray(signal, dtype=float)
    x = np.broadcast_to(np.asarray(init, dtype=float), (cfg.N,)).copy()
    out = np.empty((z.size, cfg.N))
    carry, mix, f = cfg._carry, cfg._mix, k.f
    for t in range(z.size):
        x = carry * x[-1] + mix @ f(x, c * z[t])
        out[t] = x
    if not np.all(np.isfinite(out)):
        raise NonFiniteError("discrete trajectory escaped to a non-finite value")
    return out


def _rk4_weights(h: float):
    """Coefficients of RK4 applied to ``x' = -x + g(t)``.

    One step reads ``x+ = R x + w0 g(t) + wm g(t + h/2) + w1 g(t + h)``.
    """
    R = 1.0 - h + h ** 2 / 2 - h ** 3 / 6 + h ** 4 / 24
    w0 = h / 6 * (1.0 - h + h ** 2 / 2 - h ** 3 / 4)
    wm = h / 6 * (4.0 - 2.0 * h + h ** 2 / 2)
    w1 = h / 6
    return R, w0, wm, w1


def run_continuous(cfg: ReservoirConfig, k: Kernel, mask, signal, init_value: float,
                   substeps: int = 5) -> np.ndarray:
    """Integrate the delay differential equation and sample neuron layers.

    The history on ``[-tau, 0]`` is the constant ``init_value``. With step
    ``h = d / substeps`` every delayed argument falls on a stored grid
    point or exactly half-way between two, so the delayed term within one
    delay period depends only on the previous period. Each RK4 step is
    therefore an affine map of the current state and the period is
    advanced with a single linear filter.
    """
    c = check_mask(cfg, mask)
    z = np.asarray(signal, dtype=float)
    N, m = cfg.N, int(substeps)
    h = cfg.d / m
    R, w0, wm, w1 = _rk4_weights(h)
    M = N * m
    hold = np.repeat(np.arange(N), m)     # neuron sub-interval of each step
    prev = np.full(M + 1, float(init_value))   # solution on the previous period
    out = np.empty((z.size, N))
    for t in range(z.size):
        I = c[hold] * z[t]
        g0 = k.f(prev[:-1], I)
        gm = k.f(0.5 * (prev[:-1] + prev[1:]), I)
        g1 = k.f(prev[1:], I)
        b = w0 * g0 + wm * gm + w1 * g1
        x, _ = lfilter([1.0], [1.0, -R], b, zi=[R * prev[-1]])
        nxt = np.empty(M + 1)
        nxt[0] = prev[-1]
        nxt[1:] = x
        out[t] = nxt[m::m]
        prev = nxt
    if not np.all(np.isfinite(out)):
        raise NonFiniteError("continuous trajectory escaped to a non-finite value")
    return out


def write_layers_csv(path, layers, t0: int = 1):
    """Write layers as CSV with columns ``t, x_1..x_N``."""
    layers = np.atleast_2d(layers)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x_{i + 1}" for i in range(layers.shape[1])])
        for t, row in enumerate(layers, start=t0):
            w.writerow([t] + [format(v, ".17g") for v in row])
