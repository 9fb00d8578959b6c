"""Parameter-surface scans and capacity maximization.

Every grid cell and every optimizer restart is an independent work item.
Cells draw their Monte Carlo seed from ``SeedSequence([seed, index])`` and
results are merged by index, so tables do not depend on scheduling.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import (BasinEscape, ConfigError, NoFeasiblePoint, NonFiniteError,
                     SingularError, TDRError, UnstableError)
from .experiment import SCAN_PARAMS, Experiment
from .kernels import basin_interval
from .reservoir import run_discrete
from .readout import gaussian_signal

MODELS = ("theoretical", "discrete", "continuous")
STATUSES = ("ok", "unstable_surrogate", "trajectory_escape", "domain_error")
SCAN_COLUMNS = ("axis1", "axis2", "status", "nmse_theory", "nmse_discrete", "nmse_continuous")


def status_of(exc: Exception) -> str:
    if isinstance(exc, (UnstableError, SingularError)):
        return "unstable_surrogate"
    if isinstance(exc, (NonFiniteError, BasinEscape)):
        return "trajectory_escape"
    if isinstance(exc, TDRError):
        return "domain_error"
    raise exc


def cell_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


@dataclass(frozen=True)
class Axis:
    name: str
    lo: float
    hi: float
    steps: int

    def __post_init__(self):
        if self.name not in SCAN_PARAMS:
            raise ConfigError(f"cannot scan parameter {self.name!r}")
        if int(self.steps) < 2:
            raise ConfigError("an axis needs at least 2 steps")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, int(self.steps))


@dataclass
class ScanSpec:
    axis1: Axis
    axis2: Axis
    base: Experiment
    models: tuple = ("theoretical",)
    seed: int = 0
    check_basin: bool = True

    def __post_init__(self):
        if self.axis1.name == self.axis2.name:
            raise ConfigError("scan axes must name distinct parameters")
        bad = set(self.models) - set(MODELS)
        if bad:
            raise ConfigError(f"unknown models {sorted(bad)}")

    def cells(self):
        """``(index, value1, value2)`` in row-major order of axis1, axis2."""
        idx = 0
        for v1 in self.axis1.values:
            for v2 in self.axis2.values:
                yield idx, float(v1), float(v2)
                idx += 1


def _scan_cell(spec: ScanSpec, index: int, v1: float, v2: float) -> dict:
    row = {"axis1": v1, "axis2": v2, "status": "ok",
           "nmse_theory": math.nan, "nmse_discrete": math.nan, "nmse_continuous": math.nan}
    try:
        exp = spec.base.with_param(spec.axis1.name, v1).with_param(spec.axis2.name, v2)
        x0 = exp.operating_point().x0
    except TDRError as exc:
        row["status"] = status_of(exc)
        return row
    seed = cell_seed(spec.seed, index)
    if "theoretical" in spec.models:
        try:
            row["nmse_theory"] = exp.theory(x0).nmse_theoretical
        except TDRError as exc:
            row["status"] = status_of(exc)
    for model in ("discrete", "continuous"):
        if model in spec.models:
            try:
                row[f"nmse_{model}"] = exp.monte_carlo(model, seed=seed, x0=x0,
                                                       check_basin=spec.check_basin)
            except TDRError as exc:
                row[f"nmse_{model}"] = getattr(exc, "nmse", math.nan)
                if row["status"] == "ok":
                    row["status"] = status_of(exc)
    return row


def _scan_cell_star(args):
    return _scan_cell(*args)


def surface_scan(spec: ScanSpec, workers: int = 1) -> list[dict]:
    """One row per grid cell; failures are kept with a status code."""
    jobs = [(spec, i, v1, v2) for i, v1, v2 in spec.cells()]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_scan_cell_star, jobs, chunksize=1))
    return [_scan_cell(*job) for job in jobs]


def format_float(v) -> str:
    return format(float(v), ".17g")


def write_scan_csv(fh, rows, header_line=None):
    if header_line:
        fh.write(header_line + "\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SCAN_COLUMNS)
    for r in rows:
        w.writerow([r[c] if c == "status" else format_float(r[c]) for c in SCAN_COLUMNS])


def surface_matrix(rows, spec: ScanSpec, column: str) -> np.ndarray:
    """Reshape a scan column into an ``(axis1.steps, axis2.steps)`` array."""
    vals = np.array([r[column] if r["status"] == "ok" else math.nan for r in rows])
    return vals.reshape(spec.axis1.steps, spec.axis2.steps)


# -- optimization ------------------------------------------------------------

@dataclass
class MultistartResult:
    x: np.ndarray
    value: float
    trace: list
    evaluations: int


def nelder_mead_multistart(fun, bounds, n_starts: int = 8, budget: int = 1000,
                           seed: int = 0, initial=None) -> MultistartResult:
    """Maximize ``fun`` inside box ``bounds`` from seeded random starts.

    ``fun`` returns ``-inf`` at infeasible points. ``budget`` caps the
    function evaluations of each Nelder-Mead refinement; with ``budget=0``
    only the starting points are evaluated. Every evaluation is recorded in
    ``trace`` as ``(x, value)``.
    """
    bounds = np.asarray(bounds, dtype=float)
    lo, hi = bounds[:, 0], bounds[:, 1]
    rng = np.random.default_rng(seed)
    starts = [] if initial is None else [np.clip(np.asarray(initial, dtype=float), lo, hi)]
    starts += [rng.uniform(lo, hi) for _ in range(n_starts)]
    trace = []

    def scored(x):
        x = np.asarray(x, dtype=float).copy()
        v = float(fun(x))
        trace.append((x, v))
        return v

    def neg(x):
        v = scored(x)
        return math.inf if v == -math.inf else -v

    for x_start in starts:
        v0 = scored(x_start)
        if budget > 0 and v0 > -math.inf:
            minimize(neg, x_start, method="Nelder-Mead", bounds=list(map(tuple, bounds)),
                     options={"maxfev": int(budget), "xatol": 1e-10, "fatol": 1e-14,
                              "adaptive": len(lo) > 3})
    values = np.array([v for _, v in trace])
    if not np.any(values > -math.inf):
        raise NoFeasiblePoint("every evaluated point was infeasible")
    best = int(np.argmax(values))
    return MultistartResult(trace[best][0], float(values[best]), trace, len(trace))


@dataclass
class OptimizationResult:
    theta_opt: dict
    c_opt: np.ndarray
    capacity_opt: float
    x0: float
    trace: list = field(repr=False)
    evaluations: int = 0

    @property
    def nmse_opt(self) -> float:
        return 1.0 - self.capacity_opt

    def to_dict(self, with_trace: bool = True):
        d = {"theta_opt": self.theta_opt, "c_opt": np.asarray(self.c_opt).tolist(),
             "capacity_opt": self.capacity_opt, "nmse_opt": self.nmse_opt,
             "x0": self.x0, "evaluations": self.evaluations}
        if with_trace:
            d["trace"] = [{"x": np.asarray(x).tolist(),
                           "objective": v if math.isfinite(v) else None} for x, v in self.trace]
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


class CapacityObjective:
    """Analytical capacity as a function of a flat parameter vector.

    ``free`` lists kernel or geometry parameters (``eta``, ``gamma``,
    ``phi``, ``d``) and optionally ``"mask"``, which contributes all ``N``
    mask entries. With ``guard`` on, points whose operating equilibrium is
    not certified stable are infeasible.
    """

    def __init__(self, base: Experiment, free, guard: bool = True):
        self.base = base
        self.free = list(free)
        self.guard = guard
        for name in self.free:
            if name != "mask" and name not in SCAN_PARAMS:
                raise ConfigError(f"cannot optimize parameter {name!r}")

    @property
    def dim(self) -> int:
        return sum(self.base.cfg.N if n == "mask" else 1 for n in self.free)

    def experiment(self, x) -> Experiment:
        exp, i = self.base, 0
        for name in self.free:
            if name == "mask":
                exp = exp.with_mask(x[i:i + exp.cfg.N])
                i += exp.cfg.N
            else:
                exp = exp.with_param(name, x[i])
                i += 1
        return exp

    def initial(self) -> np.ndarray:
        parts = []
        for name in self.free:
            if name == "mask":
                parts.extend(self.base.mask)
            elif name == "d":
                parts.append(self.base.cfg.d)
            elif name == "mask_mean":
                parts.append(self.base.mask.mean())
            elif name == "mask_variance":
                parts.append(self.base.mask.var())
            else:
                parts.append(getattr(self.base.kernel, name))
        return np.array(parts, dtype=float)

    def evaluate(self, x):
        """``(capacity, x0)``; capacity is ``-inf`` when infeasible."""
        try:
            exp = self.experiment(x)
            eq = exp.operating_point()
            if self.guard and not eq.certified:
                return -math.inf, eq.x0
            return exp.theory(eq.x0).capacity, eq.x0
        except (TDRError, ValueError):
            return -math.inf, math.nan

    def __call__(self, x) -> float:
        return self.evaluate(x)[0]

    def expand_bounds(self, bounds: dict) -> np.ndarray:
        out = []
        for name in self.free:
            if name not in bounds:
                raise ConfigError(f"missing bounds for {name!r}")
            lo, hi = map(float, bounds[name])
            out.extend([(lo, hi)] * (self.base.cfg.N if name == "mask" else 1))
        return np.array(out)


def maximize_capacity(base: Experiment, free, bounds: dict, budget: int = 1000,
                      n_starts: int = 8, seed: int = 0, guard: bool = True,
                      include_base: bool = True) -> OptimizationResult:
    """Maximize the analytical capacity over the ``free`` parameters."""
    obj = CapacityObjective(base, free, guard)
    box = obj.expand_bounds(bounds)
    res = nelder_mead_multistart(obj, box, n_starts, budget, seed,
                                 obj.initial() if include_base else None)
    exp = obj.experiment(res.x)
    cap, x0 = obj.evaluate(res.x)
    theta = {n: float(getattr(exp.kernel, n)) for n in ("eta", "gamma", "phi", "p")
             if hasattr(exp.kernel, n)}
    theta["d"] = exp.cfg.d
    return OptimizationResult(theta, exp.mask, cap, x0, res.trace, res.evaluations)


# -- random masks ------------------------------------------------------------

def box_summary(values) -> dict:
    """Quartiles, 1.5 IQR whiskers, outliers and mean of finite values."""
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        raise ValueError("no finite values to summarize")
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    iqr = q3 - q1
    lo, hi = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    out = v[(v < lo) | (v > hi)]
    return {"n": int(v.size), "median": float(med), "q1": float(q1), "q3": float(q3),
            "whisker_low": float(lo), "whisker_high": float(hi),
            "outliers": sorted(map(float, out)), "mean": float(v.mean())}


def random_mask_nmse(base: Experiment, n_masks: int, low: float = -3.0, high: float = 3.0,
                     seed: int = 0, model: str = "theoretical") -> np.ndarray:
    """NMSE of ``n_masks`` masks drawn uniformly on ``[low, high]``.

    Failed configurations give ``nan``.
    """
    if n_masks < 1:
        raise ValueError("n_masks must be >= 1")
    rng = np.random.default_rng(seed)
    masks = rng.uniform(low, high, size=(n_masks, base.cfg.N))
    x0 = base.operating_point().x0
    out = np.empty(n_masks)
    for i, m in enumerate(masks):
        exp = base.with_mask(m)
        try:
            if model == "theoretical":
                out[i] = exp.theory(x0).nmse_theoretical
            else:
                out[i] = exp.monte_carlo(model, seed=cell_seed(seed, i), x0=x0)
        except TDRError:
            out[i] = math.nan
    return out


def random_mask_study(base: Experiment, n_masks: int, low: float = -3.0, high: float = 3.0,
                      seed: int = 0, model: str = "theoretical") -> dict:
    values = random_mask_nmse(base, n_masks, low, high, seed, model)
    summary = box_summary(values)
    summary["failed"] = int(np.sum(~np.isfinite(values)))
    return summary


# -- basin crossing ----------------------------------------------------------

def basin_crossing(layers, equilibria, x0: float) -> bool:
    """Whether any neuron value leaves the basin interval of ``x0``."""
    lo, hi = basin_interval(equilibria, x0)
    layers = np.asarray(layers)
    return bool(np.any(layers <= lo) or np.any(layers >= hi))


def mask_mean_sweep(base: Experiment, means, seed: int = 0, model: str = "discrete") -> list[dict]:
    """Monte Carlo NMSE and basin-crossing flag as the mask mean varies.

    All sweep points share one input realization so that differences come
    from the mask alone.
    """
    eqs = base.equilibria()
    x0 = base.operating_point().x0
    mc = base.mc
    rows = []
    for m in means:
        exp = base.with_param("mask_mean", m)
        row = {"mask_mean": float(m), "status": "ok", "nmse": math.nan,
               "nmse_theory": math.nan, "crossed": False}
        try:
            row["nmse_theory"] = exp.theory(x0).nmse_theoretical
        except TDRError as exc:
            row["status"] = status_of(exc)
        try:
            z = gaussian_signal(mc.washout + mc.t_train + mc.t_test, exp.sigma_z, seed)
            layers = run_discrete(exp.cfg, exp.kernel, exp.mask, z, x0)
            row["crossed"] = basin_crossing(layers, eqs, x0)
            row["nmse"] = exp.monte_carlo(model, seed=seed, x0=x0)
        except TDRError as exc:
            row["status"] = status_of(exc)
            row["crossed"] = True
        rows.append(row)
    return rows
