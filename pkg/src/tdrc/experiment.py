"""A complete reservoir experiment: kernel, geometry, mask, task and input.

:class:`Experiment` bundles everything the closed form and the Monte Carlo
simulators need, resolves the operating equilibrium by an explicit policy
and supports named parameter overrides for scans and optimization.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import ConfigError, DomainError, NotAnEquilibrium
from .kernels import Kernel, basin_interval, find_equilibria
from .readout import (DEFAULT_LAMBDA, DEFAULT_SIGMA_Z, CapacityReport,
                      MCSettings, monte_carlo_nmse, task_capacity)
from .reservoir import ReservoirConfig
from .tasks import MemoryTask
from .varmodel import DEFAULT_ORDER, VarApprox, build_var_approx

KERNEL_PARAMS = ("eta", "gamma", "phi", "p")
SCAN_PARAMS = ("d", "eta", "gamma", "phi", "mask_mean", "mask_variance")

Policy = Union[str, float]


def select_equilibrium(equilibria, policy: Policy):
    """Pick one equilibrium: ``"smallest"``, ``"largest"`` or the one
    nearest to a numeric target."""
    if not equilibria:
        raise NotAnEquilibrium("kernel has no equilibrium in the search interval")
    if policy == "smallest":
        return equilibria[0]
    if policy == "largest":
        return equilibria[-1]
    if isinstance(policy, str):
        raise ConfigError(f"unknown equilibrium policy {policy!r}")
    target = float(policy)
    return min(equilibria, key=lambda e: abs(e.x0 - target))


def set_mask_mean(mask, mean: float) -> np.ndarray:
    mask = np.asarray(mask, dtype=float)
    return mask - mask.mean() + mean


def set_mask_variance(mask, variance: float) -> np.ndarray:
    """Rescale the spread of ``mask`` about its mean to the given
    population variance."""
    mask = np.asarray(mask, dtype=float)
    if variance < 0:
        raise DomainError("mask variance must be non-negative")
    dev = mask - mask.mean()
    sd = dev.std()
    if sd == 0:
        if variance == 0:
            return mask.copy()
        raise DomainError("cannot set the variance of a constant mask")
    return mask.mean() + math.sqrt(variance) * dev / sd


@dataclass
class Experiment:
    kernel: Kernel
    cfg: ReservoirConfig
    mask: np.ndarray
    task: MemoryTask
    equilibrium: Policy = "largest"
    sigma_z: float = DEFAULT_SIGMA_Z
    lam: float = DEFAULT_LAMBDA
    R: int = DEFAULT_ORDER
    mc: MCSettings = field(default_factory=MCSettings)

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=float)
        if self.mask.shape != (self.cfg.N,):
            raise ConfigError(f"mask length {self.mask.size} does not match N={self.cfg.N}")

    def with_param(self, name: str, value: float) -> "Experiment":
        """Copy with one named parameter replaced."""
        value = float(value)
        if name == "d":
            return dataclasses.replace(self, cfg=ReservoirConfig(self.cfg.N, value))
        if name == "mask_mean":
            return dataclasses.replace(self, mask=set_mask_mean(self.mask, value))
        if name == "mask_variance":
            return dataclasses.replace(self, mask=set_mask_variance(self.mask, value))
        if name in KERNEL_PARAMS:
            if not hasattr(self.kernel, name):
                raise ConfigError(f"{type(self.kernel).__name__} has no parameter {name!r}")
            return dataclasses.replace(self, kernel=dataclasses.replace(self.kernel, **{name: value}))
        raise ConfigError(f"unknown parameter {name!r}")

    def with_mask(self, mask) -> "Experiment":
        return dataclasses.replace(self, mask=np.asarray(mask, dtype=float))

    def equilibria(self):
        return find_equilibria(self.kernel)

    def operating_point(self):
        return select_equilibrium(self.equilibria(), self.equilibrium)

    def var_approx(self, x0=None) -> VarApprox:
        if x0 is None:
            x0 = self.operating_point().x0
        return build_var_approx(self.cfg, self.kernel, x0, self.mask, self.sigma_z, self.R)

    def theory(self, x0=None) -> CapacityReport:
        return task_capacity(self.var_approx(x0), self.task, self.sigma_z, self.lam)

    def basin(self, x0=None):
        """Interval between the equilibria adjacent to the operating point."""
        eqs = self.equilibria()
        if x0 is None:
            x0 = select_equilibrium(eqs, self.equilibrium).x0
        return basin_interval(eqs, x0)

    def monte_carlo(self, model="discrete", seed=None, x0=None, check_basin=False,
                    **overrides) -> float:
        """Monte Carlo test NMSE; ``check_basin`` raises
        :class:`~tdrc.errors.BasinEscape` when the trajectory leaves the
        basin interval of the operating point."""
        if x0 is None:
            x0 = self.operating_point().x0
        basin = self.basin(x0) if check_basin else None
        mc = dataclasses.replace(self.mc, **overrides)
        return monte_carlo_nmse(
            self.cfg, self.kernel, self.mask, self.task, x0, self.sigma_z, self.lam,
            mc.t_train, mc.t_test, mc.washout, mc.seed if seed is None else seed,
            model, self.R, basin)

