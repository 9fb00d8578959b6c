"""Experiment configuration: JSON schema, bundled presets and parsing.

An experiment is a single JSON document. Presets bundle the parameter
sets of the reference experiments; a user config may start from a preset
with ``"preset": "fig4"`` and override any top-level section.
"""

from __future__ import annotations

import copy
import json

import jsonschema
import numpy as np

from .errors import ConfigError
from .experiment import Experiment, set_mask_mean, set_mask_variance
from .kernels import kernel_from_dict
from .optimize import Axis, ScanSpec, maximize_capacity
from .readout import MCSettings
from .reservoir import ReservoirConfig
from .tasks import task_from_dict

_num = {"type": "number"}
_axis = {
    "type": "object",
    "required": ["name", "min", "max", "steps"],
    "properties": {"name": {"enum": ["d", "eta", "gamma", "phi", "mask_mean", "mask_variance"]},
                   "min": _num, "max": _num, "steps": {"type": "integer", "minimum": 2}},
    "additionalProperties": False,
}

SCHEMA = {
    "type": "object",
    "required": ["kernel", "reservoir", "mask", "task"],
    "properties": {
        "preset": {"type": "string"},
        "kernel": {
            "type": "object",
            "required": ["type", "eta"],
            "properties": {"type": {"enum": ["mackey_glass", "ikeda"]},
                           "eta": _num, "gamma": _num, "p": {"type": "number", "exclusiveMinimum": 0},
                           "phi": _num},
            "additionalProperties": False,
        },
        "reservoir": {
            "type": "object",
            "required": ["N", "d"],
            "properties": {"N": {"type": "integer", "minimum": 1},
                           "d": {"type": "number", "exclusiveMinimum": 0}},
            "additionalProperties": False,
        },
        "mask": {
            "type": "object",
            "minProperties": 1, "maxProperties": 1,
            "properties": {
                "values": {"type": "array", "items": _num},
                "random": {"type": "object", "required": ["seed"],
                           "properties": {"seed": {"type": "integer", "minimum": 0},
                                          "low": _num, "high": _num},
                           "additionalProperties": False},
                "pattern": {"type": "object", "required": ["seed"],
                            "properties": {"seed": {"type": "integer", "minimum": 0},
                                           "mean": _num, "variance": {"type": "number", "minimum": 0}},
                            "additionalProperties": False},
                "optimized": {"type": "object",
                              "properties": {"seed": {"type": "integer", "minimum": 0},
                                             "low": _num, "high": _num,
                                             "budget": {"type": "integer", "minimum": 0},
                                             "restarts": {"type": "integer", "minimum": 1}},
                              "additionalProperties": False},
            },
            "additionalProperties": False,
        },
        "equilibrium": {"oneOf": [{"enum": ["smallest", "largest"]}, _num]},
        "input": {
            "type": "object",
            "properties": {"sigma_z": {"type": "number", "minimum": 0},
                           "distribution": {"enum": ["gaussian"]}},
            "additionalProperties": False,
        },
        "task": {
            "type": "object",
            "required": ["type"],
            "properties": {"type": {"enum": ["linear", "quadratic"]},
                           "h": {"type": "integer", "minimum": 0},
                           "L": {"type": "array", "items": _num, "minItems": 1},
                           "Q_diag": {"type": "array", "items": _num, "minItems": 1},
                           "Q": {"type": "array", "items": {"type": "array", "items": _num}}},
            "additionalProperties": False,
        },
        "lambda": {"type": "number", "minimum": 0},
        "taylor_order": {"type": "integer", "minimum": 1},
        "mc": {
            "type": "object",
            "properties": {"t_train": {"type": "integer", "minimum": 1},
                           "t_test": {"type": "integer", "minimum": 1},
                           "washout": {"type": "integer", "minimum": 0},
                           "seed": {"type": "integer", "minimum": 0},
                           "model": {"enum": ["discrete", "continuous", "linearized"]}},
            "additionalProperties": False,
        },
        "scan": {
            "type": "object",
            "required": ["axis1", "axis2"],
            "properties": {"axis1": _axis, "axis2": _axis,
                           "models": {"type": "array", "minItems": 1, "uniqueItems": True,
                                      "items": {"enum": ["theoretical", "discrete", "continuous"]}}},
            "additionalProperties": False,
        },
        "optimize": {
            "type": "object",
            "required": ["free", "bounds"],
            "properties": {"free": {"type": "array", "minItems": 1, "uniqueItems": True,
                                    "items": {"enum": ["mask", "d", "eta", "gamma", "phi"]}},
                           "bounds": {"type": "object",
                                      "additionalProperties": {"type": "array", "items": _num,
                                                               "minItems": 2, "maxItems": 2}},
                           "budget": {"type": "integer", "minimum": 0},
                           "restarts": {"type": "integer", "minimum": 1},
                           "seed": {"type": "integer", "minimum": 0},
                           "guard": {"type": "boolean"}},
            "additionalProperties": False,
        },
        "random_masks": {
            "type": "object",
            "properties": {"n": {"type": "integer", "minimum": 1}, "low": _num, "high": _num,
                           "seed": {"type": "integer", "minimum": 0},
                           "N_values": {"type": "array", "items": {"type": "integer", "minimum": 1}}},
            "additionalProperties": False,
        },
        "sweep": {
            "type": "object",
            "required": ["name", "values"],
            "properties": {"name": {"enum": ["mask_mean", "mask_variance"]},
                           "values": {"type": "array", "items": _num, "minItems": 1}},
            "additionalProperties": False,
        },
        "simulate": {
            "type": "object",
            "properties": {"T": {"type": "integer", "minimum": 1},
                           "signal": {"enum": ["zero", "gaussian"]},
                           "init": _num},
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

_Q3 = {"type": "quadratic", "h": 3, "Q_diag": [0, 1, 1, 1]}
_Q6 = {"type": "quadratic", "h": 6, "Q_diag": [0, 1, 1, 1, 1, 1, 1]}

PRESETS = {
    "fig2": {
        "kernel": {"type": "ikeda", "eta": 1.2443, "gamma": 1.4762, "phi": 0.1161},
        "reservoir": {"N": 20, "d": 0.2581},
        "mask": {"pattern": {"seed": 0, "mean": 0.0, "variance": 0.1}},
        "equilibrium": "smallest",
        "input": {"sigma_z": 0.01, "distribution": "gaussian"},
        "task": _Q3, "lambda": 1e-15, "taylor_order": 8,
        "mc": {"t_train": 15000, "t_test": 5000, "washout": 200, "seed": 1, "model": "discrete"},
        "scan": {"axis1": {"name": "mask_mean", "min": 0.0, "max": 0.6, "steps": 7},
                 "axis2": {"name": "mask_variance", "min": 0.01, "max": 1.0, "steps": 5},
                 "models": ["theoretical", "discrete"]},
        "sweep": {"name": "mask_mean", "values": [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6]},
    },
    "fig3": {
        "kernel": {"type": "mackey_glass", "eta": 2.0, "gamma": 0.796, "p": 2},
        "reservoir": {"N": 20, "d": 0.5},
        "mask": {"random": {"seed": 0, "low": -1.0, "high": 1.0}},
        "equilibrium": "largest",
        "input": {"sigma_z": 0.01, "distribution": "gaussian"},
        "task": _Q6, "lambda": 1e-15, "taylor_order": 8,
        "mc": {"t_train": 40000, "t_test": 10000, "washout": 200, "seed": 0, "model": "discrete"},
        "scan": {"axis1": {"name": "d", "min": 0.1, "max": 1.0, "steps": 15},
                 "axis2": {"name": "eta", "min": 1.1, "max": 3.0, "steps": 15},
                 "models": ["theoretical", "discrete", "continuous"]},
    },
    "fig4": {
        "kernel": {"type": "mackey_glass", "eta": 1.0781, "gamma": 0.796, "p": 2},
        "reservoir": {"N": 20, "d": 0.5},
        "mask": {"random": {"seed": 0, "low": -1.0, "high": 1.0}},
        "equilibrium": "largest",
        "input": {"sigma_z": 0.01, "distribution": "gaussian"},
        "task": _Q3, "lambda": 1e-15, "taylor_order": 8,
        "mc": {"t_train": 15000, "t_test": 5000, "washout": 200, "seed": 0, "model": "discrete"},
        "scan": {"axis1": {"name": "d", "min": 0.1, "max": 1.0, "steps": 10},
                 "axis2": {"name": "gamma", "min": 0.5, "max": 5.0, "steps": 10},
                 "models": ["theoretical", "discrete"]},
    },
    "fig5": {
        "kernel": {"type": "mackey_glass", "eta": 1.0781, "gamma": 0.796, "p": 2},
        "reservoir": {"N": 20, "d": 0.3},
        "mask": {"random": {"seed": 0, "low": -3.0, "high": 3.0}},
        "equilibrium": "largest",
        "input": {"sigma_z": 0.01, "distribution": "gaussian"},
        "task": _Q3, "lambda": 1e-15, "taylor_order": 8,
        "optimize": {"free": ["mask"], "bounds": {"mask": [-3.0, 3.0]},
                     "budget": 1500, "restarts": 4, "seed": 0, "guard": True},
        "random_masks": {"n": 1000, "low": -3.0, "high": 3.0, "seed": 0, "N_values": [5, 10, 20]},
    },
    "figE1": {
        "kernel": {"type": "mackey_glass", "eta": 1.3541, "gamma": 4.7901, "p": 2},
        "reservoir": {"N": 20, "d": 0.943},
        "mask": {"pattern": {"seed": 0, "mean": 0.0, "variance": 0.1}},
        "equilibrium": -0.5951,
        "input": {"sigma_z": 0.01, "distribution": "gaussian"},
        "task": _Q3, "lambda": 1e-15, "taylor_order": 8,
        "mc": {"t_train": 15000, "t_test": 5000, "washout": 200, "seed": 1, "model": "discrete"},
        "scan": {"axis1": {"name": "mask_mean", "min": 0.0, "max": 0.6, "steps": 7},
                 "axis2": {"name": "mask_variance", "min": 0.01, "max": 1.0, "steps": 5},
                 "models": ["theoretical", "discrete"]},
        "sweep": {"name": "mask_mean", "values": [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6]},
    },
    "figE2": {
        "kernel": {"type": "ikeda", "eta": 0.5, "gamma": 0.523, "phi": 0.3106},
        "reservoir": {"N": 20, "d": 0.5},
        "mask": {"random": {"seed": 0, "low": -1.0, "high": 1.0}},
        "equilibrium": "largest",
        "input": {"sigma_z": 0.01, "distribution": "gaussian"},
        "task": _Q3, "lambda": 1e-15, "taylor_order": 8,
        "mc": {"t_train": 15000, "t_test": 5000, "washout": 200, "seed": 0, "model": "discrete"},
        "scan": {"axis1": {"name": "d", "min": 0.1, "max": 1.0, "steps": 10},
                 "axis2": {"name": "eta", "min": 0.1, "max": 1.0, "steps": 10},
                 "models": ["theoretical", "discrete", "continuous"]},
    },
}


def preset(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return copy.deepcopy(PRESETS[name])


def resolve(doc: dict) -> dict:
    """Merge a document onto its preset (top-level sections replace) and
    validate the result."""
    doc = copy.deepcopy(doc)
    name = doc.pop("preset", None)
    if name is not None:
        merged = preset(name)
        merged.update(doc)
        doc = merged
    validate(doc)
    return doc


def validate(doc: dict):
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(map(str, exc.absolute_path)) or "<root>"
        raise ConfigError(f"{path}: {exc.message}") from None
    N = doc["reservoir"]["N"]
    values = doc["mask"].get("values")
    if values is not None and len(values) != N:
        raise ConfigError(f"mask has {len(values)} values but N={N}")
    task_from_dict(doc["task"])


def load(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return resolve(doc)


def unit_pattern(N: int, seed: int) -> np.ndarray:
    """Seeded zero-mean, unit-variance mask pattern."""
    u = np.random.default_rng(seed).uniform(-1.0, 1.0, N)
    u = u - u.mean()
    sd = u.std()
    return u / sd if sd > 0 else u


def build_mask(spec: dict, N: int) -> np.ndarray | None:
    """Mask from its config fragment; ``None`` for an optimized mask."""
    if "values" in spec:
        return np.asarray(spec["values"], dtype=float)
    if "random" in spec:
        r = spec["random"]
        return np.random.default_rng(r["seed"]).uniform(r.get("low", -1.0), r.get("high", 1.0), N)
    if "pattern" in spec:
        p = spec["pattern"]
        u = unit_pattern(N, p["seed"])
        return set_mask_mean(set_mask_variance(u, p.get("variance", 1.0)), p.get("mean", 0.0))
    return None


def build_experiment(doc: dict, N: int | None = None) -> Experiment:
    """Experiment described by a validated document, optionally resized
    to ``N`` neurons (random and pattern masks are redrawn)."""
    res = doc["reservoir"]
    N = int(res["N"] if N is None else N)
    kernel = kernel_from_dict(doc["kernel"])
    inp = doc.get("input", {})
    mcd = {k: v for k, v in doc.get("mc", {}).items() if k != "model"}
    mask = build_mask(doc["mask"], N)
    opt = doc["mask"].get("optimized")
    exp = Experiment(kernel, ReservoirConfig(N, float(res["d"])),
                     np.zeros(N) if mask is None else mask,
                     task_from_dict(doc["task"]), doc.get("equilibrium", "largest"),
                     float(inp.get("sigma_z", 0.01)), float(doc.get("lambda", 1e-15)),
                     int(doc.get("taylor_order", 8)), MCSettings(**mcd))
    if opt is not None:
        lo, hi = opt.get("low", -3.0), opt.get("high", 3.0)
        res_opt = maximize_capacity(
            exp.with_mask(np.random.default_rng(opt.get("seed", 0)).uniform(lo, hi, N)),
            ["mask"], {"mask": (lo, hi)}, opt.get("budget", 1000), opt.get("restarts", 4),
            opt.get("seed", 0))
        exp = exp.with_mask(res_opt.c_opt)
    return exp


def build_scan(doc: dict, seed: int | None = None) -> ScanSpec:
    if "scan" not in doc:
        raise ConfigError("config has no scan section")
    s = doc["scan"]
    ax = [Axis(a["name"], a["min"], a["max"], a["steps"]) for a in (s["axis1"], s["axis2"])]
    mc_seed = doc.get("mc", {}).get("seed", 0) if seed is None else seed
    return ScanSpec(ax[0], ax[1], build_experiment(doc),
                    tuple(s.get("models", ["theoretical"])), mc_seed)
