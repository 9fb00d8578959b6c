"""Command-line frontend: ``tdr <command> --config PATH | --preset NAME``.

Each command reads one experiment document and writes CSV or JSON to
``--out`` (default stdout). Exit codes: 0 success, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

import jsonschema
import numpy as np

from . import __version__
from . import config as cfgmod
from .errors import ConfigError, TDRError
from .kernels import certify_stability, find_equilibria
from .optimize import (box_summary, format_float, mask_mean_sweep, maximize_capacity,
                       random_mask_nmse, surface_scan, write_scan_csv)
from .readout import gaussian_signal, monte_carlo_nmse, simulate_model
from .varmodel import (char_poly_spectral_radius, connectivity, row_sum_norm,
                       spectral_radius)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

_num_or_null = {"type": ["number", "null"]}
REPORT_SCHEMAS = {
    "equilibria": {
        "type": "object", "required": ["equilibria"],
        "properties": {"equilibria": {"type": "array", "items": {
            "type": "object", "required": ["x0", "derivative", "certificate"],
            "properties": {"x0": {"type": "number"}, "derivative": {"type": "number"},
                           "certificate": {"enum": ["certified_asymptotically_stable",
                                                    "certified_stable", "not_certified"]}}}}}},
    "stability": {
        "type": "object",
        "required": ["x0", "certificate", "row_sum_norm", "spectral_radius", "norm_bound_stable"],
        "properties": {"x0": {"type": "number"}, "row_sum_norm": {"type": "number"},
                       "spectral_radius": {"type": "number"},
                       "char_poly_spectral_radius": _num_or_null,
                       "norm_bound_stable": {"type": "boolean"}}},
    "capacity": {
        "type": "object",
        "required": ["capacity", "nmse_theoretical", "W_out", "a_out", "lambda", "x0"],
        "properties": {"capacity": {"type": "number", "minimum": 0, "maximum": 1},
                       "nmse_theoretical": {"type": "number"},
                       "W_out": {"type": "array", "items": {"type": "number"}},
                       "a_out": {"type": "number"}, "lambda": {"type": "number", "minimum": 0},
                       "x0": {"type": "number"}}},
    "optimize": {
        "type": "object", "required": ["results"],
        "properties": {"results": {"type": "array", "items": {
            "type": "object", "required": ["N", "optimization"],
            "properties": {"N": {"type": "integer"},
                           "optimization": {"type": "object",
                                            "required": ["theta_opt", "c_opt", "capacity_opt"]}}}}}},
}


def header_line(command: str, doc_name: str) -> str:
    return f"# tdrc {__version__} command={command} config={doc_name}"


def _threads(arg) -> int:
    if arg is not None:
        return max(1, int(arg))
    env = os.environ.get("TDR_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"TDR_THREADS must be an integer, got {env!r}") from exc
    return 1


def _apply_seed(doc: dict, seed):
    if seed is None:
        return doc
    for section in ("mc", "optimize", "random_masks"):
        if section in doc:
            doc[section]["seed"] = int(seed)
    doc.setdefault("mc", {})["seed"] = int(seed)
    return doc


def _emit_json(obj, out, command):
    obj = {"tdrc_version": __version__, **obj}
    schema = REPORT_SCHEMAS.get(command)
    if schema is not None:
        jsonschema.validate(json.loads(json.dumps(obj)), schema)
    out.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def cmd_equilibria(doc, args, out):
    exp = cfgmod.build_experiment(doc)
    eqs = find_equilibria(exp.kernel)
    _emit_json({"kernel": exp.kernel.to_dict(), "equilibria": [e.to_dict() for e in eqs]},
               out, "equilibria")


def cmd_stability(doc, args, out):
    exp = cfgmod.build_experiment(doc)
    eq = exp.operating_point()
    eq = certify_stability(exp.kernel, eq.x0)
    A = connectivity(exp.cfg, exp.kernel, eq.x0)
    phi = (1.0 - exp.cfg.decay) * eq.derivative
    rho_poly = char_poly_spectral_radius(exp.cfg, phi) if phi != 0 else None
    norm = row_sum_norm(A)
    _emit_json({**eq.to_dict(), "N": exp.cfg.N, "d": exp.cfg.d, "row_sum_norm": norm,
                "spectral_radius": spectral_radius(A), "char_poly_spectral_radius": rho_poly,
                "norm_bound_stable": bool(norm < 1.0)}, out, "stability")


def cmd_simulate(doc, args, out):
    exp = cfgmod.build_experiment(doc)
    sim = doc.get("simulate", {})
    T = int(sim.get("T", 100))
    x0 = float(sim["init"]) if "init" in sim else exp.operating_point().x0
    if sim.get("signal", "zero") == "zero":
        z = np.zeros(T)
    else:
        z = gaussian_signal(T, exp.sigma_z, doc.get("mc", {}).get("seed", 0))
    model = args.model or doc.get("mc", {}).get("model", "discrete")
    layers = simulate_model(model, exp.cfg, exp.kernel, exp.mask, x0, z, exp.sigma_z, exp.R)
    out.write(header_line("simulate", args.source) + "\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["t"] + [f"x_{i + 1}" for i in range(exp.cfg.N)])
    for t, row in enumerate(layers, start=1):
        w.writerow([t] + [format_float(v) for v in row])


def cmd_capacity(doc, args, out):
    exp = cfgmod.build_experiment(doc)
    x0 = exp.operating_point().x0
    rep = exp.theory(x0)
    _emit_json({**rep.to_dict(), "x0": x0, "N": exp.cfg.N}, out, "capacity")


def cmd_surface(doc, args, out):
    spec = cfgmod.build_scan(doc)
    rows = surface_scan(spec, workers=_threads(args.threads))
    write_scan_csv(out, rows, header_line("surface", args.source)
                   + f" axis1={spec.axis1.name} axis2={spec.axis2.name}")


def _optimize_one(doc, N):
    exp = cfgmod.build_experiment(doc, N)
    opt = doc.get("optimize")
    if opt is None:
        raise ConfigError("config has no optimize section")
    res = maximize_capacity(exp, opt["free"], opt["bounds"], opt.get("budget", 1000),
                            opt.get("restarts", 8), opt.get("seed", 0), opt.get("guard", True))
    entry = {"N": N, "optimization": res.to_dict(with_trace=False)}
    rm = doc.get("random_masks")
    if rm is not None:
        best = exp.with_mask(res.c_opt)
        for name, value in res.theta_opt.items():
            if name in ("eta", "gamma", "phi", "d"):
                best = best.with_param(name, value)
        values = random_mask_nmse(best, rm.get("n", 1000), rm.get("low", -3.0),
                                  rm.get("high", 3.0), rm.get("seed", 0))
        summary = box_summary(values)
        summary["failed"] = int(np.sum(~np.isfinite(values)))
        entry["random_masks"] = summary
    return entry


def cmd_optimize(doc, args, out):
    Ns = doc.get("random_masks", {}).get("N_values") or [doc["reservoir"]["N"]]
    _emit_json({"results": [_optimize_one(doc, int(N)) for N in Ns]}, out, "optimize")


def cmd_mc(doc, args, out):
    exp = cfgmod.build_experiment(doc)
    mc = doc.get("mc", {})
    model = args.model or mc.get("model", "discrete")
    seed = int(mc.get("seed", 0))
    x0 = exp.operating_point().x0
    w = csv.writer(out, lineterminator="\n")
    out.write(header_line("mc", args.source) + "\n")
    if args.sweep:
        sw = doc.get("sweep")
        if sw is None:
            raise ConfigError("config has no sweep section")
        rows = mask_mean_sweep(exp, sw["values"], seed, model) if sw["name"] == "mask_mean" \
            else None
        if rows is None:
            raise ConfigError("only mask_mean sweeps are supported")
        w.writerow(["mask_mean", "status", "crossed", "nmse", "nmse_theory"])
        for r in rows:
            w.writerow([format_float(r["mask_mean"]), r["status"], int(r["crossed"]),
                        format_float(r["nmse"]), format_float(r["nmse_theory"])])
        return
    w.writerow(["seed", "model", "nmse"])
    for i in range(args.repeats):
        s = seed + i
        err = monte_carlo_nmse(exp.cfg, exp.kernel, exp.mask, exp.task, x0, exp.sigma_z,
                               exp.lam, exp.mc.t_train, exp.mc.t_test, exp.mc.washout,
                               s, model, exp.R)
        w.writerow([s, model, format_float(err)])


COMMANDS = {
    "equilibria": (cmd_equilibria, "list equilibria with stability certificates"),
    "stability": (cmd_stability, "stability diagnostics at the operating point"),
    "simulate": (cmd_simulate, "simulate neuron layers to CSV"),
    "capacity": (cmd_capacity, "closed-form capacity report"),
    "surface": (cmd_surface, "two-parameter NMSE surface scan to CSV"),
    "optimize": (cmd_optimize, "maximize capacity over parameters and mask"),
    "mc": (cmd_mc, "Monte Carlo NMSE to CSV"),
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tdr", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"tdrc {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        s = sub.add_parser(name, help=help_)
        src = s.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", metavar="PATH", help="experiment JSON document")
        src.add_argument("--preset", choices=sorted(cfgmod.PRESETS), help="bundled experiment")
        s.add_argument("--out", metavar="PATH", help="output file (default stdout)")
        s.add_argument("--seed", type=int, help="override every seed in the config")
        s.add_argument("--threads", type=int, help="worker processes (env TDR_THREADS)")
        if name in ("simulate", "mc"):
            s.add_argument("--model", choices=["discrete", "continuous", "linearized"])
        if name == "mc":
            s.add_argument("--repeats", type=int, default=1, help="consecutive seeds to run")
            s.add_argument("--sweep", action="store_true", help="run the config's mask sweep")
    return p


def _load(args) -> dict:
    if args.config:
        args.source = os.path.basename(args.config)
        doc = cfgmod.load(args.config)
    else:
        args.source = args.preset
        doc = cfgmod.resolve({"preset": args.preset})
    return _apply_seed(doc, args.seed)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    func = COMMANDS[args.command][0]
    buf = io.StringIO()
    try:
        doc = _load(args)
        func(doc, args, buf)
    except ConfigError as exc:
        print(f"tdr: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TDRError, ArithmeticError, np.linalg.LinAlgError, ValueError) as exc:
        print(f"tdr: numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
