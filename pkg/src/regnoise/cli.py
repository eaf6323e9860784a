"""Batch command line front end.

Every command takes its parameters either from flags or from a JSON config
file (``--config``); flags win. The parsed configuration is echoed into each
report. Exit codes: 0 pass, 1 experiment failed, 2 usage error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import LabError, MaxItersExceeded
from .experiments import (
    ExperimentReport,
    contraction_rate_experiment,
    expansion_rate_experiment,
    heat_kernel_probe,
    semigroup_identity_experiment,
    sewing_demo_experiment,
    threshold_scan,
    variance_identity_experiment,
    write_report,
)
from .noise import TimeGrid, sample_path, validate_hurst, write_path_csv
from .rng import experiment_seed, worker_count
from .solver import SolutionPath, SolverConfig, builtin_drift, euler_system_solve, picard_solve
from .solver.conditions import strong_condition, weak_condition

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3

DRIFTS = ("abs_pow", "sign_pow", "smooth", "zero")
GENERATORS = ("exact", "mvn")


class UsageError(Exception):
    pass


def _bool(v) -> bool:
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _floats(v) -> list:
    if isinstance(v, str):
        v = [x for x in v.split(",") if x.strip()]
    if not isinstance(v, (list, tuple)):
        raise ValueError(f"expected a list of numbers, got {v!r}")
    return [float(x) for x in v]


def _int(v) -> int:
    if isinstance(v, bool) or (isinstance(v, float) and not v.is_integer()):
        raise ValueError(f"expected an integer, got {v!r}")
    return int(v)


def _float(v) -> float:
    if isinstance(v, bool):
        raise ValueError(f"expected a number, got {v!r}")
    x = float(v)
    if not math.isfinite(x):
        raise ValueError(f"expected a finite number, got {v!r}")
    return x


PARAM_TYPES = {
    "hurst": _float, "alpha": _float, "K": _float, "eps": _float, "tol": _float, "s": _float, "t": _float,
    "past_truncation": _float,
    "n_steps": _int, "dim": _int, "n_samples": _int, "cells": _int, "n_paths": _int, "n_partitions": _int,
    "level": _int, "max_iters": _int, "n_outer": _int, "n_inner": _int, "n_trials": _int,
    "quadrature_nodes": _int,
    "mvn_scale": _bool, "conditional": _bool,
    "generator": str, "drift": str, "scheme": str,
    "spacings": _floats, "h_list": _floats, "alpha_list": _floats, "t_small": _floats, "t_values": _floats,
}

# parameter defaults per command; None defers to the experiment's own default
COMMANDS = {
    "gen-fbm": {"hurst": 1.5, "n_steps": 1024, "dim": 1, "generator": "exact", "mvn_scale": False,
                "past_truncation": 50.0},
    "check-variance": {"hurst": 1.5, "spacings": None, "n_samples": 10_000, "dim": 1, "cells": 1024},
    "sew-demo": {"n_paths": 200, "n_partitions": 50, "level": 14},
    "solve": {"hurst": 1.5, "alpha": 0.8, "drift": "abs_pow", "K": 5.0, "n_steps": 1024, "dim": 1, "eps": None,
              "tol": None, "max_iters": 60, "generator": "exact", "scheme": "picard"},
    "expansion-rate": {"hurst": 1.5, "alpha": 0.8, "K": 5.0, "spacings": None, "n_outer": 100, "n_inner": 64,
                       "eps": None, "s": 0.5, "n_steps": 1024, "drift": "abs_pow", "conditional": True},
    "threshold-scan": {"h_list": None, "alpha_list": None, "K": 5.0, "n_paths": 8, "n_steps": 256},
    "contraction": {"hurst": 1.5, "alpha": 0.8, "K": 5.0, "t_small": None, "n_paths": 100, "n_steps": 1024,
                    "drift": "abs_pow"},
    "semigroup": {"hurst": 1.5, "alpha": 0.8, "s": 0.5, "t": 0.75, "n_samples": 64, "n_outer": 50,
                  "n_steps": 1000, "dim": 1},
    "heatkernel": {"hurst": 1.5, "alpha": 0.8, "n_trials": 1000, "t_values": None},
}

TOP_LEVEL_KEYS = {"command", "seed", "output_dir", "workers", "params"}


@dataclass
class CliConfig:
    command: str
    params: dict
    output_dir: Path = Path(".")
    seed: int = 0
    workers: int = 1
    overridden: list = field(default_factory=list)

    def echo(self) -> dict:
        """Reproducible part of the configuration (output location and worker count excluded)."""
        return {"command": self.command, "seed": self.seed, "params": dict(self.params)}


def _coerce(name: str, value):
    if value is None:
        return None
    try:
        return PARAM_TYPES[name](value)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"parameter '{name}': {exc}") from None


def _check(cond: bool, key: str, msg: str):
    if not cond:
        raise UsageError(f"parameter '{key}': {msg}")


def _validate_hurst_value(key: str, h: float):
    try:
        validate_hurst(h)
    except ValueError as exc:
        raise UsageError(f"parameter '{key}': {exc} (H must be positive and non-integer)") from None


def validate_params(command: str, p: dict):
    """Preconditions of the target operation, checked before any computation."""
    for key, v in p.items():
        if v is None:
            continue
        if key == "hurst":
            _validate_hurst_value(key, v)
        elif key == "h_list":
            _check(0 < len(v) <= 8, key, "needs between 1 and 8 values")
            for h in v:
                _validate_hurst_value(key, h)
        elif key == "alpha":
            _check(0 < v <= 1, key, f"must lie in (0, 1], got {v}")
        elif key == "alpha_list":
            _check(0 < len(v) <= 8, key, "needs between 1 and 8 values")
            _check(all(0 < a <= 1 for a in v), key, "values must lie in (0, 1]")
        elif key in ("spacings", "t_small", "t_values"):
            _check(all(0 < x <= 1 for x in v), key, "values must lie in (0, 1]")
            _check(len(v) >= 3 or key == "t_small" and len(v) >= 1, key, "needs at least three values")
        elif key in ("K", "tol", "eps", "past_truncation"):
            _check(v > 0 or key == "K" and v == 0, key, f"must be positive, got {v}")
        elif PARAM_TYPES[key] is _int:
            _check(v >= 1, key, f"must be a positive integer, got {v}")
        elif key == "generator":
            _check(v in GENERATORS, key, f"must be one of {', '.join(GENERATORS)}")
        elif key == "drift":
            _check(v in DRIFTS, key, f"must be one of {', '.join(DRIFTS)}")
        elif key == "scheme":
            _check(v in ("picard", "euler"), key, "must be picard or euler")
    if "past_truncation" in p:
        _check(p["past_truncation"] >= 1, "past_truncation", "must be at least 1")
    if command == "semigroup":
        _check(0 <= p["s"] < p["t"] <= 1, "t", "need 0 <= s < t <= 1")
        _check(p["n_samples"] >= 4 and p["n_samples"] % 2 == 0, "n_samples", "must be an even number >= 4")
        for key in ("s", "t"):
            _check(abs(p[key] * p["n_steps"] - round(p[key] * p["n_steps"])) < 1e-9, key,
                   "must be a grid point")
    if command == "expansion-rate":
        _check(0 <= p["s"] < 1, "s", "must lie in [0, 1)")
        _check(p["n_inner"] >= 2 and p["n_inner"] % 2 == 0, "n_inner", "must be an even number >= 2")
        _check(strong_condition(p["hurst"], p["alpha"]) or weak_condition(p["hurst"], p["alpha"]), "alpha",
               "neither alpha > 1 - 1/(2H) nor alpha > 1 - 1/H holds")
    if command == "contraction":
        _check(weak_condition(p["hurst"], p["alpha"]), "alpha", "alpha > 1 - 1/H is required")
    if command == "solve" and p.get("eps") is not None:
        _check(p["eps"] < p["hurst"], "eps", "must be smaller than hurst")
    if command == "sew-demo":
        _check(p["n_paths"] >= 2, "n_paths", "must be at least 2")
        _check(p["level"] <= 20, "level", "must be at most 20")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="regnoise",
        description="Extended fBm noise, numerical sewing and regularisation-by-noise experiments.",
        argument_default=argparse.SUPPRESS,
    )
    ap.add_argument("--command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="JSON file with command, seed, output_dir and params")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--output-dir", dest="output_dir")
    ap.add_argument("--workers", type=int, help="worker threads (default: LAB_THREADS or 1)")
    for name in PARAM_TYPES:
        ap.add_argument("--" + name.replace("_", "-"), dest=name, metavar=name.upper())
    return ap


def parse_config(argv) -> CliConfig:
    """Merge the optional JSON file with flag overrides; raises UsageError naming the bad key."""
    ap = build_parser()
    ns = vars(ap.parse_args(argv))
    file_cfg = {}
    if "config" in ns:
        try:
            file_cfg = json.loads(Path(ns.pop("config")).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file: {exc}") from None
        if not isinstance(file_cfg, dict):
            raise UsageError("config file must contain a JSON object")
        for key in file_cfg:
            if key not in TOP_LEVEL_KEYS:
                raise UsageError(f"unknown config key '{key}'")
    command = ns.pop("command", file_cfg.get("command"))
    if command is None:
        raise UsageError("no command given (use --command)")
    if command not in COMMANDS:
        raise UsageError(f"unknown command '{command}'")
    allowed = COMMANDS[command]
    file_params = file_cfg.get("params", {}) or {}
    if not isinstance(file_params, dict):
        raise UsageError("'params' must be a JSON object")
    flag_params = {k: ns.pop(k) for k in list(ns) if k in PARAM_TYPES}
    params = dict(allowed)
    for source in (file_params, flag_params):
        for key, value in source.items():
            if key not in allowed:
                raise UsageError(f"parameter '{key}' is not accepted by command '{command}'")
            params[key] = _coerce(key, value)
    validate_params(command, params)
    try:
        seed = int(ns.get("seed", file_cfg.get("seed", 0)))
        workers = ns.get("workers", file_cfg.get("workers"))
        workers = worker_count() if workers is None else int(workers)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"parameter 'seed'/'workers': {exc}") from None
    if seed < 0:
        raise UsageError("parameter 'seed': must be non-negative")
    if workers < 1:
        raise UsageError("parameter 'workers': must be at least 1")
    out = Path(ns.get("output_dir", file_cfg.get("output_dir", ".")))
    return CliConfig(command, params, out, seed, workers, sorted(flag_params))


def _pick(p: dict, mapping: dict) -> dict:
    """Rename CLI parameters to keyword arguments, dropping deferred (None) values."""
    return {kw: p[key] for key, kw in mapping.items() if p.get(key) is not None}


def cli_path(p: dict, seed: int):
    """Noise path shared by gen-fbm and solve so both commands see the same sample."""
    grid = TimeGrid(p["n_steps"])
    kwargs = {"mvn_scale": p.get("mvn_scale", False)}
    if p.get("generator", "exact") == "mvn":
        kwargs = {"past_truncation": p.get("past_truncation", 50.0)}
    return sample_path(p["hurst"], grid, p["dim"], experiment_seed(seed, "path", 0),
                       p.get("generator", "exact"), **kwargs)


def _gen_fbm(cfg: CliConfig) -> int:
    p = cfg.params
    path = cli_path(p, cfg.seed)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    meta = {"seed": cfg.seed, "generator": p["generator"], "mvn_scale": p["mvn_scale"],
            "past_truncation": p["past_truncation"] if p["generator"] == "mvn" else None}
    csv_path, side = write_path_csv(path, cfg.output_dir / f"gen-fbm-{cfg.seed}.csv", meta)
    print(f"gen-fbm: wrote {csv_path} and {side}")
    return EXIT_PASS


def _solve(cfg: CliConfig) -> ExperimentReport:
    t0 = time.perf_counter()
    p = cfg.params
    path = cli_path(p, cfg.seed)
    drift = builtin_drift(p["drift"], p["alpha"], p["dim"])
    kw = _pick(p, {"K": "K", "tol": "tol", "max_iters": "max_iters", "eps": "eps"})
    scfg = SolverConfig.for_problem(p["hurst"], p["alpha"], **kw)
    k = max(path.hurst.integer_part, 1)
    if p["scheme"] == "euler":
        sol = euler_system_solve(path, drift)
        metrics = {"steps": float(path.grid.n_steps)}
        passed = bool(np.all(np.isfinite(sol.x)))
    else:
        try:
            state = picard_solve(path, drift, scfg)
        except MaxItersExceeded as exc:
            state = exc.state
        sol = SolutionPath(path.grid, state.phi + path.top, path.levels[:k])
        last = state.distance_history[-1] if state.distance_history else {"sup": 0.0, "half_holder": 0.0}
        passed = bool(state.meta.get("converged", False))
        metrics = {"iterations": float(state.k), "final_sup_distance": last["sup"],
                   "final_half_holder_distance": last["half_holder"],
                   "geometric_ratio": state.geometric_ratio(),
                   "tau_time": float(path.grid.points[state.meta.get("tau_index", path.grid.n_steps)])}
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    sol.write_csv(cfg.output_dir / f"solve-{cfg.seed}-solution.csv")
    resolved = {"eps": scfg.eps, "K": scfg.K, "tol": scfg.tolerance(drift), "max_iters": scfg.max_iters}
    return ExperimentReport("solve", {"resolved": resolved}, metrics, passed, cfg.seed,
                            time.perf_counter() - t0)


def _run_experiment(cfg: CliConfig) -> ExperimentReport:
    p, seed, w = cfg.params, cfg.seed, cfg.workers
    c = cfg.command
    if c == "check-variance":
        return variance_identity_experiment(p["hurst"], seed=seed, workers=w, **_pick(
            p, {"spacings": "spacings", "n_samples": "n_samples", "dim": "dim", "cells": "cells"}))
    if c == "sew-demo":
        return sewing_demo_experiment(p["n_paths"], p["n_partitions"], p["level"], seed, workers=w)
    if c == "expansion-rate":
        return expansion_rate_experiment(p["hurst"], p["alpha"], seed=seed, workers=w, **_pick(p, {
            "K": "K", "spacings": "spacings", "n_outer": "n_outer", "n_inner": "n_inner", "eps": "eps",
            "s": "s", "n_steps": "grid_n", "drift": "drift", "conditional": "conditional"}))
    if c == "threshold-scan":
        return threshold_scan(seed=seed, workers=w, **_pick(p, {
            "h_list": "h_list", "alpha_list": "alpha_list", "K": "K", "n_paths": "n_paths",
            "n_steps": "grid_n"}))
    if c == "contraction":
        return contraction_rate_experiment(p["hurst"], p["alpha"], seed=seed, workers=w, **_pick(p, {
            "K": "K", "t_small": "T_small", "n_paths": "n_paths", "n_steps": "grid_n", "drift": "drift"}))
    if c == "semigroup":
        return semigroup_identity_experiment(p["hurst"], seed=seed, workers=w, **_pick(p, {
            "s": "s", "t": "t", "n_samples": "n_samples", "n_outer": "n_outer", "alpha": "alpha",
            "n_steps": "grid_n", "dim": "dim"}))
    if c == "heatkernel":
        return heat_kernel_probe(p["hurst"], p["alpha"], seed=seed, **_pick(
            p, {"n_trials": "n_trials", "t_values": "t_values"}))
    if c == "solve":
        return _solve(cfg)
    raise UsageError(f"unknown command '{c}'")


def dispatch(cfg: CliConfig) -> int:
    try:
        if cfg.command == "gen-fbm":
            return _gen_fbm(cfg)
        report = _run_experiment(cfg)
        report.config = {"cli": cfg.echo(), "experiment": report.config}
        pj, pc = write_report(report, cfg.output_dir)
    except UsageError:
        raise
    except (LabError, ValueError, KeyError, OSError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    status = "PASS" if report.passed else "FAIL"
    print(f"{report.name}: {status} ({pj}, {pc})")
    return EXIT_PASS if report.passed else EXIT_FAIL


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        print("regnoise: error: no arguments given", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = parse_config(argv)
        return dispatch(cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"regnoise: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # argparse reports its own usage errors
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_PASS


if __name__ == "__main__":
    sys.exit(main())
