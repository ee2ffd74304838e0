"""Command line entry point: ``slca <subcommand> [--config FILE] [overrides]``.

Flags mirror the JSON config keys. Top-level keys are ``--name value``; nested
spiking and integrator settings are ``--spiking.t_end 50`` and
``--integrator.step 1e-3``. Flags override the config file, and ``SLCA_OUT``
overrides the output directory of both.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from .analog import IntegratorConfig, integrate, write_trajectory_csv
from .core import kkt_residual, objective
from .experiments import ExperimentSpec, build_problem, run_experiment
from .problems import load_problem, save_problem
from .readout import (avg_current, default_t0, fixed_point_residual, rate_exp_kernel,
                      rate_thresholded_current, rate_window, write_readout_csv)
from .solvers import coord_descent, fista
from .spiking import SpikingConfig, derive_bounds, load_spike_log, simulate, write_spike_log

EXPERIMENT_COMMANDS = ("compare", "bench", "fig1", "fig2b")
SOLVE_COMMANDS = ("gen", "solve-analog", "solve-spiking", "solve-fista", "solve-cd", "readout")

_SPIKING_KEYS = {"nu_f": float, "nu_r": float, "tau": float, "bias": float, "t_end": float,
                 "step": float, "reset_rule": str, "max_spikes": int}
_INTEGRATOR_KEYS = {"method": str, "step": float, "t_end": float, "settle_tol": float,
                    "record_every": int}


def _parse_bool(s: str) -> bool:
    if s.lower() in ("1", "true", "yes", "on"):
        return True
    if s.lower() in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {s!r}")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON experiment config; flags override its fields")
    p.add_argument("--output-dir", "--output_dir", dest="output_dir")
    p.add_argument("--source", choices=("paper_3neuron", "random", "files", "patch_operator"))
    p.add_argument("--M", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--density", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--problem-path", "--problem_path", dest="problem_path")
    p.add_argument("--image-size", "--image_size", dest="image_size", type=int)
    p.add_argument("--patch", type=int)
    p.add_argument("--stride", type=int)
    p.add_argument("--n-local", "--n_local", dest="n_local", type=int)
    p.add_argument("--engines", nargs="+", choices=("event_driven", "fixed_step"))
    p.add_argument("--readouts", nargs="+",
                   choices=("window", "thresholded_current", "exp_kernel"))
    p.add_argument("--t0", type=float)
    p.add_argument("--tau-kernel", "--tau_kernel", dest="tau_kernel", type=float)
    p.add_argument("--rel-tol", "--rel_tol", dest="rel_tol", type=float)
    p.add_argument("--assertions", type=_parse_bool)
    for key, typ in _SPIKING_KEYS.items():
        p.add_argument(f"--spiking.{key}", dest=f"spiking.{key}", type=typ)
    p.add_argument("--spiking.v0", dest="spiking.v0", type=float, nargs="+")
    for key, typ in _INTEGRATOR_KEYS.items():
        p.add_argument(f"--integrator.{key}", dest=f"integrator.{key}", type=typ)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slca", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "gen": "generate a problem and write it as CSV + JSON descriptor",
        "solve-analog": "integrate the analog LCA",
        "solve-spiking": "simulate the spiking LCA and write spikes and readouts",
        "solve-fista": "solve with FISTA",
        "solve-cd": "solve with coordinate descent",
        "readout": "recompute readouts from a saved spike log",
        "compare": "all methods on one problem against the oracle",
        "bench": "wall-clock objective traces for fixed-step S-LCA and FISTA",
        "fig1": "three-neuron dynamics data files",
        "fig2b": "objective error vs time for the three readouts",
    }
    for name in SOLVE_COMMANDS + EXPERIMENT_COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        _add_common(p)
        if name == "readout":
            p.add_argument("--log-dir", "--log_dir", dest="log_dir", required=True)
            p.add_argument("--stem", default="spikes")
            p.add_argument("--t", type=float, help="readout time (default: end of run)")
        if name == "solve-spiking":
            p.add_argument("--engine", choices=("event_driven", "fixed_step"),
                           default="event_driven")
    return parser


def spec_from_args(args: argparse.Namespace, command: str) -> ExperimentSpec:
    cfg = {}
    if args.config:
        cfg = json.loads(Path(args.config).read_text())
        if cfg.get("problem_path") and not os.path.isabs(cfg["problem_path"]):
            cfg["problem_path"] = str(Path(args.config).parent / cfg["problem_path"])
    cfg.setdefault("spiking", {})
    cfg.setdefault("integrator", {})
    for key, val in vars(args).items():
        if val is None or key in ("config", "command", "log_dir", "stem", "t", "engine"):
            continue
        if "." in key:
            group, field_name = key.split(".", 1)
            cfg[group][field_name] = tuple(val) if isinstance(val, list) else val
        else:
            cfg[key] = val
    if command in EXPERIMENT_COMMANDS:
        cfg["name"] = command
    if os.environ.get("SLCA_OUT"):
        cfg["output_dir"] = os.environ["SLCA_OUT"]
    return ExperimentSpec.from_dict(cfg)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True))


def _solution_payload(problem, a, **extra):
    d = {"solution": [float(x) for x in a], "objective": objective(problem, a),
         "kkt": kkt_residual(problem, a)}
    d.update(extra)
    return d


def run_command(command: str, args: argparse.Namespace) -> int:
    spec = spec_from_args(args, command)
    if command in EXPERIMENT_COMMANDS:
        summary = run_experiment(spec)
        print(json.dumps({"name": summary["name"], "passed": summary["passed"],
                          "checks": summary["checks"]}, sort_keys=True))
        return 0 if summary["passed"] else 1

    out = spec.out_dir()
    out.mkdir(parents=True, exist_ok=True)
    problem = load_problem(spec.problem_path) if (command == "readout" and spec.problem_path) \
        else build_problem(spec)

    if command == "gen":
        path = save_problem(problem, out)
        print(str(path))
        return 0

    if command == "solve-analog":
        icfg = IntegratorConfig(**spec.integrator)
        traj = integrate(problem, cfg=icfg)
        write_trajectory_csv(out / "analog_trajectory.csv", traj)
        payload = _solution_payload(problem, traj.final.a, steps=traj.steps,
                                    terminated_reason=traj.terminated_reason,
                                    u=[float(x) for x in traj.final.u])
        _write_json(out / "analog_solution.json", payload)
    elif command in ("solve-fista", "solve-cd"):
        t = time.perf_counter()
        rep = fista(problem) if command == "solve-fista" else coord_descent(problem)
        elapsed = time.perf_counter() - t
        stem = rep.method
        _write_json(out / f"{stem}_solution.json", rep.to_dict())
        _write_json(out / f"{stem}_timing.json", {"wall_seconds": elapsed})
        payload = rep.to_dict()
    elif command == "solve-spiking":
        scfg = SpikingConfig.for_problem(problem, **{**spec.spiking, "engine": args.engine})
        log = simulate(problem, scfg)
        bounds = derive_bounds(problem, scfg, log)
        write_spike_log(log, out, stem="spikes", bounds=bounds)
        write_readout_csv(out / "readout.csv", log, spec.t0, None, spec.tau_kernel)
        a = rate_thresholded_current(log, spec.t0 if spec.t0 is not None else default_t0(log),
                                     log.t_end).values
        payload = _solution_payload(problem, a, spike_counts=[int(c) for c in log.spike_counts],
                                    readout="thresholded_current")
        _write_json(out / "spiking_solution.json", payload)
    else:  # readout
        log = load_spike_log(args.log_dir, problem, args.stem)
        t = log.t_end if args.t is None else args.t
        t0 = default_t0(log) if spec.t0 is None else spec.t0
        write_readout_csv(out / "readout.csv", log, t0, t, spec.tau_kernel)
        payload = {
            "t": t, "t0": t0,
            "window": rate_window(log, t0, t).values.tolist(),
            "thresholded_current": rate_thresholded_current(log, t0, t).values.tolist(),
            "exp_kernel": rate_exp_kernel(log, spec.tau_kernel, t).values.tolist(),
            "avg_current": avg_current(log, t0, t).tolist(),
            "fixed_point_residual": fixed_point_residual(log, t0, t),
        }
        payload["objectives"] = {k: objective(problem, np.array(payload[k]))
                                 for k in ("window", "thresholded_current", "exp_kernel")}
        _write_json(out / "readout.json", payload)
    print(json.dumps({k: payload[k] for k in ("objective", "kkt", "objectives") if k in payload}))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return run_command(args.command, args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"slca {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
