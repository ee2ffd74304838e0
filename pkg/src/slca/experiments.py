"""Experiment pipelines: problem -> solvers -> readouts -> oracle comparison -> files.

Every pipeline writes deterministic outputs (``summary.json``, ``solutions.csv``
and traces) plus a separate ``timing.json`` holding anything wall-clock
dependent, so repeated runs can be compared byte for byte.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .analog import AnalogTrajectory, IntegratorConfig, integrate, write_trajectory_csv
from .core import SparseCodingProblem, kkt_residual, objective
from .errors import CoverageMismatch
from .problems import (PAPER_OPTIMUM, gen_patch_problem, gen_random_problem, load_problem,
                       paper_problem)
from .readout import (avg_current, default_t0, rate_exp_kernel, rate_thresholded_current,
                      rate_window, write_readout_csv)
from .solvers import SolverReport, coord_descent, fista
from .spiking import (SpikeLog, SpikingConfig, derive_bounds, run_fixed_step, simulate,
                      write_spike_log)

SOURCES = ("paper_3neuron", "random", "files", "patch_operator")
READOUTS = ("window", "thresholded_current", "exp_kernel")


@dataclass
class ExperimentSpec:
    name: str = "compare"
    source: str = "paper_3neuron"
    # random source
    M: int = 16
    N: int = 64
    density: float = 0.5
    seed: int = 0
    # files source: JSON problem descriptor
    problem_path: Optional[str] = None
    # patch_operator source
    image_size: int = 16
    patch: int = 8
    stride: int = 4
    n_local: int = 16
    engines: List[str] = field(default_factory=lambda: ["event_driven"])
    spiking: dict = field(default_factory=dict)
    integrator: dict = field(default_factory=dict)
    readouts: List[str] = field(default_factory=lambda: list(READOUTS))
    t0: Optional[float] = None
    tau_kernel: Optional[float] = None
    rel_tol: float = 1e-3
    assertions: bool = True
    output_dir: Optional[str] = None

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"source must be one of {SOURCES}")
        bad = set(self.readouts) - set(READOUTS)
        if bad:
            raise ValueError(f"unknown readouts {sorted(bad)}")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown experiment fields {sorted(extra)}")
        return cls(**d)

    def out_dir(self) -> Path:
        base = self.output_dir or os.environ.get("SLCA_OUT") or "slca_out"
        return Path(base)


def build_problem(spec: ExperimentSpec) -> SparseCodingProblem:
    if spec.source == "paper_3neuron":
        return paper_problem()
    if spec.source == "random":
        return gen_random_problem(spec.M, spec.N, spec.density, spec.seed)
    if spec.source == "files":
        if not spec.problem_path:
            raise ValueError("source 'files' needs problem_path")
        return load_problem(spec.problem_path)
    return gen_patch_problem(spec.image_size, spec.n_local, spec.patch, spec.stride, spec.seed)


def spike_count_vs_alca(problem: SparseCodingProblem, log: SpikeLog, traj: AnalogTrajectory,
                        t: float) -> dict:
    """Compare spike counts on [0, t] with the integral of T(u_i) along the analog flow.

    A settled analog trajectory is held at its final state beyond its last sample.
    """
    if log.N != problem.N or traj.final.u.size != problem.N:
        raise CoverageMismatch("spike log, trajectory and problem disagree on N")
    if log.t_end < t:
        raise CoverageMismatch(f"spike log ends at {log.t_end} < {t}")
    times, a = traj.times, traj.a
    if times[-1] < t:
        if traj.terminated_reason != "settled":
            raise CoverageMismatch(f"trajectory ends at {times[-1]} < {t}")
        times = np.append(times, t)
        a = np.vstack([a, a[-1]])
    keep = times <= t
    ts, As = times[keep], a[keep]
    if ts[-1] < t:
        # interpolate the sample straddling t
        k = int(np.searchsorted(times, t))
        w = (t - times[k - 1]) / (times[k] - times[k - 1])
        ts = np.append(ts, t)
        As = np.vstack([As, (1 - w) * a[k - 1] + w * a[k]])
    integral = np.trapezoid(As, ts, axis=0)
    counts = log.counts_in(0.0, t) + np.array([np.sum(s == 0.0) for s in log.spike_times])
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(integral > 0, np.abs(counts - integral) / integral,
                       np.where(counts == 0, 0.0, np.inf))
    total = float(integral.sum())
    agg = float(np.abs(counts - integral).sum() / total) if total > 0 else \
        (0.0 if counts.sum() == 0 else np.inf)
    return {"t": t, "count": counts, "integral": integral, "rel_error": rel,
            "aggregate_rel_error": agg}


def readout_values(log: SpikeLog, method: str, t: float, t0: Optional[float] = None,
                   tau_kernel: Optional[float] = None) -> np.ndarray:
    if t0 is None:
        t0 = default_t0(log)
    if method == "window":
        return rate_window(log, t0, t).values
    if method == "thresholded_current":
        return rate_thresholded_current(log, t0, t).values
    return rate_exp_kernel(log, tau_kernel, t).values


def readout_error_curve(problem, log, method, times, E_star, t0=None, tau_kernel=None):
    """(t, E(a(t)) - E*) for a readout evaluated post hoc at each time."""
    out = []
    for t in times:
        tt0 = 0.0 if t0 is None else min(t0, 0.5 * t)
        if t0 is None:
            tt0 = t / 10.0
        a = readout_values(log, method, t, tt0, tau_kernel)
        out.append((float(t), objective(problem, a) - E_star))
    return out


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, float) and not np.isfinite(o):
        return None
    raise TypeError(type(o))


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, default=_json_default, allow_nan=False,
                               sort_keys=True))


def _clean(x):
    """Replace non-finite floats with None recursively so the JSON stays strict."""
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (float, np.floating)):
        return float(x) if np.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    return x


def _write_solutions(path: Path, columns: Dict[str, np.ndarray]) -> None:
    names = list(columns)
    N = len(next(iter(columns.values()))) if columns else 0
    with open(path, "w") as fh:
        fh.write("neuron_id," + ",".join(names) + "\n")
        for i in range(N):
            fh.write(f"{i}," + ",".join(f"{columns[n][i]:.17g}" for n in names) + "\n")


def _spiking_cfg(problem, spec: ExperimentSpec, engine: str, **over) -> SpikingConfig:
    kw = dict(spec.spiking)
    kw.update(over)
    kw["engine"] = engine
    return SpikingConfig.for_problem(problem, **kw)


# ---------------------------------------------------------------- pipelines

def run_compare(spec: ExperimentSpec) -> dict:
    """Solve one problem with every method and check agreement with the oracle."""
    out = spec.out_dir()
    out.mkdir(parents=True, exist_ok=True)
    problem = build_problem(spec)
    timing = {}

    t = time.perf_counter()
    cd = coord_descent(problem)
    timing["coord_descent"] = time.perf_counter() - t
    E_star = cd.objective
    t = time.perf_counter()
    fi = fista(problem)
    timing["fista"] = time.perf_counter() - t

    icfg = IntegratorConfig(**{"t_end": 1000.0, **spec.integrator})
    t = time.perf_counter()
    traj = integrate(problem, cfg=icfg)
    timing["analog"] = time.perf_counter() - t
    write_trajectory_csv(out / "analog_trajectory.csv", traj)

    columns = {"coord_descent": cd.solution, "fista": fi.solution, "analog": traj.final.a}
    methods = {
        "coord_descent": _method_entry(problem, cd.solution, E_star, iterations=cd.iterations),
        "fista": _method_entry(problem, fi.solution, E_star, iterations=fi.iterations),
        "analog": _method_entry(problem, traj.final.a, E_star, steps=traj.steps,
                                terminated_reason=traj.terminated_reason),
    }
    objective_vs_time = {
        "analog": [[s.t, s.energy] for s in traj.samples],
        "fista": [[k, e] for k, e in fi.objective_trace],
        "coord_descent": [[k, e] for k, e in cd.objective_trace],
    }
    spike_totals, bounds_report = {}, {}
    checks = {
        "fista_matches_oracle": abs(fi.objective - E_star) <= 1e-8 * max(1.0, abs(E_star)),
        "analog_matches_oracle": abs(traj.final.energy - E_star) <= spec.rel_tol * abs(E_star),
    }
    for engine in spec.engines:
        cfg = _spiking_cfg(problem, spec, engine)
        t = time.perf_counter()
        log = simulate(problem, cfg)
        timing[engine] = time.perf_counter() - t
        bounds = derive_bounds(problem, cfg, log)
        write_spike_log(log, out, stem=f"spikes_{engine}", bounds=bounds)
        write_readout_csv(out / f"readout_{engine}.csv", log, spec.t0, None, spec.tau_kernel)
        spike_totals[engine] = int(log.spike_counts.sum())
        bounds_report[engine] = bounds.to_dict()
        times = np.linspace(log.t_end / 20, log.t_end, 20)
        for r in spec.readouts:
            a = readout_values(log, r, log.t_end, spec.t0, spec.tau_kernel)
            key = f"{engine}/{r}"
            columns[key] = a
            methods[key] = _method_entry(problem, a, E_star)
            objective_vs_time[key] = [[tt, e + E_star] for tt, e in
                                      readout_error_curve(problem, log, r, times, E_star,
                                                          spec.t0, spec.tau_kernel)]
        if "thresholded_current" in spec.readouts:
            rel = methods[f"{engine}/thresholded_current"]["rel_error"]
            checks[f"{engine}_matches_oracle"] = rel <= spec.rel_tol
        if engine == "event_driven":
            checks["bounds_hold"] = bounds.mu_violations == 0 and bounds.isi_violations == 0

    _write_solutions(out / "solutions.csv", columns)
    summary = {
        "name": spec.name,
        "problem": _problem_info(problem),
        "oracle_objective": E_star,
        "methods": methods,
        "objective_vs_time": objective_vs_time,
        "kkt": {k: v["kkt"] for k, v in methods.items()},
        "spike_totals": spike_totals,
        "bounds": bounds_report,
        "checks": checks if spec.assertions else {},
        "passed": bool(all(checks.values())) if spec.assertions else True,
    }
    _dump(out / "summary.json", _clean(summary))
    _dump(out / "timing.json", timing)
    return summary


def _method_entry(problem, a, E_star, **extra):
    E = objective(problem, a)
    d = {"objective": E, "rel_error": abs(E - E_star) / max(abs(E_star), 1e-300),
         "kkt": kkt_residual(problem, a), "nnz": int(np.sum(a > 0))}
    d.update(extra)
    return d


def _problem_info(problem):
    return {"M": int(problem.dictionary.M), "N": int(problem.N), "lambda1": problem.lambda1,
            "lambda2": problem.lambda2, "mode": problem.mode}


def run_fig1(spec: ExperimentSpec) -> dict:
    """3-neuron dynamics: potentials, currents, raster and spike count vs integral of T(u)."""
    out = spec.out_dir()
    out.mkdir(parents=True, exist_ok=True)
    problem = build_problem(spec)
    t_end = float(spec.spiking.get("t_end", 20.0))
    cfg = _spiking_cfg(problem, spec, "event_driven", t_end=t_end)
    log = simulate(problem, cfg)
    icfg = IntegratorConfig(**{"t_end": t_end, "record_every": 10, "settle_tol": 1e-300,
                               **spec.integrator})
    traj = integrate(problem, cfg=icfg)
    N = problem.N

    hdr = ",".join(f"v_{i + 1}" for i in range(N))
    np.savetxt(out / "fig1_potentials.csv", np.column_stack([log.trace_t, log.trace_v]),
               delimiter=",", header="t," + hdr, comments="", fmt="%.17g")
    hdr = ",".join(f"mu_{i + 1}" for i in range(N))
    np.savetxt(out / "fig1_currents.csv", np.column_stack([log.trace_t, log.trace_mu]),
               delimiter=",", header="t," + hdr, comments="", fmt="%.17g")
    with open(out / "fig1_raster.csv", "w") as fh:
        fh.write("neuron_id,time\n")
        for n, tt in zip(log.events_neuron, log.events_time):
            fh.write(f"{int(n)},{tt:.17g}\n")

    # cumulative counts vs running integral of T(u) on the analog sample grid
    ts, A = traj.times, traj.a
    cum_int = np.vstack([np.zeros(N), np.cumsum(0.5 * (A[1:] + A[:-1]) * np.diff(ts)[:, None],
                                                axis=0)])
    cum_cnt = np.column_stack([np.searchsorted(s, ts, side="right") for s in log.spike_times])
    hdr = ",".join([f"count_{i + 1}" for i in range(N)] + [f"int_T_u_{i + 1}" for i in range(N)])
    np.savetxt(out / "fig1_counts_vs_alca.csv", np.column_stack([ts, cum_cnt, cum_int]),
               delimiter=",", header="t," + hdr, comments="", fmt="%.17g")

    cmp = spike_count_vs_alca(problem, log, traj, t_end)
    checks = {"spike_count_approximation": cmp["aggregate_rel_error"] <= 0.10}
    summary = {
        "name": "fig1",
        "problem": _problem_info(problem),
        "spike_counts": log.spike_counts,
        "last_spike": [float(s[-1]) if s.size else None for s in log.spike_times],
        "spike_count_vs_alca": {k: v for k, v in cmp.items()},
        "checks": checks if spec.assertions else {},
        "passed": bool(all(checks.values())) if spec.assertions else True,
    }
    _dump(out / "summary.json", _clean(summary))
    return summary


def run_fig2b(spec: ExperimentSpec) -> dict:
    """Objective error vs time for the three readouts of one event-driven run."""
    out = spec.out_dir()
    out.mkdir(parents=True, exist_ok=True)
    problem = build_problem(spec)
    E_star = coord_descent(problem).objective
    t_end = float(spec.spiking.get("t_end", 100.0))
    cfg = _spiking_cfg(problem, spec, "event_driven", t_end=t_end)
    log = simulate(problem, cfg)
    times = np.linspace(t_end / 50, t_end, 50)
    t0 = spec.t0
    curves = {}
    for r in READOUTS:
        curves[r] = readout_error_curve(problem, log, r, times, E_star,
                                        t0 if r != "exp_kernel" else None, spec.tau_kernel)
    with open(out / "fig2b_readout_errors.csv", "w") as fh:
        fh.write("t," + ",".join(READOUTS) + "\n")
        for k, t in enumerate(times):
            fh.write(f"{t:.17g}," + ",".join(f"{curves[r][k][1]:.17g}" for r in READOUTS) + "\n")
    final = {r: curves[r][-1][1] for r in READOUTS}
    checks = {
        "thresholded_not_worse_than_window": final["thresholded_current"] <= final["window"],
        "exp_kernel_finite": bool(np.isfinite(final["exp_kernel"])),
    }
    summary = {"name": "fig2b", "problem": _problem_info(problem), "oracle_objective": E_star,
               "final_error": final, "checks": checks if spec.assertions else {},
               "passed": bool(all(checks.values())) if spec.assertions else True}
    _dump(out / "summary.json", _clean(summary))
    return summary


def run_bench(spec: ExperimentSpec) -> dict:
    """Wall-clock objective traces for fixed-step S-LCA (h = 0.01) and FISTA.

    Timings are reported, never asserted.
    """
    out = spec.out_dir()
    out.mkdir(parents=True, exist_ok=True)
    problem = build_problem(spec)
    E_star = coord_descent(problem).objective
    kw = {"t_end": 50.0, "step": 0.01, **spec.spiking}
    cfg = SpikingConfig.for_problem(problem, **{**kw, "engine": "fixed_step"})
    run_fixed_step(problem, SpikingConfig.for_problem(problem, **{**kw, "engine": "fixed_step",
                                                                    "t_end": 1.0}))  # JIT warm-up
    n_ck = 50
    log = run_fixed_step(problem, cfg, checkpoint_every=cfg.t_end / n_ck)
    slca_rows = []
    for t_sim, wall in log.wall_clock:
        t0 = t_sim / 10.0
        a = rate_thresholded_current(log, t0, t_sim).values
        slca_rows.append((wall, t_sim, objective(problem, a) - E_star))
    fi = fista(problem, timed=True, max_iter=int(spec.integrator.get("fista_max_iter", 20000)))
    fista_rows = [(w, k, e - E_star) for k, (w, e) in enumerate(fi.time_trace)]
    with open(out / "bench_objective_vs_time.csv", "w") as fh:
        fh.write("method,wall_seconds,progress,objective_error\n")
        for w, t_sim, e in slca_rows:
            fh.write(f"slca_fixed_step,{w:.6g},{t_sim:.17g},{e:.17g}\n")
        for w, k, e in fista_rows:
            fh.write(f"fista,{w:.6g},{k},{e:.17g}\n")
    summary = {"name": "bench", "problem": _problem_info(problem), "oracle_objective": E_star,
               "slca_final_error": slca_rows[-1][2] if slca_rows else None,
               "fista_final_error": fista_rows[-1][2] if fista_rows else None,
               "spike_total": int(log.spike_counts.sum()), "checks": {}, "passed": True}
    _dump(out / "summary.json", _clean(summary))
    _dump(out / "timing.json", {"slca_wall": slca_rows[-1][0] if slca_rows else None,
                                "fista_wall": fista_rows[-1][0] if fista_rows else None})
    return summary


PIPELINES = {"fig1": run_fig1, "fig2b": run_fig2b, "bench": run_bench}


def run_experiment(spec: ExperimentSpec) -> dict:
    """Dispatch on ``spec.name``; anything not a named figure runs the comparison."""
    fn = PIPELINES.get(spec.name, run_compare)
    try:
        return fn(spec)
    except Exception as exc:
        raise RuntimeError(f"experiment {spec.name!r} ({spec.source}) failed: {exc}") from exc


def spec_as_dict(spec: ExperimentSpec) -> dict:
    return asdict(spec)
