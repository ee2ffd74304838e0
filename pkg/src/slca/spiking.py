"""Spiking LCA simulation.

Each neuron i carries a soma current mu_i, relaxing toward b_i with time
constant tau, and a potential v_i = integral of (mu_i - bias). When v_i reaches
nu_f the neuron spikes, v_i resets, and every other neuron j has its current
knocked down by w_ji (the kernel H(t) exp(-t/tau) at lag 0); the receiver's own
relaxation then produces the exponential tail.

Between spikes everything is closed form:

    mu(t0 + d) = b + (mu0 - b) exp(-d/tau)
    v(t0 + d)  = v0 + (b - bias) d + tau (mu0 - b) (1 - exp(-d/tau))

Two engines share these formulas: ``run_event_driven`` jumps from spike to
spike using exact crossing times, ``run_fixed_step`` advances on a grid of
width h and lets spikes land on step boundaries.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional

import numba
import numpy as np

from .core import GramMatrix, SparseCodingProblem
from .errors import ExplodingRate

MAX_SPIKES = 10_000_000
TRACE_POINTS = 10_000


@dataclass(frozen=True)
class SpikingConfig:
    nu_f: float = 1.0
    nu_r: float = 0.0
    tau: float = 1.0
    bias: Optional[float] = None  # None: use the problem's lambda1
    t_end: float = 100.0
    engine: str = "event_driven"
    step: float = 1e-3
    v0: Optional[tuple] = None
    reset_rule: str = "hard_reset"
    max_spikes: int = MAX_SPIKES

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.nu_f <= 0:
            raise ValueError("nu_f must be positive")
        if self.t_end <= 0:
            raise ValueError("t_end must be positive")
        if self.engine not in ("event_driven", "fixed_step"):
            raise ValueError(f"unknown engine {self.engine!r}")
        if self.engine == "fixed_step" and not self.step > 0:
            raise ValueError("fixed_step engine needs step > 0")
        if self.reset_rule not in ("hard_reset", "carry_residual"):
            raise ValueError(f"unknown reset rule {self.reset_rule!r}")
        if self.bias is not None and self.bias < 0:
            raise ValueError("bias must be nonnegative")
        if self.v0 is not None:
            v0 = tuple(float(x) for x in self.v0)
            if any(x >= self.nu_f for x in v0):
                raise ValueError("initial potentials must be below nu_f")
            object.__setattr__(self, "v0", v0)

    @classmethod
    def for_problem(cls, problem: SparseCodingProblem, **kwargs) -> "SpikingConfig":
        """Bias = lambda1 and nu_f = 2*lambda2 + 1 (elastic net), unless overridden."""
        kwargs.setdefault("bias", problem.lambda1)
        kwargs.setdefault("nu_f", 2.0 * problem.lambda2 + 1.0)
        return cls(**kwargs)

    def resolved_bias(self, problem: SparseCodingProblem) -> float:
        return problem.lambda1 if self.bias is None else float(self.bias)

    def initial_potentials(self, N: int) -> np.ndarray:
        if self.v0 is None:
            return np.zeros(N)
        v0 = np.array(self.v0, dtype=float)
        if v0.shape != (N,):
            raise ValueError(f"v0 has {v0.size} entries, network has {N} neurons")
        return v0

    def trace_interval(self) -> float:
        h = self.step if self.engine == "fixed_step" else 0.0
        return max(h, self.t_end / TRACE_POINTS)


@dataclass
class SpikeLog:
    """Spike trains plus sampled state of one run.

    ``weights`` is the (immutable) Gram structure the run used, so readouts
    can integrate the soma currents in closed form from the spike trains.
    """

    spike_times: List[np.ndarray]
    events_neuron: np.ndarray
    events_time: np.ndarray
    trace_t: np.ndarray
    trace_mu: np.ndarray
    trace_v: np.ndarray
    b: np.ndarray
    weights: GramMatrix
    bias: float
    nu_f: float
    nu_r: float
    tau: float
    t_end: float
    engine: str
    step: float
    v0: np.ndarray
    final_mu: np.ndarray
    final_v: np.ndarray
    mu_min: np.ndarray
    mu_max: np.ndarray
    terminated_reason: str = "t_end"
    # (simulated time, wall seconds) checkpoints; fixed-step runs only
    wall_clock: list = field(default_factory=list)

    @property
    def N(self) -> int:
        return len(self.spike_times)

    @property
    def spike_counts(self) -> np.ndarray:
        return np.array([len(t) for t in self.spike_times], dtype=int)

    def counts_in(self, t0: float, t: float) -> np.ndarray:
        """Spikes in the half-open window (t0, t]."""
        return np.array([np.searchsorted(s, t, side="right") - np.searchsorted(s, t0, side="right")
                         for s in self.spike_times], dtype=int)


# ------------------------------------------------------------ crossing time

def _potential_gap(d, mu0, v0, b, bias, nu, tau):
    """f(d) = v(d) - nu, plus its derivative mu(d) - bias."""
    e = np.exp(-d / tau)
    f = v0 + (b - bias) * d - tau * (mu0 - b) * np.expm1(-d / tau) - nu
    return f, b + (mu0 - b) * e - bias


def crossing_times(mu0, v0, b, bias, nu, tau, ftol: float = 1e-12, max_iter: int = 100):
    """Vectorised first time d > 0 at which v reaches nu; inf if never.

    Each root is bracketed in [lo, hi] with f(lo) < 0 <= f(hi) and refined by
    Newton steps started from the side where Newton is monotone (hi for the
    convex case mu0 < b, lo otherwise); steps leaving the bracket fall back to
    bisection.
    """
    mu0, v0, b = (np.atleast_1d(np.asarray(x, dtype=float)) for x in (mu0, v0, b))
    mu0, v0, b = np.broadcast_arrays(mu0, v0, b)
    n = mu0.size
    out = np.full(n, np.inf)
    c = b - bias             # asymptotic slope of v
    d = mu0 - b              # current excess over the input
    gap = nu - v0

    already = gap <= 0
    out[already] = 0.0

    lo = np.zeros(n)
    hi = np.full(n, np.nan)
    live = ~already

    # eventually increasing without bound
    grow = live & (c > 0)
    hi[grow] = (gap[grow] - tau * np.minimum(d[grow], 0.0)) / c[grow]

    # flat asymptote: sup v = v0 + tau*d, root in closed form when reachable
    flat = live & (c == 0) & (d > 0)
    reach = flat & (tau * d > gap)
    out[reach] = -tau * np.log1p(-gap[reach] / (tau * d[reach]))

    # decaying: v peaks where mu = bias, at d* = tau*log((mu0 - b)/(bias - b))
    decay = live & (c < 0) & (mu0 > bias)
    if np.any(decay):
        idx = np.flatnonzero(decay)
        dstar = tau * np.log(d[idx] / (-c[idx]))
        fpeak, _ = _potential_gap(dstar, mu0[idx], v0[idx], b[idx], bias, nu, tau)
        ok = fpeak >= 0
        hi[idx[ok]] = dstar[ok]

    todo = np.flatnonzero(~np.isnan(hi))
    if todo.size == 0:
        return out
    m0, vv, bb = mu0[todo], v0[todo], b[todo]
    L, H = lo[todo], hi[todo]
    # ensure the bracket really straddles the root (guards rounding)
    fH, _ = _potential_gap(H, m0, vv, bb, bias, nu, tau)
    for _ in range(60):
        short = fH < 0
        if not np.any(short):
            break
        H = np.where(short, 2.0 * H + 1e-12, H)
        fH, _ = _potential_gap(H, m0, vv, bb, bias, nu, tau)
    x = np.where(m0 < bb, H, L)
    for _ in range(max_iter):
        f, fp = _potential_gap(x, m0, vv, bb, bias, nu, tau)
        done = np.abs(f) <= ftol
        if np.all(done):
            break
        L = np.where(f < 0, x, L)
        H = np.where(f >= 0, x, H)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = x - f / fp
        inside = (newton > L) & (newton < H) & np.isfinite(newton)
        nxt = np.where(inside, newton, 0.5 * (L + H))
        x = np.where(done, x, nxt)
        if np.all(done | (H - L <= 1e-15 * np.maximum(H, 1.0))):
            break
    out[todo] = x
    return out


def next_crossing_time(mu0: float, v0: float, b: float, bias: float, nu_f: float,
                       tau: float = 1.0) -> Optional[float]:
    """Smallest d > 0 with v0 + (b-bias) d + tau (mu0-b)(1-e^{-d/tau}) = nu_f, or None."""
    d = float(crossing_times(mu0, v0, b, bias, nu_f, tau)[0])
    return None if np.isinf(d) else d


# ------------------------------------------------------------ event driven

def run_event_driven(problem: SparseCodingProblem, cfg: SpikingConfig) -> SpikeLog:
    """Exact simulation: jump from spike to spike in firing order.

    Provisional next-spike times live in an array; the earliest is processed
    next (argmin, so simultaneous spikes go in ascending neuron index). Only the
    firing neuron and its receivers are brought up to date and re-solved.
    """
    if cfg.engine != "event_driven":
        cfg = replace(cfg, engine="event_driven")
    b = np.array(problem.b, dtype=float)
    N = b.size
    lam = cfg.resolved_bias(problem)
    nu, tau = cfg.nu_f, cfg.tau
    gram = problem.gram
    hard = cfg.reset_rule == "hard_reset"

    mu = b.copy()
    v = cfg.initial_potentials(N)
    v0 = v.copy()
    ts = np.zeros(N)
    mu_min = mu.copy()
    mu_max = mu.copy()
    next_t = crossing_times(mu, v, b, lam, nu, tau)

    spikes = [[] for _ in range(N)]
    counts = np.zeros(N, dtype=np.int64)
    ev_n, ev_t = [], []

    dt_tr = cfg.trace_interval()
    grid = np.arange(0, int(np.floor(cfg.t_end / dt_tr + 1e-9)) + 1) * dt_tr
    tr_mu = np.empty((grid.size, N))
    tr_v = np.empty((grid.size, N))
    g = 0

    def emit_until(t_limit, inclusive):
        nonlocal g
        stop = np.searchsorted(grid, t_limit, side="right" if inclusive else "left")
        if stop <= g:
            return
        tt = grid[g:stop, None]
        dt = tt - ts[None, :]
        tr_mu[g:stop] = b + (mu - b) * np.exp(-dt / tau)
        tr_v[g:stop] = v + (b - lam) * dt - tau * (mu - b) * np.expm1(-dt / tau)
        g = stop

    def sync(idx, t):
        dt = t - ts[idx]
        v[idx] += (b[idx] - lam) * dt - tau * (mu[idx] - b[idx]) * np.expm1(-dt / tau)
        mu[idx] = b[idx] + (mu[idx] - b[idx]) * np.exp(-dt / tau)
        ts[idx] = t

    while True:
        i = int(np.argmin(next_t))
        te = next_t[i]
        if not te <= cfg.t_end:
            break
        emit_until(te, inclusive=False)
        col = gram.column(i)
        recv = np.flatnonzero(col)
        recv = recv[recv != i]
        sync(recv, te)
        sync(np.array([i]), te)

        spikes[i].append(te)
        ev_n.append(i)
        ev_t.append(te)
        counts[i] += 1
        if counts[i] > cfg.max_spikes:
            raise ExplodingRate(f"neuron {i} exceeded {cfg.max_spikes} spikes by t={te:.6g}")
        v[i] = cfg.nu_r if hard else v[i] - nu + cfg.nu_r

        if recv.size:
            mu[recv] -= col[recv]
            np.minimum.at(mu_min, recv, mu[recv])
            # neurons already due at te keep their slot and fire next
            stale = recv[next_t[recv] > te]
        else:
            stale = recv
        upd = np.append(stale, i)
        next_t[upd] = ts[upd] + crossing_times(mu[upd], v[upd], b[upd], lam, nu, tau)

    emit_until(cfg.t_end, inclusive=True)
    sync(np.arange(N), cfg.t_end)

    return SpikeLog(
        spike_times=[np.array(s) for s in spikes],
        events_neuron=np.array(ev_n, dtype=int), events_time=np.array(ev_t, dtype=float),
        trace_t=grid, trace_mu=tr_mu, trace_v=tr_v, b=b, weights=gram, bias=lam,
        nu_f=nu, nu_r=cfg.nu_r, tau=tau, t_end=cfg.t_end, engine="event_driven",
        step=0.0, v0=v0, final_mu=mu.copy(), final_v=v.copy(),
        mu_min=mu_min, mu_max=mu_max)


# ------------------------------------------------------------ fixed step

@numba.njit(cache=True)
def _fixed_step_kernel(mu, v, b, lam, nu_f, nu_r, tau, h, k0, n_steps, W, dense, hard,
                       stride, tr_mu, tr_v, tr_pos, sp_step, sp_neuron, mu_min):
    """Advance from step k0. Returns (k, n_spikes, tr_pos, status):
    status 0 finished, 1 spike buffer full, 2 spikes need inhibition from caller."""
    N = mu.size
    e = np.exp(-h / tau)
    ome = -np.expm1(-h / tau)
    cap = sp_step.size
    ns = 0
    fired = np.empty(N, dtype=np.int64)
    for k in range(k0, n_steps):
        if ns + N > cap:
            return k, ns, tr_pos, 1
        for i in range(N):
            dm = mu[i] - b[i]
            v[i] += (b[i] - lam) * h + tau * dm * ome
            mu[i] = b[i] + dm * e
        nf = 0
        for i in range(N):
            if v[i] >= nu_f:
                sp_step[ns] = k + 1
                sp_neuron[ns] = i
                ns += 1
                fired[nf] = i
                nf += 1
                if hard:
                    v[i] = nu_r
                else:
                    v[i] = v[i] - nu_f + nu_r
        if nf > 0 and not dense:
            return k + 1, ns, tr_pos, 2
        for f in range(nf):
            j = fired[f]
            for i in range(N):
                w = W[i, j]
                if w != 0.0:
                    mu[i] -= w
                    if mu[i] < mu_min[i]:
                        mu_min[i] = mu[i]
        if (k + 1) % stride == 0 and tr_pos < tr_mu.shape[0]:
            for i in range(N):
                tr_mu[tr_pos, i] = mu[i]
                tr_v[tr_pos, i] = v[i]
            tr_pos += 1
    return n_steps, ns, tr_pos, 0


def run_fixed_step(problem: SparseCodingProblem, cfg: SpikingConfig,
                   checkpoint_every: Optional[float] = None) -> SpikeLog:
    """Constant-step simulation; spikes are stamped with the step-end time and
    their inhibition takes effect from the next step on.

    ``checkpoint_every`` (simulated time) records wall-clock progress in
    ``log.wall_clock`` for benchmarking.
    """
    if cfg.engine != "fixed_step":
        cfg = replace(cfg, engine="fixed_step")
    b = np.ascontiguousarray(problem.b, dtype=float)
    N = b.size
    lam = cfg.resolved_bias(problem)
    h = cfg.step
    n_steps = int(round(cfg.t_end / h))
    gram = problem.gram
    dense = gram.is_dense
    W = np.asfortranarray(gram.offdiag_dense()) if dense else np.zeros((1, 1))

    mu = b.copy()
    v = cfg.initial_potentials(N)
    v0 = v.copy()
    mu_min = mu.copy()
    stride = max(1, int(round(cfg.trace_interval() / h)))
    n_tr = n_steps // stride + 1
    tr_mu = np.empty((n_tr, N))
    tr_v = np.empty((n_tr, N))
    tr_mu[0], tr_v[0] = mu, v
    tr_pos = 1

    cap = max(4 * N, 1 << 16)
    sp_step = np.empty(cap, dtype=np.int64)
    sp_neuron = np.empty(cap, dtype=np.int64)
    all_steps, all_neurons = [], []
    counts = np.zeros(N, dtype=np.int64)
    ck = n_steps if checkpoint_every is None else max(1, int(round(checkpoint_every / h)))
    wall = []
    t_start = time.perf_counter()
    k = 0
    while k < n_steps:
        limit = min(n_steps, (k // ck + 1) * ck)
        k, ns, tr_pos, status = _fixed_step_kernel(
            mu, v, b, lam, cfg.nu_f, cfg.nu_r, cfg.tau, h, k, limit, W, dense,
            cfg.reset_rule == "hard_reset", stride, tr_mu, tr_v, tr_pos,
            sp_step, sp_neuron, mu_min)
        if ns:
            all_steps.append(sp_step[:ns].copy())
            all_neurons.append(sp_neuron[:ns].copy())
            counts += np.bincount(sp_neuron[:ns], minlength=N)
            if counts.max() > cfg.max_spikes:
                raise ExplodingRate(f"neuron {int(counts.argmax())} exceeded {cfg.max_spikes} spikes")
        if status == 2:
            for j in sp_neuron[:ns][sp_step[:ns] == k]:
                col = gram.offdiag_column(int(j))
                mu -= col
                np.minimum(mu_min, mu, out=mu_min)
            if k % stride == 0 and tr_pos < n_tr:
                tr_mu[tr_pos], tr_v[tr_pos] = mu, v
                tr_pos += 1
        if checkpoint_every is not None and status == 0:
            wall.append((k * h, time.perf_counter() - t_start))

    steps = np.concatenate(all_steps) if all_steps else np.zeros(0, dtype=np.int64)
    neurons = np.concatenate(all_neurons) if all_neurons else np.zeros(0, dtype=np.int64)
    times = steps * h
    spike_times = [times[neurons == i] for i in range(N)]
    return SpikeLog(
        spike_times=spike_times, events_neuron=neurons.astype(int), events_time=times,
        trace_t=np.arange(tr_pos) * stride * h, trace_mu=tr_mu[:tr_pos], trace_v=tr_v[:tr_pos],
        b=b.copy(), weights=gram, bias=lam, nu_f=cfg.nu_f, nu_r=cfg.nu_r, tau=cfg.tau,
        t_end=n_steps * h, engine="fixed_step", step=h, v0=v0, final_mu=mu.copy(),
        final_v=v.copy(), mu_min=mu_min, mu_max=b.copy(), wall_clock=wall)


def simulate(problem: SparseCodingProblem, cfg: SpikingConfig) -> SpikeLog:
    if cfg.engine == "event_driven":
        return run_event_driven(problem, cfg)
    return run_fixed_step(problem, cfg)


# ------------------------------------------------------------ bounds

@dataclass
class DerivedBounds:
    b_plus: float
    b_minus: float
    min_isi: float
    gamma: float
    observed_min_isi: float = np.inf
    max_observed_isi: np.ndarray = field(default_factory=lambda: np.zeros(0))
    late_max_isi: float = np.nan
    observed_mu_min: float = np.nan
    observed_mu_max: float = np.nan
    mu_violations: int = 0
    isi_violations: int = 0

    def to_dict(self) -> dict:
        def num(x):
            x = float(x)
            return None if not np.isfinite(x) else x
        return {
            "b_plus": num(self.b_plus), "b_minus": num(self.b_minus),
            "min_isi": num(self.min_isi), "gamma": num(self.gamma),
            "observed_min_isi": num(self.observed_min_isi),
            "max_observed_isi": [num(x) for x in self.max_observed_isi],
            "late_max_isi": num(self.late_max_isi),
            "observed_mu_min": num(self.observed_mu_min),
            "observed_mu_max": num(self.observed_mu_max),
            "mu_violations": int(self.mu_violations),
            "isi_violations": int(self.isi_violations),
        }


def derive_bounds(problem: SparseCodingProblem, cfg: SpikingConfig, log: SpikeLog,
                  eps: float = 1e-9) -> DerivedBounds:
    """Current and inter-spike-interval bounds for an inhibitory network, plus
    what the run actually did.

    B+ = max_i b_i;  1/R = min(min_i(nu - v_i(0)), nu) / (B+ - bias);
    gamma = sum_l exp(-l / (R tau));  B- = min_i(min(b_i, 0) - gamma sum_{j!=i} w_ij).
    ISIs include the first spike measured from t = 0.
    """
    b = np.asarray(log.b)
    lam, nu, tau = log.bias, log.nu_f, log.tau
    b_plus = float(b.max())
    if b_plus > lam:
        min_isi = min(float(np.min(nu - log.v0)), nu) / (b_plus - lam)
        gamma = 1.0 / (-np.expm1(-min_isi / tau))
    else:
        min_isi, gamma = np.inf, 1.0
    row_sums = log.weights.offdiag_matvec(np.ones(log.N))
    b_minus = float(np.min(np.minimum(b, 0.0) - gamma * row_sums))

    isi_min = np.inf
    isi_max = np.zeros(log.N)
    late = []
    isi_viol = 0
    late_start = 0.9 * log.t_end
    for i, s in enumerate(log.spike_times):
        if s.size == 0:
            continue
        isis = np.diff(np.concatenate([[0.0], s]))
        isi_min = min(isi_min, float(isis.min()))
        isi_max[i] = float(isis.max())
        isi_viol += int(np.sum(isis < min_isi - eps))
        tail = s[s >= late_start]
        if tail.size >= 2:
            late.append(float(np.diff(tail).max()))

    lo = min(float(log.mu_min.min()), float(log.trace_mu.min()))
    hi = max(float(log.mu_max.max()), float(log.trace_mu.max()))
    mu_viol = int(np.sum(log.trace_mu < b_minus - eps) + np.sum(log.trace_mu > b_plus + eps)
                  + np.sum(log.mu_min < b_minus - eps) + np.sum(log.mu_max > b_plus + eps))
    return DerivedBounds(b_plus=b_plus, b_minus=b_minus, min_isi=min_isi, gamma=gamma,
                         observed_min_isi=isi_min, max_observed_isi=isi_max,
                         late_max_isi=max(late) if late else np.nan,
                         observed_mu_min=lo, observed_mu_max=hi,
                         mu_violations=mu_viol, isi_violations=isi_viol)


# ------------------------------------------------------------ export

def write_spike_log(log: SpikeLog, directory, stem: str = "spikes",
                    bounds: Optional[DerivedBounds] = None) -> dict:
    """Write <stem>_events.csv, <stem>_currents.csv and <stem>_summary.json."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    ev = np.column_stack([log.events_neuron, log.events_time]) if log.events_time.size \
        else np.zeros((0, 2))
    with open(directory / f"{stem}_events.csv", "w") as fh:
        fh.write("neuron_id,time\n")
        for n, t in ev:
            fh.write(f"{int(n)},{t:.17g}\n")
    header = "t," + ",".join(f"mu_{i + 1}" for i in range(log.N))
    np.savetxt(directory / f"{stem}_currents.csv", np.column_stack([log.trace_t, log.trace_mu]),
               delimiter=",", header=header, comments="", fmt="%.17g")
    summary = {
        "engine": log.engine,
        "t_end": log.t_end,
        "step": log.step,
        "bias": log.bias,
        "nu_f": log.nu_f,
        "nu_r": log.nu_r,
        "tau": log.tau,
        "v0": [float(x) for x in log.v0],
        "spike_counts": [int(c) for c in log.spike_counts],
        "derived_bounds": bounds.to_dict() if bounds is not None else None,
        "terminated_reason": log.terminated_reason,
    }
    (directory / f"{stem}_summary.json").write_text(json.dumps(summary, indent=2))
    return summary


def load_spike_log(directory, problem: SparseCodingProblem, stem: str = "spikes") -> SpikeLog:
    """Rebuild a SpikeLog from files written by ``write_spike_log``.

    Only spike trains and run parameters are restored; the sampled traces
    come back as written (currents only) so readouts can be recomputed.
    """
    directory = Path(directory)
    summary = json.loads((directory / f"{stem}_summary.json").read_text())
    ev = np.loadtxt(directory / f"{stem}_events.csv", delimiter=",", skiprows=1, ndmin=2)
    neurons = ev[:, 0].astype(int) if ev.size else np.zeros(0, dtype=int)
    times = ev[:, 1] if ev.size else np.zeros(0)
    N = problem.N
    if neurons.size and (neurons.min() < 0 or neurons.max() >= N):
        raise ValueError("spike log references neurons outside the problem")
    if len(summary["spike_counts"]) != N:
        raise ValueError(f"spike log has {len(summary['spike_counts'])} neurons, problem has {N}")
    cur = np.loadtxt(directory / f"{stem}_currents.csv", delimiter=",", skiprows=1, ndmin=2)
    spike_times = [np.sort(times[neurons == i]) for i in range(N)]
    b = problem.b.copy()
    return SpikeLog(
        spike_times=spike_times, events_neuron=neurons, events_time=times,
        trace_t=cur[:, 0], trace_mu=cur[:, 1:], trace_v=np.full_like(cur[:, 1:], np.nan),
        b=b, weights=problem.gram, bias=float(summary["bias"]), nu_f=float(summary["nu_f"]),
        nu_r=float(summary["nu_r"]), tau=float(summary["tau"]), t_end=float(summary["t_end"]),
        engine=summary["engine"], step=float(summary["step"]),
        v0=np.array(summary["v0"], dtype=float), final_mu=cur[-1, 1:].copy(),
        final_v=np.full(N, np.nan), mu_min=cur[:, 1:].min(axis=0), mu_max=cur[:, 1:].max(axis=0),
        terminated_reason=summary.get("terminated_reason", "t_end"))
