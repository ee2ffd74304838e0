"""Analog LCA: u' = b - u - (G - I) T(u), integrated with fixed-step Euler or RK4."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numba
import numpy as np

from .core import SparseCodingProblem, objective
from .errors import NumericalBlowup

BLOWUP = 1e8


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk4"
    step: float = 1e-3
    t_end: float = 200.0
    settle_tol: float = 1e-9
    record_every: int = 100

    def __post_init__(self):
        if self.method not in ("explicit_euler", "rk4"):
            raise ValueError(f"unknown integrator {self.method!r}")
        if not 0 < self.step < self.t_end:
            raise ValueError("need 0 < step < t_end")
        if self.settle_tol <= 0:
            raise ValueError("settle_tol must be positive")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


@dataclass
class AnalogSample:
    t: float
    u: np.ndarray
    a: np.ndarray
    energy: float


@dataclass
class AnalogTrajectory:
    samples: List[AnalogSample] = field(default_factory=list)
    terminated_reason: str = "t_end"
    steps: int = 0

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    @property
    def u(self) -> np.ndarray:
        return np.array([s.u for s in self.samples])

    @property
    def a(self) -> np.ndarray:
        return np.array([s.a for s in self.samples])

    @property
    def energies(self) -> np.ndarray:
        return np.array([s.energy for s in self.samples])

    @property
    def final(self) -> AnalogSample:
        return self.samples[-1]


def alca_rhs(u: np.ndarray, problem: SparseCodingProblem) -> np.ndarray:
    """F(u) = b - u - (G - I) T(u); only the active coordinates of T(u) couple."""
    a = problem.threshold(u)
    return problem.b - u - _coupling(a, problem)


def _coupling(a, problem):
    # (G - I) a where the self term uses the true diagonal (1 for unit atoms)
    nz = np.flatnonzero(a)
    if problem.gram.is_dense and nz.size < 0.25 * a.size:
        out = problem.gram.dense[:, nz] @ a[nz]
        out -= a
        return out
    return problem.gram.matvec(a) - a


@numba.njit(cache=True)
def _rhs_dense(u, G, b, lam1, slope, two_sided, out):
    N = u.size
    for i in range(N):
        out[i] = b[i] - u[i]
    for j in range(N):
        x = u[j]
        if two_sided:
            if x > lam1:
                aj = (x - lam1) * slope
            elif x < -lam1:
                aj = (x + lam1) * slope
            else:
                continue
        else:
            if x <= lam1:
                continue
            aj = (x - lam1) * slope
        for i in range(N):
            out[i] -= G[i, j] * aj
        out[j] += aj


@numba.njit(cache=True)
def _advance_dense(u, k1, G, b, lam1, slope, two_sided, h, n_steps, settle_tol, rk4, blowup):
    """Take up to n_steps steps. Returns (steps_taken, status); status 0 ran out,
    1 settled (checked before each step), 2 blew up."""
    N = u.size
    k2 = np.empty(N)
    k3 = np.empty(N)
    k4 = np.empty(N)
    tmp = np.empty(N)
    for step in range(n_steps + 1):
        m = 0.0
        for i in range(N):
            if abs(k1[i]) > m:
                m = abs(k1[i])
        if m <= settle_tol:
            return step, 1
        if step == n_steps:
            return step, 0
        if rk4:
            for i in range(N):
                tmp[i] = u[i] + 0.5 * h * k1[i]
            _rhs_dense(tmp, G, b, lam1, slope, two_sided, k2)
            for i in range(N):
                tmp[i] = u[i] + 0.5 * h * k2[i]
            _rhs_dense(tmp, G, b, lam1, slope, two_sided, k3)
            for i in range(N):
                tmp[i] = u[i] + h * k3[i]
            _rhs_dense(tmp, G, b, lam1, slope, two_sided, k4)
            for i in range(N):
                u[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        else:
            for i in range(N):
                u[i] += h * k1[i]
        for i in range(N):
            if not abs(u[i]) <= blowup:
                return step + 1, 2
        _rhs_dense(u, G, b, lam1, slope, two_sided, k1)
    return n_steps, 0


def integrate(problem: SparseCodingProblem, u0: Optional[np.ndarray] = None,
              cfg: IntegratorConfig = IntegratorConfig(),
              pure_python: bool = False) -> AnalogTrajectory:
    """Advance the flow until ||F(u)||_inf <= settle_tol or t_end.

    Records every ``record_every``-th step plus the final state.
    """
    N = problem.N
    u = np.zeros(N) if u0 is None else np.array(u0, dtype=float)
    h = cfg.step
    n_max = int(np.ceil(cfg.t_end / h - 1e-9))
    traj = AnalogTrajectory()

    def record(t, u):
        a = problem.threshold(u)
        traj.samples.append(AnalogSample(t, u.copy(), a, objective(problem, a)))

    record(0.0, u)
    k1 = alca_rhs(u, problem)
    step = 0
    reason = "t_end"
    spec = problem.threshold
    use_kernel = problem.gram.is_dense and not pure_python
    if use_kernel:
        G = problem.gram.dense
        b = np.ascontiguousarray(problem.b)
    while step < n_max or np.max(np.abs(k1), initial=0.0) <= cfg.settle_tol:
        chunk = min(cfg.record_every, n_max - step)
        if use_kernel:
            taken, status = _advance_dense(u, k1, G, b, spec.lambda1, spec.slope,
                                           spec.sided == "two_sided", h, chunk,
                                           cfg.settle_tol, cfg.method == "rk4", BLOWUP)
        else:
            taken, status, u, k1 = _advance_python(u, k1, problem, h, chunk, cfg)
        step += taken
        if status == 2:
            raise NumericalBlowup(f"|u| exceeded {BLOWUP:g} at step {step}; reduce the step size")
        if status == 1:
            reason = "settled"
            break
        if step % cfg.record_every == 0:
            record(step * h, u)
    if traj.samples[-1].t != step * h:
        record(step * h, u)
    traj.terminated_reason = reason
    traj.steps = step
    return traj


def _advance_python(u, k1, problem, h, n_steps, cfg):
    for step in range(n_steps + 1):
        if np.max(np.abs(k1), initial=0.0) <= cfg.settle_tol:
            return step, 1, u, k1
        if step == n_steps:
            return step, 0, u, k1
        if cfg.method == "rk4":
            k2 = alca_rhs(u + 0.5 * h * k1, problem)
            k3 = alca_rhs(u + 0.5 * h * k2, problem)
            k4 = alca_rhs(u + h * k3, problem)
            u = u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        else:
            u = u + h * k1
        if not np.all(np.abs(u) <= BLOWUP):
            return step + 1, 2, u, k1
        k1 = alca_rhs(u, problem)
    return n_steps, 0, u, k1


def alca_energy_descent_report(traj: AnalogTrajectory, problem: SparseCodingProblem,
                               rel_slack: float = 1e-9):
    """Evaluate V(u) = E(T(u)) at each sample and flag increases beyond the slack.

    Returns (values, flagged) where values is a list of (t, V) and flagged the
    list of sample indices k with V[k] - V[k-1] > rel_slack * (1 + |V[k-1]|).
    """
    if not traj.samples:
        raise ValueError("empty trajectory")
    values = [(s.t, objective(problem, problem.threshold(s.u))) for s in traj.samples]
    flagged = []
    for k in range(1, len(values)):
        prev, cur = values[k - 1][1], values[k][1]
        if cur - prev > rel_slack * (1.0 + abs(prev)):
            flagged.append(k)
    return values, flagged


def write_trajectory_csv(path, traj: AnalogTrajectory) -> None:
    N = traj.samples[0].u.size
    header = ["t"] + [f"u_{i + 1}" for i in range(N)] + [f"a_{i + 1}" for i in range(N)] + ["energy"]
    rows = np.column_stack([traj.times, traj.u, traj.a, traj.energies])
    np.savetxt(path, rows, delimiter=",", header=",".join(header), comments="", fmt="%.17g")
