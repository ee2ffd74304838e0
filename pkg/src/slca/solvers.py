"""Conventional (C)LASSO / elastic-net solvers used as ground truth.

``coord_descent`` is the oracle of record; ``fista`` is the accelerated
proximal-gradient baseline the spiking network is benchmarked against.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .core import SparseCodingProblem, kkt_residual, objective
from .errors import NotConverged


@dataclass
class SolverReport:
    solution: np.ndarray
    objective: float
    kkt: float
    iterations: int
    objective_trace: List[Tuple[int, float]] = field(default_factory=list)
    converged: bool = True
    method: str = ""
    # (wall seconds, objective); only filled when timing was requested
    time_trace: List[Tuple[float, float]] = field(default_factory=list)

    def to_dict(self, include_timing: bool = False) -> dict:
        d = {
            "method": self.method,
            "solution": [float(x) for x in self.solution],
            "objective": float(self.objective),
            "kkt": float(self.kkt),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "objective_trace": [[int(k), float(e)] for k, e in self.objective_trace],
        }
        if include_timing:
            d["time_trace"] = [[float(t), float(e)] for t, e in self.time_trace]
        return d


def lipschitz_constant(problem: SparseCodingProblem, rtol: float = 1e-6,
                       max_iter: int = 10_000, seed: int = 0) -> float:
    """Largest eigenvalue of Phi^T Phi by power iteration from a seeded start."""
    rng = np.random.default_rng(seed)
    x = rng.random(problem.N) + 0.5
    x /= np.linalg.norm(x)
    L = 0.0
    for _ in range(max_iter):
        y = problem.gram.matvec(x)
        L_new = float(x @ y)
        nrm = np.linalg.norm(y)
        if nrm == 0:
            return 0.0
        x = y / nrm
        if abs(L_new - L) <= rtol * abs(L_new):
            L = L_new
            break
        L = L_new
    # Rayleigh quotient approaches from below; pad so 1/L is a safe step
    return L * (1.0 + 10 * rtol)


def _prox(problem: SparseCodingProblem, x: np.ndarray, eta: float) -> np.ndarray:
    lam1, lam2 = problem.lambda1, problem.lambda2
    if problem.constrained:
        return np.maximum(x - eta * lam1, 0.0) / (1.0 + 2.0 * eta * lam2)
    return np.sign(x) * np.maximum(np.abs(x) - eta * lam1, 0.0)


def fista(problem: SparseCodingProblem, max_iter: int = 100_000, tol: float = 1e-10,
          a0: Optional[np.ndarray] = None, record_every: int = 1,
          timed: bool = False, window: int = 10,
          kkt_tol: Optional[float] = None) -> SolverReport:
    """Accelerated proximal gradient with constant step 1/L.

    Stops when the spread (max - min) of the objective over the last
    ``window`` iterations is <= tol relative to its value and the KKT residual
    is <= kkt_tol (default 10 * tol). Momentum makes the objective ripple, and
    near the optimum the objective stops resolving the iterate, hence the
    second gate.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if kkt_tol is None:
        kkt_tol = 10.0 * tol
    L = lipschitz_constant(problem)
    eta = 1.0 / L if L > 0 else 1.0
    b = problem.b
    x = np.zeros(problem.N) if a0 is None else np.array(a0, dtype=float)
    y = x.copy()
    t_k = 1.0
    E = objective(problem, x)
    history = [E]
    trace = [(0, E)]
    t_start = time.perf_counter()
    times = [(0.0, E)] if timed else []
    converged = False
    k = 0
    for k in range(1, max_iter + 1):
        grad = problem.gram.matvec(y) - b
        x_new = _prox(problem, y - eta * grad, eta)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_k * t_k))
        y = x_new + ((t_k - 1.0) / t_new) * (x_new - x)
        x, t_k = x_new, t_new
        E = objective(problem, x)
        if k % record_every == 0:
            trace.append((k, E))
        if timed:
            times.append((time.perf_counter() - t_start, E))
        history.append(E)
        if k >= window and k % window == 0:
            recent = history[-1 - window:]
            del history[:-1 - window]
            if max(recent) - min(recent) <= tol * max(abs(E), 1e-300) \
                    and kkt_residual(problem, x) <= kkt_tol:
                converged = True
                break
    if not converged:
        warnings.warn(f"FISTA stopped after {k} iterations without meeting tol={tol}",
                      NotConverged, stacklevel=2)
    if trace[-1][0] != k:
        trace.append((k, E))
    return SolverReport(solution=x, objective=E, kkt=kkt_residual(problem, x),
                        iterations=k, objective_trace=trace, converged=converged,
                        method="fista", time_trace=times)


def coord_descent(problem: SparseCodingProblem, max_sweeps: int = 100_000,
                  tol: float = 1e-12, a0: Optional[np.ndarray] = None) -> SolverReport:
    """Cyclic coordinate descent with exact coordinate minimisation.

    Keeps the correlation vector c = b - G a up to date so a sweep costs one
    Gram column per changed coordinate.
    """
    N = problem.N
    gram = problem.gram
    diag = gram.diag
    lam1, lam2 = problem.lambda1, problem.lambda2
    a = np.zeros(N) if a0 is None else np.array(a0, dtype=float)
    c = problem.b - gram.matvec(a)
    trace = [(0, objective(problem, a))]
    converged = False
    sweep = 0
    for sweep in range(1, max_sweeps + 1):
        max_change = 0.0
        for i in range(N):
            ai = a[i]
            # correlation with coordinate i removed from the fit
            z = c[i] + diag[i] * ai
            if problem.constrained:
                new = max(z - lam1, 0.0) / (diag[i] + 2.0 * lam2)
            else:
                new = np.sign(z) * max(abs(z) - lam1, 0.0) / diag[i]
            d = new - ai
            if d != 0.0:
                a[i] = new
                c -= d * gram.column(i)
                if abs(d) > max_change:
                    max_change = abs(d)
        trace.append((sweep, objective(problem, a)))
        if max_change <= tol:
            converged = True
            break
        if sweep % 64 == 0:
            c = problem.b - gram.matvec(a)  # limit drift of the running residual
    if not converged:
        warnings.warn(f"coordinate descent stopped after {sweep} sweeps without meeting tol={tol}",
                      NotConverged, stacklevel=2)
    return SolverReport(solution=a, objective=objective(problem, a),
                        kkt=kkt_residual(problem, a), iterations=sweep,
                        objective_trace=trace, converged=converged, method="coord_descent")
