"""Problem definition shared by every solver.

Holds the dictionary, its Gram structure, the (C)LASSO / elastic-net problem,
the rectifier activation and the optimality (KKT) residual.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, DomainViolation, ZeroAtom

MODES = ("lasso", "classo", "elastic_net_classo")
TOL_ACTIVE = 1e-9
DENSE_GRAM_LIMIT = 4096


@dataclass(frozen=True)
class Dictionary:
    """Dense M x N atom matrix; columns are the atoms."""

    atoms: np.ndarray
    column_norms: Optional[np.ndarray] = None

    def __post_init__(self):
        atoms = np.asfortranarray(np.asarray(self.atoms, dtype=float))
        if atoms.ndim != 2:
            raise DimensionMismatch(f"atoms must be 2-D, got shape {atoms.shape}")
        atoms.flags.writeable = False
        object.__setattr__(self, "atoms", atoms)
        norms = self.column_norms
        if norms is None:
            norms = np.linalg.norm(atoms, axis=0)
        norms = np.array(norms, dtype=float)
        norms.flags.writeable = False
        object.__setattr__(self, "column_norms", norms)

    @property
    def shape(self):
        return self.atoms.shape

    @property
    def M(self) -> int:
        return self.atoms.shape[0]

    @property
    def N(self) -> int:
        return self.atoms.shape[1]

    @property
    def nonnegative(self) -> bool:
        return bool(np.all(self.atoms >= 0))

    def apply(self, a: np.ndarray) -> np.ndarray:
        return self.atoms @ a

    def apply_T(self, r: np.ndarray) -> np.ndarray:
        return self.atoms.T @ r

    def column(self, i: int) -> np.ndarray:
        return self.atoms[:, i]

    def to_dense(self) -> np.ndarray:
        return self.atoms


def normalize(dictionary: Dictionary) -> Dictionary:
    """Scale every atom to unit Euclidean norm, keeping the original norms."""
    atoms = np.array(dictionary.atoms, dtype=float)
    norms = np.linalg.norm(atoms, axis=0)
    bad = np.flatnonzero(norms < 1e-14)
    if bad.size:
        raise ZeroAtom(int(bad[0]))
    return Dictionary(atoms / norms, column_norms=norms)


class GramMatrix:
    """Inhibition weights w_ij = phi_i . phi_j.

    Stored densely when N <= dense_limit, otherwise columns are produced on
    demand from the dictionary operator and cached.
    """

    def __init__(self, dictionary, dense_limit: int = DENSE_GRAM_LIMIT):
        self.dictionary = dictionary
        self.N = dictionary.N
        self._cache = {}
        if self.N <= dense_limit:
            A = dictionary.to_dense()
            G = A.T @ A
            G = np.triu(G) + np.triu(G, 1).T  # exact symmetry
            G = np.asfortranarray(G)
            G.flags.writeable = False
            self.dense = G
            self.diag = np.array(np.diag(G))
        else:
            self.dense = None
            self.diag = np.array([dictionary.column(j) @ dictionary.column(j)
                                  for j in range(self.N)])
        self.diag.flags.writeable = False

    @property
    def is_dense(self) -> bool:
        return self.dense is not None

    def matvec(self, x: np.ndarray) -> np.ndarray:
        if self.dense is not None:
            return self.dense @ x
        return self.dictionary.apply_T(self.dictionary.apply(x))

    def offdiag_matvec(self, x: np.ndarray) -> np.ndarray:
        """(G - diag(G)) x, i.e. the j != i coupling sums."""
        return self.matvec(x) - self.diag * x

    def column(self, j: int) -> np.ndarray:
        if self.dense is not None:
            return self.dense[:, j]
        col = self._cache.get(j)
        if col is None:
            col = self.dictionary.apply_T(self.dictionary.column(j))
            col.flags.writeable = False
            self._cache[j] = col
        return col

    def offdiag_column(self, j: int) -> np.ndarray:
        col = np.array(self.column(j))
        col[j] = 0.0
        return col

    def offdiag_dense(self) -> np.ndarray:
        if self.dense is not None:
            W = np.array(self.dense)
        else:
            W = np.column_stack([self.column(j) for j in range(self.N)])
        np.fill_diagonal(W, 0.0)
        return W

    def is_symmetric(self) -> bool:
        if self.dense is None:
            return True
        return bool(np.array_equal(self.dense, self.dense.T))


@dataclass(frozen=True)
class ThresholdSpec:
    """Rectifier activation: 0 below lambda1, slope 1/(2*lambda2+1) above.

    ``two_sided`` applies the odd extension T(x) + T(-x) used for LASSO.
    """

    lambda1: float
    lambda2: float = 0.0
    sided: str = "one_sided"

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("threshold parameters must be nonnegative")
        if self.sided not in ("one_sided", "two_sided"):
            raise ValueError(f"unknown sidedness {self.sided!r}")

    @property
    def slope(self) -> float:
        return 1.0 / (2.0 * self.lambda2 + 1.0)

    def __call__(self, x):
        return threshold_apply(x, self)


def threshold_apply(x, spec: ThresholdSpec):
    """Apply the activation elementwise. Works on scalars and arrays."""
    x = np.asarray(x, dtype=float)
    if spec.sided == "one_sided":
        out = np.maximum(x - spec.lambda1, 0.0) * spec.slope
    else:
        out = np.sign(x) * np.maximum(np.abs(x) - spec.lambda1, 0.0) * spec.slope
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class SparseCodingProblem:
    """min_a 1/2 ||s - Phi a||^2 + lambda1 ||a||_1 (+ lambda2 ||a||^2), a >= 0 unless lasso."""

    dictionary: Dictionary
    signal: np.ndarray
    lambda1: float
    lambda2: float = 0.0
    mode: str = "classo"
    dense_gram_limit: int = DENSE_GRAM_LIMIT
    b: np.ndarray = field(init=False, repr=False)
    gram: GramMatrix = field(init=False, repr=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("lambda1 and lambda2 must be nonnegative")
        if self.mode != "elastic_net_classo" and self.lambda2 != 0:
            raise ValueError("lambda2 > 0 requires mode='elastic_net_classo'")
        s = np.array(self.signal, dtype=float).ravel()
        s.flags.writeable = False
        object.__setattr__(self, "signal", s)
        object.__setattr__(self, "b", biases(self))
        object.__setattr__(self, "gram", GramMatrix(self.dictionary, self.dense_gram_limit))

    @property
    def N(self) -> int:
        return self.dictionary.N

    @property
    def constrained(self) -> bool:
        return self.mode != "lasso"

    @property
    def threshold(self) -> ThresholdSpec:
        sided = "two_sided" if self.mode == "lasso" else "one_sided"
        return ThresholdSpec(self.lambda1, self.lambda2, sided)


def biases(problem: SparseCodingProblem) -> np.ndarray:
    """b = Phi^T s (read-only)."""
    s = np.asarray(problem.signal, dtype=float)
    if s.shape != (problem.dictionary.M,):
        raise DimensionMismatch(
            f"signal has length {s.size}, dictionary has {problem.dictionary.M} rows")
    b = np.array(problem.dictionary.apply_T(s), dtype=float)
    b.flags.writeable = False
    return b


def _check_domain(problem, a):
    a = np.asarray(a, dtype=float)
    if a.shape != (problem.N,):
        raise DimensionMismatch(f"coefficient vector has shape {a.shape}, expected ({problem.N},)")
    if problem.constrained:
        neg = np.flatnonzero(a < 0)
        if neg.size:
            raise DomainViolation(neg)
    return a


def objective(problem: SparseCodingProblem, a) -> float:
    a = _check_domain(problem, a)
    r = problem.signal - problem.dictionary.apply(a)
    E = 0.5 * float(r @ r) + problem.lambda1 * float(np.abs(a).sum())
    if problem.mode == "elastic_net_classo":
        E += problem.lambda2 * float(a @ a)
    return E


def kkt_residual(problem: SparseCodingProblem, a, tol_active: float = TOL_ACTIVE) -> float:
    """Max violation of the first-order optimality conditions (0 iff optimal)."""
    a = _check_domain(problem, a)
    corr = problem.dictionary.apply_T(problem.signal - problem.dictionary.apply(a))
    lam1, lam2 = problem.lambda1, problem.lambda2
    if problem.constrained:
        active = a > tol_active
        res = np.where(active,
                       np.abs(corr - lam1 - 2.0 * lam2 * a),
                       np.maximum(corr - lam1, 0.0))
    else:
        active = np.abs(a) > tol_active
        res = np.where(active,
                       np.abs(corr - lam1 * np.sign(a)),
                       np.maximum(np.abs(corr) - lam1, 0.0))
    return float(res.max()) if res.size else 0.0
