"""Problem sources: the 3-neuron illustration, seeded random instances,
channel splitting and a matrix-free patch (convolutional) dictionary."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Dictionary, SparseCodingProblem, normalize
from .errors import ZeroAtom

PAPER_PHI = np.array([
    [0.3313, 0.8148, 0.4364],
    [0.8835, 0.3621, 0.2182],
    [0.3313, 0.4527, 0.8729],
])
PAPER_SIGNAL = np.array([0.5, 1.0, 1.5])
PAPER_LAMBDA = 0.1
PAPER_OPTIMUM = np.array([0.684, 0.0, 1.217])  # as printed, 3 decimals


def paper_problem(normalized: bool = True) -> SparseCodingProblem:
    """The 3-atom CLASSO illustration (s, Phi, lambda = 0.1).

    The printed atoms are unit norm only to ~5e-5; by default they are
    renormalised so the network dynamics (which assume unit self-weight)
    solve exactly the stated problem.
    """
    D = Dictionary(PAPER_PHI)
    if normalized:
        D = normalize(D)
    return SparseCodingProblem(D, PAPER_SIGNAL, PAPER_LAMBDA, 0.0, "classo")


def gen_random_dictionary(M: int, N: int, density: float, rng: np.random.Generator,
                          max_retries: int = 10) -> Dictionary:
    if M < 1 or N < 1:
        raise ValueError("M and N must be positive")
    if not 0 < density <= 1:
        raise ValueError("density must lie in (0, 1]")
    last = None
    for _ in range(max_retries):
        A = rng.random((M, N))
        if density < 1:
            A *= rng.random((M, N)) < density
        try:
            return normalize(Dictionary(A))
        except ZeroAtom as exc:
            last = exc
    raise last


def gen_random_problem(M: int, N: int, density: float = 1.0, seed: int = 0,
                       k: int | None = None, lambda_ratio: float = 0.1,
                       noise: float = 0.05) -> SparseCodingProblem:
    """Seeded nonnegative CLASSO instance.

    Atoms are uniform [0, 1) entries, masked to ``density`` and normalised.
    The signal is a nonnegative combination of ``k`` atoms plus uniform
    nonnegative noise; lambda1 = lambda_ratio * max(Phi^T s).
    """
    rng = np.random.default_rng(seed)
    D = gen_random_dictionary(M, N, density, rng)
    if k is None:
        k = max(1, min(N, M) // 8)
    support = rng.choice(N, size=k, replace=False)
    x = np.zeros(N)
    x[support] = rng.uniform(0.5, 1.5, size=k)
    s = D.apply(x) + noise * rng.random(M)
    lam = lambda_ratio * float(np.max(D.apply_T(s)))
    return SparseCodingProblem(D, s, lam, 0.0, "classo")


@dataclass(frozen=True)
class ChannelSplitSignal:
    original: np.ndarray
    split: np.ndarray

    def reconstruct(self) -> np.ndarray:
        M = self.original.size
        return self.split[:M] - self.split[M:]


def channel_split(signal) -> ChannelSplitSignal:
    """Positive part followed by negative part, both nonnegative."""
    x = np.asarray(signal, dtype=float).ravel()
    return ChannelSplitSignal(x, np.concatenate([np.maximum(x, 0.0), np.maximum(-x, 0.0)]))


class PatchDictionary:
    """Matrix-free convolutional dictionary built from a local patch dictionary.

    Every ``patch`` x ``patch`` window at the given stride gets its own copy of
    the local atoms; overlapping windows are summed. Images may have several
    channels (e.g. after a positive/negative split). Columns are normalised.
    """

    def __init__(self, local, image_shape, patch: int = 8, stride: int = 4, channels: int = 1):
        local = np.asarray(local, dtype=float)
        H, W = image_shape
        if local.shape[0] != channels * patch * patch:
            raise ValueError("local dictionary rows must equal channels * patch * patch")
        if (H - patch) % stride or (W - patch) % stride:
            raise ValueError("image size must tile exactly with the given patch/stride")
        norms = np.linalg.norm(local, axis=0)
        if np.any(norms < 1e-14):
            raise ZeroAtom(int(np.flatnonzero(norms < 1e-14)[0]))
        self.local = local / norms
        self.image_shape = (H, W)
        self.patch, self.stride, self.channels = patch, stride, channels
        self.ny = (H - patch) // stride + 1
        self.nx = (W - patch) // stride + 1
        self.K = local.shape[1]
        self.M = channels * H * W
        self.N = self.ny * self.nx * self.K
        self.column_norms = np.ones(self.N)

    @property
    def shape(self):
        return (self.M, self.N)

    @property
    def nonnegative(self) -> bool:
        return bool(np.all(self.local >= 0))

    def _patch_origins(self):
        for py in range(self.ny):
            for px in range(self.nx):
                yield py * self.stride, px * self.stride

    def apply(self, a: np.ndarray) -> np.ndarray:
        p, C = self.patch, self.channels
        img = np.zeros((C,) + self.image_shape)
        coeffs = np.asarray(a, dtype=float).reshape(self.ny * self.nx, self.K)
        patches = (self.local @ coeffs.T).T.reshape(-1, C, p, p)
        for n, (y, x) in enumerate(self._patch_origins()):
            img[:, y:y + p, x:x + p] += patches[n]
        return img.ravel()

    def apply_T(self, r: np.ndarray) -> np.ndarray:
        p, C = self.patch, self.channels
        img = np.asarray(r, dtype=float).reshape((C,) + self.image_shape)
        windows = np.stack([img[:, y:y + p, x:x + p].ravel() for y, x in self._patch_origins()])
        return (windows @ self.local).ravel()

    def column(self, i: int) -> np.ndarray:
        e = np.zeros(self.N)
        e[i] = 1.0
        return self.apply(e)

    def to_dense(self) -> np.ndarray:
        return np.column_stack([self.column(i) for i in range(self.N)])


def gen_patch_problem(image_size: int = 16, n_local: int = 16, patch: int = 8, stride: int = 4,
                      seed: int = 0, lambda_ratio: float = 0.1,
                      dense_gram_limit: int | None = None) -> SparseCodingProblem:
    """Convolutional CLASSO on a random signed image split into two channels."""
    rng = np.random.default_rng(seed)
    local = rng.random((2 * patch * patch, n_local))
    D = PatchDictionary(local, (image_size, image_size), patch, stride, channels=2)
    img = rng.standard_normal((image_size, image_size))
    s = channel_split(img).split
    lam = lambda_ratio * float(np.max(D.apply_T(s)))
    kwargs = {} if dense_gram_limit is None else {"dense_gram_limit": dense_gram_limit}
    return SparseCodingProblem(D, s, lam, 0.0, "classo", **kwargs)


# ---------------------------------------------------------------- file IO

def read_matrix_csv(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=float, ndmin=2))


def write_matrix_csv(path, A) -> None:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    np.savetxt(path, A, delimiter=",", fmt="%.17g")


def load_problem(descriptor_path) -> SparseCodingProblem:
    """Load a JSON descriptor {dictionary_path, signal_path, lambda1, lambda2, mode}.

    Relative paths resolve against the descriptor's directory. A signal CSV
    may be one row or one column.
    """
    descriptor_path = Path(descriptor_path)
    desc = json.loads(descriptor_path.read_text())
    base = descriptor_path.parent
    Phi = read_matrix_csv(base / desc["dictionary_path"])
    s = read_matrix_csv(base / desc["signal_path"]).ravel()
    D = Dictionary(Phi)
    if desc.get("normalize", True):
        D = normalize(D)
    return SparseCodingProblem(D, s, float(desc["lambda1"]), float(desc.get("lambda2", 0.0)),
                               desc.get("mode", "classo"))


def save_problem(problem: SparseCodingProblem, directory, stem: str = "problem") -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_matrix_csv(directory / f"{stem}_dictionary.csv", problem.dictionary.to_dense())
    write_matrix_csv(directory / f"{stem}_signal.csv", problem.signal.reshape(-1, 1))
    desc = {
        "dictionary_path": f"{stem}_dictionary.csv",
        "signal_path": f"{stem}_signal.csv",
        "lambda1": problem.lambda1,
        "lambda2": problem.lambda2,
        "mode": problem.mode,
    }
    out = directory / f"{stem}.json"
    out.write_text(json.dumps(desc, indent=2))
    return out
