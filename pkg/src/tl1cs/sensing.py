"""Sensing ensembles, sparse test signals and observation assembly.

Random numbers come from numpy's Philox4x64-10 counter-based bit generator
seeded through :class:`numpy.random.SeedSequence`. Every generator in this
module owns its stream, so an (spec, seed) pair fully determines the output.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "EnsembleSpec",
    "SignalSpec",
    "Problem",
    "make_rng",
    "correlated_gaussian_rows",
    "gen_gaussian",
    "gen_dct",
    "gen_matrix",
    "gen_signal",
    "make_problem",
    "mutual_coherence",
]

GAUSSIAN = "correlated-gaussian"
DCT = "oversampled-dct"
_KIND_ALIASES = {"gaussian": GAUSSIAN, GAUSSIAN: GAUSSIAN, "dct": DCT, DCT: DCT}

VALUE_LAWS = ("standard-normal", "unit-signs")


def make_rng(seed):
    """Philox generator for a 64-bit seed (or a SeedSequence / entropy list)."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def _seed(seed):
    seed = int(seed)
    if not 0 <= seed < 2 ** 64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


@dataclass(frozen=True)
class EnsembleSpec:
    kind: str
    M: int
    N: int
    r: float = 0.0
    F: float = 1.0
    seed: int = 0

    def __post_init__(self):
        kind = _KIND_ALIASES.get(self.kind)
        if kind is None:
            raise ValueError(f"unknown ensemble kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "seed", _seed(self.seed))
        if self.M < 1 or self.N < 1:
            raise ValueError("matrix dimensions must be positive")
        if self.M >= self.N:
            raise ValueError(f"sensing matrix must be underdetermined (M < N), got {self.M}x{self.N}")
        if not 0.0 <= self.r < 1.0:
            raise ValueError(f"correlation r must lie in [0, 1), got {self.r}")
        if self.F < 1.0:
            raise ValueError(f"oversampling factor F must be >= 1, got {self.F}")


@dataclass(frozen=True)
class SignalSpec:
    N: int
    k: int
    separation: int = 0
    values: str = "standard-normal"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "seed", _seed(self.seed))
        if self.values not in VALUE_LAWS:
            raise ValueError(f"value law must be one of {VALUE_LAWS}, got {self.values!r}")
        if self.k < 0 or self.k > self.N:
            raise ValueError(f"sparsity k={self.k} outside [0, N={self.N}]")
        if self.separation < 0:
            raise ValueError("separation must be nonnegative")
        if self.separation > 0 and self.k > 0 and (self.k - 1) * self.separation >= self.N:
            raise ValueError(
                f"cannot place {self.k} spikes with gap >= {self.separation} in length {self.N}")


@dataclass
class Problem:
    """Observation ``y = A x + noise``, optionally with the planted truth."""

    A: np.ndarray
    y: np.ndarray
    x_true: Optional[np.ndarray] = None
    support: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.A = np.ascontiguousarray(self.A, dtype=float)
        self.y = np.ascontiguousarray(self.y, dtype=float).ravel()
        if self.A.ndim != 2:
            raise ValueError("A must be a 2-d array")
        if self.y.shape[0] != self.A.shape[0]:
            raise ValueError(f"y has length {self.y.shape[0]}, expected {self.A.shape[0]}")
        if self.x_true is not None:
            self.x_true = np.ascontiguousarray(self.x_true, dtype=float).ravel()
            if self.x_true.shape[0] != self.A.shape[1]:
                raise ValueError("x_true length does not match the number of columns of A")
            if self.support is None:
                self.support = np.flatnonzero(self.x_true)
        if self.support is not None:
            self.support = np.asarray(self.support, dtype=np.int64)

    @property
    def shape(self):
        return self.A.shape

    def relative_error(self, x):
        """``||x - x*|| / ||x*||`` (absolute error when the truth is zero)."""
        if self.x_true is None:
            raise ValueError("problem carries no ground truth")
        den = np.linalg.norm(self.x_true)
        num = np.linalg.norm(np.asarray(x) - self.x_true)
        return float(num / den) if den > 0 else float(num)


def correlated_gaussian_rows(rng, M, N, r):
    """``M`` i.i.d. rows from ``N(0, (1 - r) I + r 11^T)``.

    Each row is ``sqrt(1 - r) z + sqrt(r) g 1`` with ``z`` a standard normal
    ``N``-vector and ``g`` a standard normal scalar.
    """
    if not 0.0 <= r < 1.0:
        raise ValueError(f"correlation r must lie in [0, 1), got {r}")
    z = rng.standard_normal((M, N))
    g = rng.standard_normal((M, 1))
    return np.sqrt(1.0 - r) * z + np.sqrt(r) * g


def gen_gaussian(spec):
    if spec.kind != GAUSSIAN:
        raise ValueError(f"expected a {GAUSSIAN} spec, got {spec.kind}")
    return correlated_gaussian_rows(make_rng(spec.seed), spec.M, spec.N, spec.r)


def gen_dct(spec):
    """Randomly over-sampled DCT: column ``j`` is ``cos(2 pi w (j - 1) / F) / sqrt(M)``."""
    if spec.kind != DCT:
        raise ValueError(f"expected a {DCT} spec, got {spec.kind}")
    rng = make_rng(spec.seed)
    w = rng.random(spec.M)
    phase = np.outer(w, np.arange(spec.N, dtype=float))
    return np.cos(2.0 * np.pi * phase / spec.F) / np.sqrt(spec.M)


def gen_matrix(spec):
    return gen_gaussian(spec) if spec.kind == GAUSSIAN else gen_dct(spec)


def gen_signal(spec):
    """Sparse vector with a support whose consecutive indices differ by at least ``separation``.

    Supports are uniform over all feasible ``k``-subsets: a plain uniform
    ``k``-subset of ``N - (k - 1)(s - 1)`` slots is sorted and the element of
    rank ``i`` (0-based) is shifted right by ``i (s - 1)``.

    Returns ``(x, support)`` with ``support`` sorted ascending, 0-based.
    """
    rng = make_rng(spec.seed)
    k, N = spec.k, spec.N
    gap = max(spec.separation, 1)
    slots = N - (k - 1) * (gap - 1) if k > 0 else N
    support = np.sort(rng.choice(slots, size=k, replace=False)).astype(np.int64)
    support += (gap - 1) * np.arange(k, dtype=np.int64)
    if spec.values == "standard-normal":
        vals = rng.standard_normal(k)
    else:
        vals = rng.choice(np.array([-1.0, 1.0]), size=k)
    x = np.zeros(N)
    x[support] = vals
    return x, support


def make_problem(ensemble, signal, noise_std=0.0):
    """Draw ``A``, the planted ``x*`` and ``y = A x* + e`` with ``e ~ N(0, noise_std^2)``.

    The noise stream is seeded from ``(ensemble.seed, signal.seed)``.
    """
    if signal.N != ensemble.N:
        raise ValueError(f"signal length {signal.N} does not match ensemble N={ensemble.N}")
    if noise_std < 0:
        raise ValueError("noise_std must be nonnegative")
    A = gen_matrix(ensemble)
    x, support = gen_signal(signal)
    y = A @ x
    if noise_std > 0:
        rng = make_rng(np.random.SeedSequence([ensemble.seed, signal.seed, 0x6E6F697365]))
        y = y + noise_std * rng.standard_normal(ensemble.M)
    meta = {
        "ensemble": ensemble.kind,
        "M": ensemble.M,
        "N": ensemble.N,
        "r": ensemble.r,
        "F": ensemble.F,
        "ensemble_seed": ensemble.seed,
        "k": signal.k,
        "separation": signal.separation,
        "values": signal.values,
        "signal_seed": signal.seed,
        "noise_std": noise_std,
    }
    return Problem(A, y, x, support, meta)


def mutual_coherence(A):
    """Largest ``|<a_i, a_j>| / (||a_i|| ||a_j||)`` over distinct columns."""
    A = np.asarray(A, dtype=float)
    norms = np.linalg.norm(A, axis=0)
    U = A / np.where(norms > 0, norms, 1.0)
    G = np.abs(U.T @ U)
    np.fill_diagonal(G, 0.0)
    return float(G.max())

