"""DCA solvers for transformed-l1 sparse recovery.

Unconstrained model::

    min_x  1/2 ||A x - y||^2 + lam * P_a(x)

split as ``g - h`` with ``g = 1/2||Ax - y||^2 + c||x||^2 + lam (a+1)/a ||x||_1``
and ``h = lam * phi_a(x) + c||x||^2``. Each outer step linearises ``h`` and
solves the resulting weighted-l1 problem by ADMM.

Constrained model::

    min_x  P_a(x)   subject to   A x = y

with the same linearisation of ``phi_a`` and an ADMM inner loop carrying two
multipliers, one for ``x = w`` and one for ``A x = y``.
"""

import dataclasses
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.linalg

from .penalty import PenaltyParams, SubgradientSet, penalty_sum, phi_grad, shrink, tl1_subdifferential

__all__ = [
    "MODELS",
    "SolveOptions",
    "SolveResult",
    "AdmmState",
    "FactorizationCache",
    "FactorizationError",
    "objective",
    "admm_subproblem",
    "solve_unconstrained",
    "solve_constrained",
    "solve_l1_baseline",
    "stationarity_residual",
    "l1_subdifferential",
    "solve",
]

MODELS = ("unconstrained", "constrained")


class FactorizationError(RuntimeError):
    """The ADMM system matrix could not be factored (corrupt input)."""


@dataclass(frozen=True)
class SolveOptions:
    """Solver settings.

    ``c`` and ``delta`` default to values tied to ``lam`` for the
    unconstrained model (``0.1 lam`` and ``100 lam``) and ``delta = 10`` for
    the constrained model, where ``lam`` plays no role. ``max_inner``
    defaults to 300 (unconstrained, warm-started) or 5000 (constrained,
    whose multipliers restart at every outer step).
    """

    lam: float = 1e-5
    a: float = 1.0
    c: Optional[float] = None
    delta: Optional[float] = None
    eps_outer: float = 1e-6
    eps_inner: float = 1e-7
    max_outer: int = 50
    max_inner: Optional[int] = None
    model: str = "unconstrained"
    record_iterates: bool = False
    time_limit: Optional[float] = None

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")
        PenaltyParams(self.a)
        if self.model == "unconstrained" and not (np.isfinite(self.lam) and self.lam > 0):
            raise ValueError(f"lam must be positive for the unconstrained model, got {self.lam}")
        if self.delta is not None and not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.c is not None and not self.c >= 0:
            raise ValueError(f"c must be nonnegative, got {self.c}")
        if not (self.eps_outer > 0 and self.eps_inner > 0):
            raise ValueError("stopping tolerances must be positive")
        if self.max_outer < 1 or (self.max_inner is not None and self.max_inner < 1):
            raise ValueError("iteration caps must be at least 1")

    @property
    def penalty(self):
        return PenaltyParams(self.a)

    @property
    def c_value(self):
        if self.c is not None:
            return float(self.c)
        return 0.1 * self.lam if self.model == "unconstrained" else 0.0

    @property
    def delta_value(self):
        if self.delta is not None:
            return float(self.delta)
        return 100.0 * self.lam if self.model == "unconstrained" else 10.0

    @property
    def max_inner_value(self):
        if self.max_inner is not None:
            return int(self.max_inner)
        return 300 if self.model == "unconstrained" else 5000

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass
class SolveResult:
    x: np.ndarray
    objective_trace: List[float]
    inner_iters: List[int]
    stationarity_residual: float
    status: str
    feasibility_gap: Optional[float] = None
    iterates: Optional[List[np.ndarray]] = None
    meta: dict = field(default_factory=dict)

    @property
    def outer_iters(self):
        return len(self.inner_iters)

    @property
    def total_inner_iters(self):
        return int(sum(self.inner_iters))

    def trace_csv(self):
        lines = ["outer,objective,inner_iters"]
        lines.append(f"0,{self.objective_trace[0]:.17g},0")
        for n, (f, k) in enumerate(zip(self.objective_trace[1:], self.inner_iters), start=1):
            lines.append(f"{n},{f:.17g},{k}")
        return "\n".join(lines) + "\n"

    def summary(self, prob=None):
        rows = [
            ("status", self.status),
            ("model", self.meta.get("model", "")),
            ("penalty", self.meta.get("penalty", "")),
            ("outer_iters", self.outer_iters),
            ("inner_iters", self.total_inner_iters),
            ("objective", f"{self.objective_trace[-1]:.17g}"),
            ("stationarity_residual", f"{self.stationarity_residual:.6g}"),
            ("nnz", int(np.count_nonzero(self.x))),
        ]
        if self.feasibility_gap is not None:
            rows.append(("feasibility_gap", f"{self.feasibility_gap:.6g}"))
        if prob is not None and prob.x_true is not None:
            rows.append(("relative_error", f"{prob.relative_error(self.x):.6g}"))
        rows.append(("returned_iterate", self.meta.get("returned_iterate", "")))
        return "\n".join(f"{k}: {v}" for k, v in rows) + "\n"


class FactorizationCache:
    """Cholesky factor for solves with ``A^T A + sigma I``.

    For wide ``A`` (``M < N``) the ``M x M`` matrix ``A A^T + sigma I`` is
    factored and the ``N x N`` inverse is applied through the matrix
    inversion lemma, ``(A^T A + sigma I)^-1 = (I - A^T (A A^T + sigma I)^-1 A) / sigma``.
    Otherwise ``A^T A + sigma I`` is factored directly.
    """

    def __init__(self, A, sigma):
        if not sigma > 0:
            raise FactorizationError(f"sigma must be positive, got {sigma}")
        self.A = np.ascontiguousarray(A, dtype=float)
        self.sigma = float(sigma)
        M, N = self.A.shape
        self.wide = M < N
        if self.wide:
            system = self.A @ self.A.T
        else:
            system = self.A.T @ self.A
        system[np.diag_indices_from(system)] += self.sigma
        self.system = system
        try:
            self.factor = scipy.linalg.cho_factor(system, lower=True)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise FactorizationError(f"system matrix is not positive definite: {exc}") from exc
        if self.wide:
            self._B = scipy.linalg.cho_solve(self.factor, self.A)

    @property
    def shape(self):
        return self.A.shape

    def matrix(self):
        """The full ``N x N`` matrix ``A^T A + sigma I``."""
        K = self.A.T @ self.A
        K[np.diag_indices_from(K)] += self.sigma
        return K

    def lower_factor(self):
        return np.tril(self.factor[0])

    def reconstruction_error(self):
        """``||L L^T - K|| / ||K||`` for the factored (small) system."""
        L = self.lower_factor()
        return float(np.linalg.norm(L @ L.T - self.system) / np.linalg.norm(self.system))

    def solve(self, rhs):
        if self.wide:
            return (rhs - self.A.T @ (self._B @ rhs)) / self.sigma
        return scipy.linalg.cho_solve(self.factor, rhs)


@dataclass
class AdmmState:
    """Inner ADMM iterate; ``z`` is the (exactly sparse) solution estimate."""

    x: np.ndarray
    z: np.ndarray
    u: np.ndarray
    iterations: int = 0
    converged: bool = False


def l1_subdifferential(x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    s = np.sign(x)
    return SubgradientSet(np.where(x == 0, -1.0, s), np.where(x == 0, 1.0, s))


def objective(x, prob, opts=SolveOptions()):
    """``1/2 ||A x - y||^2 + lam P_a(x)``."""
    r = prob.A @ x - prob.y
    return 0.5 * float(r @ r) + opts.lam * penalty_sum(x, opts.penalty)


def _stationarity(x, prob, scale, subdiff):
    if x.size == 0:
        return 0.0
    grad = prob.A.T @ (prob.A @ x - prob.y)
    return float(np.max(subdiff.scaled(scale).distance(-grad)))


def stationarity_residual(x, prob, opts=SolveOptions()):
    """Max-norm distance from ``-A^T(Ax - y)`` to ``lam * dP_a(x)``."""
    x = np.asarray(x, dtype=float)
    return _stationarity(x, prob, opts.lam, tl1_subdifferential(x, opts.penalty))


def _admm_l1(cache, b, weight, delta, warm, eps, max_iter):
    """ADMM for ``min 1/2 x^T (A^T A + 2c I) x - <x, b> + weight ||x||_1``.

    ``cache`` must hold the factor for ``sigma = 2c + delta``.
    """
    N = cache.shape[1]
    if warm is None:
        x, z, u = np.zeros(N), np.zeros(N), np.zeros(N)
    else:
        x, z, u = warm.x.copy(), warm.z.copy(), warm.u.copy()
    thr = weight / delta
    converged = False
    k = 0
    for k in range(1, max_iter + 1):
        x_new = cache.solve(b + delta * z - u)
        z = shrink(x_new + u / delta, thr)
        u += delta * (x_new - z)
        gap = max(np.linalg.norm(x_new - x), np.linalg.norm(x_new - z))
        x = x_new
        if gap <= eps:
            converged = True
            break
    return AdmmState(x, z, u, k, converged)


def admm_subproblem(vn, prob, opts=SolveOptions(), warm=None, cache=None):
    """One DCA sub-problem of the unconstrained model, solved by ADMM.

    Minimises ``1/2 x^T (A^T A + 2c I) x - <x, vn + A^T y> + lam (a+1)/a ||x||_1``.
    Returns the final :class:`AdmmState`; its ``z`` field is the solution.
    """
    delta, c = opts.delta_value, opts.c_value
    cache = _cache_for(prob.A, 2.0 * c + delta, cache)
    b = prob.A.T @ prob.y + np.asarray(vn, dtype=float)
    weight = opts.lam * opts.penalty.slope_at_zero
    return _admm_l1(cache, b, weight, delta, warm, opts.eps_inner, opts.max_inner_value)


def _cache_for(A, sigma, cache):
    if cache is None:
        return FactorizationCache(A, sigma)
    if cache.sigma != sigma or cache.A.shape != A.shape:
        raise ValueError(f"factorization cache holds sigma={cache.sigma}, solver needs {sigma}")
    return cache


class _Deadline:
    def __init__(self, seconds):
        self.end = None if seconds is None else time.monotonic() + seconds

    def passed(self):
        return self.end is not None and time.monotonic() > self.end


def _dca_unconstrained(prob, opts, slope, lin_grad, penalty_value, subdiff, cache, label):
    A, y = prob.A, prob.y
    N = A.shape[1]
    lam, c, delta = opts.lam, opts.c_value, opts.delta_value
    cache = _cache_for(A, 2.0 * c + delta, cache)
    Aty = A.T @ y
    weight = lam * slope

    def f(x):
        r = A @ x - y
        return 0.5 * float(r @ r) + lam * penalty_value(x)

    deadline = _Deadline(opts.time_limit)
    x = np.zeros(N)
    trace, inner = [f(x)], []
    iterates = [x.copy()] if opts.record_iterates else None
    state = None
    status = "max-iterations"
    for _ in range(opts.max_outer):
        v = lam * lin_grad(x) + 2.0 * c * x
        state = _admm_l1(cache, Aty + v, weight, delta, state, opts.eps_inner, opts.max_inner_value)
        x_new = state.z.copy()
        trace.append(f(x_new))
        inner.append(state.iterations)
        if not (np.isfinite(trace[-1]) and np.all(np.isfinite(x_new))):
            x = x_new
            status = "diverged"
            break
        step = np.linalg.norm(x_new - x)
        x = x_new
        if iterates is not None:
            iterates.append(x.copy())
        if step <= opts.eps_outer:
            status = "converged"
            break
        if deadline.passed():
            status = "timeout"
            break
    residual = _stationarity(x, prob, lam, subdiff(x)) if status != "diverged" else float("inf")
    meta = {"model": "unconstrained", "penalty": label, "returned_iterate": "z",
            "lam": lam, "a": opts.a, "c": c, "delta": delta}
    return SolveResult(x, trace, inner, residual, status, None, iterates, meta)


def solve_unconstrained(prob, opts=SolveOptions(), cache=None):
    """DCA with ADMM inner solves for ``1/2||Ax - y||^2 + lam P_a(x)``, started at 0."""
    p = opts.penalty
    return _dca_unconstrained(
        prob, opts, p.slope_at_zero,
        lambda x: phi_grad(x, p),
        lambda x: penalty_sum(x, p),
        lambda x: tl1_subdifferential(x, p),
        cache, "tl1")


def _admm_constrained(cache, A, y, Aty, z_lin, slope, delta, x0, eps, max_iter):
    """ADMM for ``min slope ||x||_1 - <z_lin, x>  s.t.  A x = y``.

    ``cache`` must hold the factor for ``sigma = 1``. Multipliers start at 0.
    """
    M, N = A.shape
    x = x0.copy()
    w = x0.copy()
    u = np.zeros(N)
    v = np.zeros(M)
    thr = slope / delta
    converged = False
    j = 0
    for j in range(1, max_iter + 1):
        x_new = cache.solve(w + Aty + (z_lin - u - A.T @ v) / delta)
        w = shrink(x_new + u / delta, thr)
        u += delta * (x_new - w)
        Ax = A @ x_new
        v += delta * (Ax - y)
        gap = max(np.linalg.norm(x_new - x), np.linalg.norm(x_new - w), np.linalg.norm(A @ w - y))
        x = x_new
        if gap <= eps:
            converged = True
            break
    return x, w, u, v, j, converged


def _dca_constrained(prob, opts, slope, lin_grad, penalty_value, subdiff, cache, label):
    A, y = prob.A, prob.y
    N = A.shape[1]
    delta = opts.delta_value
    cache = _cache_for(A, 1.0, cache)
    Aty = A.T @ y
    deadline = _Deadline(opts.time_limit)
    x = np.zeros(N)
    trace, inner = [penalty_value(x)], []
    iterates = [x.copy()] if opts.record_iterates else None
    v = np.zeros(A.shape[0])
    status = "max-iterations"
    for _ in range(opts.max_outer):
        z_lin = lin_grad(x)
        _, w, _, v, j, _ = _admm_constrained(
            cache, A, y, Aty, z_lin, slope, delta, x, opts.eps_inner, opts.max_inner_value)
        inner.append(j)
        trace.append(penalty_value(w))
        if not (np.isfinite(trace[-1]) and np.all(np.isfinite(w))):
            x = w
            status = "diverged"
            break
        step = np.linalg.norm(w - x)
        x = w
        if iterates is not None:
            iterates.append(x.copy())
        if step <= opts.eps_outer:
            status = "converged"
            break
        if deadline.passed():
            status = "timeout"
            break
    ynorm = np.linalg.norm(y)
    gap = float(np.linalg.norm(A @ x - y) / (ynorm if ynorm > 0 else 1.0))
    # v approximates the multiplier of A x = y: 0 in dP(x) + A^T v at a KKT point
    residual = float(np.max(subdiff(x).distance(-(A.T @ v)))) if status != "diverged" else float("inf")
    meta = {"model": "constrained", "penalty": label, "returned_iterate": "w",
            "a": opts.a, "delta": delta}
    return SolveResult(x, trace, inner, residual, status, gap, iterates, meta)


def solve_constrained(prob, opts=None, cache=None):
    """DCA for ``min P_a(x) s.t. A x = y`` with a two-multiplier ADMM inner loop."""
    opts = SolveOptions(model="constrained") if opts is None else opts
    p = opts.penalty
    return _dca_constrained(
        prob, opts, p.slope_at_zero,
        lambda x: phi_grad(x, p),
        lambda x: penalty_sum(x, p),
        lambda x: tl1_subdifferential(x, p),
        cache, "tl1")


def _zero_grad(x):
    return np.zeros_like(x)


def _l1(x):
    return float(np.sum(np.abs(x)))


def solve_l1_baseline(prob, opts=SolveOptions(), cache=None):
    """The same pipeline with penalty ``||x||_1``: slope 1 and no linearised term.

    For the unconstrained model the outer loop reduces to warm-started
    restarts of one lasso ADMM (with a ``c ||x - x^n||^2`` proximal term);
    for the constrained model it is basis pursuit.
    """
    if opts.model == "unconstrained":
        return _dca_unconstrained(prob, opts, 1.0, _zero_grad, _l1, l1_subdifferential, cache, "l1")
    return _dca_constrained(prob, opts, 1.0, _zero_grad, _l1, l1_subdifferential, cache, "l1")


def solve(prob, opts=SolveOptions(), method="tl1"):
    """Dispatch on ``opts.model`` and ``method`` (``"tl1"`` or ``"l1"``)."""
    if method == "l1":
        return solve_l1_baseline(prob, opts)
    if method != "tl1":
        raise ValueError(f"unknown method {method!r}")
    if opts.model == "unconstrained":
        return solve_unconstrained(prob, opts)
    return solve_constrained(prob, opts)
