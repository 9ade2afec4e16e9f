"""Recovery-theory diagnostics.

RIP constants by subset enumeration or sampling, the critical penalty
parameter ``a*`` for exact recovery, rescaling of observations so that the
penalty of a feasible point is at most 1, a checker for the sufficient
local-minimizer conditions of the unconstrained model, and an exhaustive
l0 oracle for small instances.
"""

from dataclasses import dataclass
from itertools import combinations
from math import comb
from typing import Optional

import numpy as np
import scipy.optimize

from .penalty import PenaltyParams, local_concavity, rho_prime
from .sensing import Problem, make_rng
from .solver import SolveOptions

__all__ = [
    "RipEstimate",
    "Condition2Report",
    "NoSparseSolution",
    "estimate_rip",
    "rip_condition_holds",
    "recovery_margin",
    "critical_a",
    "critical_a_bisect",
    "scale_constant",
    "scale_problem",
    "check_condition2",
    "brute_force_l0",
    "numerical_support",
    "support_min_singular_value",
]

EXHAUSTIVE_LIMIT = 100_000
SUPPORT_TOL = 1e-6


class NoSparseSolution(ValueError):
    """No exact solution with at most ``k_max`` nonzeros exists."""


@dataclass(frozen=True)
class RipEstimate:
    """Lower bound on the ``s``-restricted isometry constant (exact when exhaustive)."""

    s: int
    delta_lower: float
    samples: int
    exhaustive: bool

    CSV_HEADER = "s,delta_lower,samples,exhaustive"

    def csv_row(self):
        return f"{self.s},{self.delta_lower:.17g},{self.samples},{int(self.exhaustive)}"

    def to_text(self):
        return (f"s: {self.s}\ndelta_lower: {self.delta_lower:.17g}\n"
                f"samples: {self.samples}\nexhaustive: {str(self.exhaustive).lower()}\n")


def _rip_of_supports(G, supports):
    """``max(lmax - 1, 1 - lmin)`` of ``G[T, T]`` over a batch of supports."""
    sub = G[supports[:, :, None], supports[:, None, :]]
    ev = np.linalg.eigvalsh(sub)
    return float(np.max(np.maximum(ev[:, -1] - 1.0, 1.0 - ev[:, 0])))


def estimate_rip(A, s, samples=1000, seed=0, batch=4096):
    """Estimate ``delta_s`` of ``A``.

    All ``C(N, s)`` supports are enumerated when there are at most
    ``EXHAUSTIVE_LIMIT`` of them; otherwise ``samples`` uniformly random
    supports are drawn. The returned value never exceeds the true constant.
    """
    A = np.asarray(A, dtype=float)
    N = A.shape[1]
    if s < 0 or s > N:
        raise ValueError(f"subset size s={s} outside [0, N={N}]")
    if s == 0:
        return RipEstimate(0, 0.0, 1, True)
    G = A.T @ A
    total = comb(N, s)
    delta = 0.0
    if total <= EXHAUSTIVE_LIMIT:
        it = combinations(range(N), s)
        while True:
            chunk = np.array([c for _, c in zip(range(batch), it)], dtype=np.int64)
            if chunk.size == 0:
                break
            delta = max(delta, _rip_of_supports(G, chunk))
        return RipEstimate(s, delta, total, True)
    rng = make_rng(seed)
    done = 0
    while done < samples:
        n = min(batch, samples - done)
        chunk = np.array([np.sort(rng.choice(N, s, replace=False)) for _ in range(n)], dtype=np.int64)
        delta = max(delta, _rip_of_supports(G, chunk))
        done += n
    return RipEstimate(s, delta, samples, False)


def rip_condition_holds(delta_R, delta_RT, R, T_size):
    """``delta_R + R/|T| delta_{R+|T|} < R/|T| - 1``."""
    ratio = R / T_size
    return delta_R + ratio * delta_RT < ratio - 1.0


def recovery_margin(a, delta_R, delta_RT, R, T_size):
    """``a^2/(a+1)^2 R/|T| (1 - delta_{R+|T|}) - 1 - delta_R``; increasing in ``a``."""
    return (a / (a + 1.0)) ** 2 * (R / T_size) * (1.0 - delta_RT) - 1.0 - delta_R


def _check_critical_inputs(delta_R, delta_RT, R, T_size):
    if not (0.0 <= delta_R <= 1.0 and 0.0 <= delta_RT <= 1.0):
        raise ValueError("isometry constants must lie in [0, 1]")
    if T_size < 1 or R <= T_size:
        raise ValueError(f"need R > |T| >= 1, got R={R}, |T|={T_size}")
    if delta_RT >= 1.0:
        raise ValueError("delta_{R+|T|} = 1 makes the recovery margin degenerate")


def critical_a(delta_R, delta_RT, R, T_size):
    """Root ``a*`` of :func:`recovery_margin`, or ``None`` when no finite root exists.

    Closed form: with ``t = sqrt((1 + delta_R)|T| / (R (1 - delta_{R+|T|})))``,
    ``a* = t / (1 - t)`` provided ``t < 1``.
    """
    _check_critical_inputs(delta_R, delta_RT, R, T_size)
    t = np.sqrt((1.0 + delta_R) * T_size / (R * (1.0 - delta_RT)))
    if t >= 1.0:
        return None
    return float(t / (1.0 - t))


def critical_a_bisect(delta_R, delta_RT, R, T_size, xtol=1e-12):
    """Same root found numerically (bracketing on ``[0, hi]``)."""
    _check_critical_inputs(delta_R, delta_RT, R, T_size)
    f = lambda a: recovery_margin(a, delta_R, delta_RT, R, T_size)  # noqa: E731
    if not rip_condition_holds(delta_R, delta_RT, R, T_size):
        return None
    hi = 1.0
    while f(hi) <= 0:
        hi *= 2.0
        if hi > 1e300:
            return None
    return float(scipy.optimize.brentq(f, 0.0, hi, xtol=xtol, rtol=4 * np.finfo(float).eps))


def scale_constant(x_inf, T_size, a):
    """Smallest ``C`` with ``|T| rho_a(x_inf / C) <= 1``: ``x_inf (a|T| + |T| - 1) / a``."""
    return float(x_inf * (a * T_size + T_size - 1) / a)


def scale_problem(prob, T_size, a=1.0, x_inf=None):
    """Divide the observation (and truth) by ``C`` so that ``P_a(x / C) <= 1``.

    ``x_inf`` defaults to ``||x*||_inf`` when the problem carries its truth and
    otherwise to the max-norm of the minimum-norm least-squares solution.
    Returns ``(scaled_problem, C)``.
    """
    if x_inf is None:
        if prob.x_true is not None:
            x_inf = float(np.max(np.abs(prob.x_true))) if prob.x_true.size else 0.0
        else:
            x_inf = float(np.max(np.abs(np.linalg.lstsq(prob.A, prob.y, rcond=None)[0])))
    C = scale_constant(x_inf, T_size, a)
    if C <= 0:
        return Problem(prob.A, prob.y.copy(), prob.x_true, prob.support, dict(prob.meta)), 1.0
    x = None if prob.x_true is None else prob.x_true / C
    meta = dict(prob.meta, scale=C)
    return Problem(prob.A, prob.y / C, x, prob.support, meta), C


def numerical_support(x, tol=SUPPORT_TOL):
    return np.flatnonzero(np.abs(np.asarray(x)) > tol)


def support_min_singular_value(A, x, tol=SUPPORT_TOL):
    """Smallest singular value of ``A`` restricted to the numerical support of ``x``."""
    T = numerical_support(x, tol)
    if T.size == 0:
        return float("inf")
    return float(np.linalg.svd(A[:, T], compute_uv=False)[-1])


@dataclass(frozen=True)
class Condition2Report:
    support: tuple
    q_nonsingular: bool
    sigma_min: float
    dual_bound: float
    dual_limit: float
    stationarity_gap: float
    eigen_margin: Optional[float]
    verdict: str

    CSV_HEADER = ("support_size,q_nonsingular,sigma_min,dual_bound,dual_limit,"
                  "stationarity_gap,eigen_margin,verdict")

    @property
    def dual_ok(self):
        return self.dual_bound < self.dual_limit

    def csv_row(self):
        em = "" if self.eigen_margin is None else f"{self.eigen_margin:.17g}"
        return (f"{len(self.support)},{int(self.q_nonsingular)},{self.sigma_min:.17g},"
                f"{self.dual_bound:.17g},{self.dual_limit:.17g},{self.stationarity_gap:.17g},"
                f"{em},{self.verdict}")

    def to_text(self):
        em = "n/a" if self.eigen_margin is None else f"{self.eigen_margin:.6g}"
        return "\n".join([
            f"support_size: {len(self.support)}",
            f"q_nonsingular: {str(self.q_nonsingular).lower()} (sigma_min = {self.sigma_min:.6g})",
            f"dual_bound: {self.dual_bound:.6g} (limit {self.dual_limit:.6g})",
            f"stationarity_gap: {self.stationarity_gap:.6g}",
            f"eigen_margin: {em}",
            f"verdict: {self.verdict}",
        ]) + "\n"


def check_condition2(beta, prob, opts=SolveOptions(), support_tol=SUPPORT_TOL,
                     stationarity_tol=1e-4, rank_tol=1e-10):
    """Evaluate the four sufficient conditions for ``beta`` to be a local minimizer.

    (i) ``A_T`` has full column rank; (ii) ``||A_{T^c}^T (y - A beta)||_inf / lam
    < (a+1)/a``; (iii) ``beta_T`` solves the stationarity equation on ``T``;
    (iv) ``lambda_min(A_T^T A_T) >= lam * local_concavity(beta_T)``.
    """
    A, y = prob.A, prob.y
    beta = np.asarray(beta, dtype=float)
    p = opts.penalty
    lam = opts.lam
    T = numerical_support(beta, support_tol)
    mask = np.zeros(beta.size, dtype=bool)
    mask[T] = True
    bT = beta[T]

    resid = y - A @ beta
    z = A.T @ resid / lam
    dual_bound = float(np.max(np.abs(z[~mask]))) if (~mask).any() else 0.0
    dual_limit = p.slope_at_zero

    if T.size == 0:
        sigma_min, gap, margin, nonsingular = float("inf"), 0.0, None, True
    else:
        AT = A[:, T]
        sigma_min = float(np.linalg.svd(AT, compute_uv=False)[-1])
        nonsingular = sigma_min > rank_tol
        Q = AT.T @ AT
        w = np.sign(bT) * rho_prime(np.abs(bT), p)
        gap = float(np.max(np.abs(Q @ bT - AT.T @ y + lam * w)))
        margin = float(np.linalg.eigvalsh(Q)[0] - lam * local_concavity(bT, p))

    failed = []
    if not nonsingular:
        failed.append("i")
    if not dual_bound < dual_limit:
        failed.append("ii")
    if not gap <= stationarity_tol:
        failed.append("iii")
    if margin is not None and margin < 0:
        failed.append("iv")
    if failed:
        verdict = f"fails({','.join(failed)})"
    elif margin is not None and margin > 0:
        verdict = "strict-local-min"
    else:
        verdict = "local-min"
    return Condition2Report(tuple(int(t) for t in T), nonsingular, sigma_min, dual_bound,
                            dual_limit, gap, margin, verdict)


def brute_force_l0(prob, k_max=4, tol=1e-9):
    """Sparsest exact solution of ``A x = y`` by enumerating supports of growing size.

    Limited to ``N <= 20`` and ``k_max <= 4``. A support is accepted when the
    least-squares residual is at most ``tol * max(1, ||y||)``; among accepted
    supports of the minimal size the smallest residual wins.
    """
    A, y = prob.A, prob.y
    N = A.shape[1]
    if N > 20 or k_max > 4:
        raise ValueError(f"brute-force l0 budget exceeded (N={N} > 20 or k_max={k_max} > 4)")
    bound = tol * max(1.0, float(np.linalg.norm(y)))
    if np.linalg.norm(y) <= bound:
        return np.zeros(N)
    for s in range(1, k_max + 1):
        best, best_res = None, np.inf
        for T in combinations(range(N), s):
            AT = A[:, T]
            coef = np.linalg.lstsq(AT, y, rcond=None)[0]
            res = float(np.linalg.norm(AT @ coef - y))
            if res <= bound and res < best_res:
                best, best_res = (T, coef), res
        if best is not None:
            x = np.zeros(N)
            x[list(best[0])] = best[1]
            return x
    raise NoSparseSolution(f"no exact solution with at most {k_max} nonzeros")
