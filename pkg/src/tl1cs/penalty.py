"""Transformed-l1 penalty, its DC pieces, subdifferential and soft thresholding.

The scalar penalty is ``rho(t) = (a + 1)|t| / (a + |t|)``. It is split as
``rho(t) = (a + 1)/a |t| - phi(t)`` where ``phi`` is convex and smooth; the
solvers only ever linearise ``phi``.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PenaltyParams",
    "SubgradientSet",
    "rho",
    "rho_prime",
    "penalty_sum",
    "phi",
    "phi_grad",
    "shrink",
    "tl1_subdifferential",
    "local_concavity",
    "max_concavity",
]


@dataclass(frozen=True)
class PenaltyParams:
    """Shape parameter ``a`` of the penalty (``a -> 0`` is l0, ``a -> inf`` is l1)."""

    a: float = 1.0

    def __post_init__(self):
        a = float(self.a)
        if not np.isfinite(a) or a <= 0:
            raise ValueError(f"penalty parameter a must be a positive finite number, got {self.a!r}")
        object.__setattr__(self, "a", a)

    @property
    def slope_at_zero(self):
        """``rho'(0+) = (a + 1) / a``, also the l1 weight in the DC split."""
        return (self.a + 1.0) / self.a

    @property
    def max_concavity(self):
        """Global maximum concavity ``2 (a + 1) / a**2``."""
        return 2.0 * (self.a + 1.0) / self.a ** 2


def _params(p):
    if isinstance(p, PenaltyParams):
        return p
    return PenaltyParams(p)


def _finite(x, name="x"):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} must be finite")
    return x


def rho(t, p=PenaltyParams()):
    """Pointwise penalty; works elementwise on arrays."""
    a = _params(p).a
    t = np.abs(_finite(t, "t"))
    out = (a + 1.0) * t / (a + t)
    return out if out.ndim else float(out)


def rho_prime(t, p=PenaltyParams()):
    """Derivative ``a (a + 1) / (a + t)**2`` of the penalty on ``t >= 0``."""
    a = _params(p).a
    t = _finite(t, "t")
    if np.any(t < 0):
        raise ValueError("rho_prime is defined for t >= 0 only")
    out = a * (a + 1.0) / (a + t) ** 2
    return out if out.ndim else float(out)


def penalty_sum(x, p=PenaltyParams()):
    """``P_a(x) = sum_i rho(x_i)``."""
    return float(np.sum(rho(np.atleast_1d(x), p)))


def phi(x, p=PenaltyParams()):
    """Smooth convex part ``(a + 1)/a ||x||_1 - P_a(x)``."""
    a = _params(p).a
    t = np.abs(_finite(np.atleast_1d(x)))
    return float(np.sum((a + 1.0) * t ** 2 / (a * (a + t))))


def phi_grad(x, p=PenaltyParams()):
    """Gradient of :func:`phi`; exactly zero at zero coordinates."""
    a = _params(p).a
    x = _finite(np.atleast_1d(x))
    t = np.abs(x)
    return np.sign(x) * (a + 1.0) * t * (t + 2.0 * a) / (a * (a + t) ** 2)


def shrink(x, r):
    """Soft thresholding ``sgn(x) max(|x| - r, 0)``."""
    if r < 0:
        raise ValueError(f"shrink threshold must be nonnegative, got {r}")
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - r, 0.0)


@dataclass(frozen=True)
class SubgradientSet:
    """A box ``[lower_i, upper_i]`` per coordinate.

    Singleton coordinates have ``lower == upper``. Intervals are kept as
    exact bounds so membership is decided without sampling.
    """

    lower: np.ndarray
    upper: np.ndarray

    @property
    def singleton(self):
        return self.lower == self.upper

    def scaled(self, c):
        """The set ``c * S`` for a scalar ``c``."""
        lo, hi = c * self.lower, c * self.upper
        return SubgradientSet(np.minimum(lo, hi), np.maximum(lo, hi))

    def distance(self, g):
        """Per-coordinate distance from ``g`` to the set."""
        g = np.asarray(g, dtype=float)
        return np.maximum(np.maximum(self.lower - g, g - self.upper), 0.0)

    def contains(self, g, atol=0.0):
        return bool(np.all(self.distance(g) <= atol))


def tl1_subdifferential(x, p=PenaltyParams()):
    """Generalised derivative ``(a + 1)/a d||x||_1 - grad phi(x)`` of ``P_a``."""
    p = _params(p)
    x = _finite(np.atleast_1d(x))
    t = np.abs(x)
    val = np.sign(x) * p.a * (p.a + 1.0) / (p.a + t) ** 2
    zero = x == 0
    s = p.slope_at_zero
    lower = np.where(zero, -s, val)
    upper = np.where(zero, s, val)
    return SubgradientSet(lower, upper)


def max_concavity(p=PenaltyParams()):
    return _params(p).max_concavity


def local_concavity(b, p=PenaltyParams()):
    """Local concavity ``max_j 2a(a+1)/(a+|b_j|)**3`` at a vector with no zeros."""
    a = _params(p).a
    b = _finite(np.atleast_1d(b), "b")
    if b.size == 0:
        raise ValueError("local concavity needs at least one coordinate")
    if np.any(b == 0):
        raise ValueError("local concavity is defined only at vectors with all entries nonzero")
    return float(np.max(2.0 * a * (a + 1.0) / (a + np.abs(b)) ** 3))
