"""Finite distributions and the divergences used by the bounds.

All divergences follow the ``0 * ln(0 / x) = 0`` convention and return
``inf`` when absolute continuity fails, so that a vacuous bound can be
propagated instead of raised (the Rényi divergence is the exception and
refuses such inputs).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

SIMPLEX_TOL = 1e-12
KL_INV_MAX_ITER = 200
_BELOW_ONE = float(np.nextafter(1.0, 0.0))
_ABOVE_ZERO = float(np.nextafter(0.0, 1.0))


@dataclass(frozen=True, eq=False)
class Categorical:
    """Probability vector over ``range(support_size)``.

    Weights are validated, never renormalized: a vector that does not sum
    to one within ``SIMPLEX_TOL`` is a construction bug.
    """

    weights: np.ndarray

    def __init__(self, weights: Sequence[float] | np.ndarray):
        w = np.array(weights, dtype=float).reshape(-1)
        if w.size < 1:
            raise ValueError("Categorical needs at least one weight")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError(f"weights must be finite and nonnegative, got {w}")
        total = math.fsum(w)
        if abs(total - 1.0) > SIMPLEX_TOL:
            raise ValueError(f"weights sum to {total!r}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, size: int) -> "Categorical":
        if size < 1:
            raise ValueError("support size must be >= 1")
        return cls(np.full(size, 1.0 / size))

    @classmethod
    def point_mass(cls, size: int, index: int) -> "Categorical":
        w = np.zeros(size)
        w[index] = 1.0
        return cls(w)

    @property
    def support_size(self) -> int:
        return self.weights.size

    def __len__(self) -> int:
        return self.weights.size

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Categorical):
            return NotImplemented
        return np.array_equal(self.weights, other.weights)

    def __hash__(self) -> int:
        return hash(self.weights.tobytes())

    def __repr__(self) -> str:
        return f"Categorical({self.weights.tolist()})"


def _as_weights(dist: Categorical | Sequence[float] | np.ndarray) -> np.ndarray:
    if isinstance(dist, Categorical):
        return dist.weights
    return Categorical(dist).weights


def _check_probability(x: float, name: str) -> float:
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {x}")
    return x


def _x_minus_log1p(x: float) -> float:
    """``x - ln(1 + x)`` without cancellation for small ``x``."""
    if abs(x) < 1e-3:
        # alternating series x^2/2 - x^3/3 + ...; truncation error below x^10
        return sum((-1) ** k * x ** k / k for k in range(2, 10))
    return x - math.log1p(x)


def kl_bernoulli(q: float, p: float) -> float:
    """``kl(q || p)`` between Bernoulli(q) and Bernoulli(p)."""
    q = _check_probability(q, "q")
    p = _check_probability(p, "p")
    if q == p:
        return 0.0
    if (p == 0.0 and q > 0.0) or (p == 1.0 and q < 1.0):
        return math.inf
    if 0.0 < q < 1.0:
        u = (p - q) / q
        w = (q - p) / (1.0 - q)
        if abs(u) < 0.5 and abs(w) < 0.5:
            # near p = q the two log terms cancel to first order; writing kl as
            # q f(u) + (1-q) f(w) with f(x) = x - ln(1+x) >= 0 keeps every digit
            return q * _x_minus_log1p(u) + (1.0 - q) * _x_minus_log1p(w)
    out = 0.0
    if q > 0.0:
        out += q * (math.log(q) - math.log(p))
    if q < 1.0:
        # log1p keeps the tail term accurate when p or q is tiny
        out += (1.0 - q) * (math.log1p(-q) - math.log1p(-p))
    # rounding can leave a tiny negative value when q and p are adjacent floats
    return max(out, 0.0)


def kl_categorical(Q: Categorical, P: Categorical) -> float:
    """``KL(Q || P) = sum_i Q_i ln(Q_i / P_i)``."""
    q = _as_weights(Q)
    p = _as_weights(P)
    if q.size != p.size:
        raise ValueError(f"support size mismatch: {q.size} vs {p.size}")
    mask = q > 0
    if np.any(p[mask] == 0):
        return math.inf
    terms = q[mask] * np.log(q[mask] / p[mask])
    return max(math.fsum(terms), 0.0)


def renyi_divergence(Q: Categorical, P: Categorical, alpha: float) -> float:
    """Rényi divergence of order ``alpha > 1``.

    ``D_alpha(Q || P) = ln(E_{h~P}[(Q(h)/P(h))^alpha]) / (alpha - 1)``.
    """
    if not alpha > 1.0:
        raise ValueError(f"alpha must be > 1, got {alpha}")
    q = _as_weights(Q)
    p = _as_weights(P)
    if q.size != p.size:
        raise ValueError(f"support size mismatch: {q.size} vs {p.size}")
    if np.array_equal(q, p):
        return 0.0
    if np.any((q > 0) & (p == 0)):
        raise ValueError("Q is not absolutely continuous with respect to P")
    mask = p > 0
    # sum_i P_i (Q_i/P_i)^alpha, in log space for stability
    with np.errstate(divide="ignore"):
        log_terms = alpha * np.log(q[mask]) + (1.0 - alpha) * np.log(p[mask])
    log_moment = np.logaddexp.reduce(log_terms)
    return max(float(log_moment) / (alpha - 1.0), 0.0)


def pair_product(Q: Categorical) -> Categorical:
    """Product distribution ``Q x Q`` over ordered pairs, row-major."""
    q = _as_weights(Q)
    outer = np.outer(q, q).reshape(-1)
    # outer products of a valid simplex vector sum to 1 up to ~n ulps
    return Categorical(outer)


def kl_inverse_upper(q: float, eps: float) -> float:
    """Largest ``p`` in ``[q, 1]`` with ``kl(q || p) <= eps``."""
    q = _check_probability(q, "q")
    if eps < 0:
        raise ValueError(f"eps must be nonnegative, got {eps}")
    # the budget reaches the last float below 1: nothing short of 1 is excluded
    if kl_bernoulli(q, _BELOW_ONE) <= eps:
        return 1.0
    if eps == 0.0:
        return q
    lo, hi = q, 1.0
    return _bisect(q, eps, lo, hi, feasible_low=True)


def kl_inverse_lower(q: float, eps: float) -> float:
    """Smallest ``p`` in ``[0, q]`` with ``kl(q || p) <= eps``."""
    q = _check_probability(q, "q")
    if eps < 0:
        raise ValueError(f"eps must be nonnegative, got {eps}")
    if q == 0.0 or kl_bernoulli(q, _ABOVE_ZERO) <= eps:
        return 0.0
    if eps == 0.0:
        return q
    lo, hi = 0.0, q
    return _bisect(q, eps, lo, hi, feasible_low=False)


def _bisect(q: float, eps: float, lo: float, hi: float, feasible_low: bool) -> float:
    # Invariant: the feasible end of [lo, hi] satisfies kl <= eps, the other
    # end does not. Bisect down to float resolution (well below 1e-12 on p,
    # bounded by KL_INV_MAX_ITER) so the kl residual stays small near 0 or 1.
    for _ in range(KL_INV_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        inside = kl_bernoulli(q, mid) <= eps
        if inside == feasible_low:
            lo = mid
        else:
            hi = mid
    return lo if feasible_low else hi


def expected_kl(posteriors: Sequence[Categorical], priors: Sequence[Categorical],
                rho: Categorical) -> float:
    """``E_{v~rho} KL(Q_v || P_v)``; views with zero weight contribute nothing."""
    r = _as_weights(rho)
    if not len(posteriors) == len(priors) == r.size:
        raise ValueError("posteriors, priors and rho disagree on the number of views")
    total = 0.0
    for weight, Qv, Pv in zip(r, posteriors, priors):
        if weight == 0:
            continue
        total += weight * kl_categorical(Qv, Pv)
    return total
