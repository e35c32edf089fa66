"""Gibbs risk, expected disagreement, joint error and the majority-vote risk.

Every quantity is an expectation over points, views and voters. Grouping
voters by their prediction at a point turns the voter-pair enumeration into
closed forms: with ``p`` the ``Q_v`` mass voting +1 at ``x^v`` and ``r`` the
mass voting wrong, a pair drawn from ``Q_v^2`` disagrees with probability
``2 p (1 - p)`` and errs jointly with probability ``r^2``. The results equal
the full enumeration exactly (the tests check this against loop oracles).

Two readings of the pair expectation are available:

``literal`` (default)
    ``(v, v') ~ rho^2`` and ``(h, h') ~ Q_v^2``, both voters evaluated at
    ``x^v``. The partner view ``v'`` drops out.
``cross``
    ``h ~ Q_v`` evaluated at ``x^v`` and ``h' ~ Q_{v'}`` evaluated at
    ``x^{v'}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._random import categorical_draws, stream
from .domains import FiniteDomain, PointSet, SampleSet
from .voters import PosteriorEnsemble, sign_with_tie

MODES = ("literal", "cross")
QUANTITIES = ("gibbs_risk", "mv_disagreement", "mv_joint_error", "majority_vote_risk")
# atoms x view pairs x voter pairs above which callers should switch to mc_estimate
ENUMERATION_CAP = 10 ** 7


@dataclass(frozen=True)
class RiskProfile:
    gibbs_risk: Optional[float]
    mv_disagreement: float
    mv_joint_error: Optional[float]
    majority_vote_risk: Optional[float]
    source: str
    target_disagreement: Optional[float] = None
    domain_disagreement: Optional[float] = None

    def __post_init__(self):
        for name in ("gibbs_risk", "mv_disagreement", "mv_joint_error", "majority_vote_risk",
                     "target_disagreement", "domain_disagreement"):
            x = getattr(self, name)
            if x is not None and not 0.0 <= x <= 1.0:
                raise ValueError(f"{name}={x} outside [0, 1]")


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")


def _clip01(x: float) -> float:
    return min(max(float(x), 0.0), 1.0)


def enumeration_size(E: PosteriorEnsemble, n_points: int) -> int:
    """Terms a naive enumeration of the pair quantities would visit."""
    V = E.n_views
    return n_points * V * V * sum(k * k for k in E.hypothesis_set.counts)


class _PointStats:
    """Per-view vote masses at every point of a point set."""

    def __init__(self, E: PosteriorEnsemble, points: PointSet):
        E.schema.check(points.schema)
        preds = E.hypothesis_set.predict_views(points.views)
        self.rho = E.rho.weights
        # plus[v, i] = Q_v mass voting +1 at x_i^v, minus its complement computed directly
        self.plus = np.stack([Q.weights @ (H == 1) for Q, H in zip(E.posteriors, preds)])
        self.minus = np.stack([Q.weights @ (H == -1) for Q, H in zip(E.posteriors, preds)])
        self.labels = points.labels
        if self.labels is not None:
            y = self.labels[None, :]
            self.wrong = np.where(y == 1, self.minus, self.plus)
        else:
            self.wrong = None

    def _need_labels(self, what: str) -> np.ndarray:
        if self.wrong is None:
            raise ValueError(f"{what} needs labeled points")
        return self.wrong

    def gibbs(self) -> np.ndarray:
        return self.rho @ self._need_labels("gibbs_risk")

    def disagreement(self, mode: str) -> np.ndarray:
        if mode == "literal":
            return self.rho @ (2.0 * self.plus * self.minus)
        pbar = self.rho @ self.plus
        mbar = self.rho @ self.minus
        return 2.0 * pbar * mbar

    def joint_error(self, mode: str) -> np.ndarray:
        wrong = self._need_labels("mv_joint_error")
        if mode == "literal":
            return self.rho @ (wrong * wrong)
        rbar = self.rho @ wrong
        return rbar * rbar

    def margin(self) -> np.ndarray:
        return self.rho @ (self.plus - self.minus)

    def mv_loss(self) -> np.ndarray:
        if self.labels is None:
            raise ValueError("majority_vote_risk needs labeled points")
        return (sign_with_tie(self.margin()) != self.labels).astype(float)


def pointwise(E: PosteriorEnsemble, points: PointSet, mode: str = "literal") -> dict:
    """Per-point values of every quantity; entries needing labels are omitted when absent.

    Any weighted average of these arrays is the corresponding risk under
    that weighting, which lets callers re-weight without re-predicting.
    """
    _check_mode(mode)
    st = _PointStats(E, points)
    out = {"mv_disagreement": st.disagreement(mode)}
    if st.labels is not None:
        out["gibbs_risk"] = st.gibbs()
        out["mv_joint_error"] = st.joint_error(mode)
        out["majority_vote_risk"] = st.mv_loss()
    return out


def gibbs_risk(E: PosteriorEnsemble, D: PointSet) -> float:
    return _clip01(D.weights @ _PointStats(E, D).gibbs())


def mv_disagreement(E: PosteriorEnsemble, M: PointSet, mode: str = "literal") -> float:
    _check_mode(mode)
    return _clip01(M.weights @ _PointStats(E, M).disagreement(mode))


def mv_joint_error(E: PosteriorEnsemble, D: PointSet, mode: str = "literal") -> float:
    _check_mode(mode)
    return _clip01(D.weights @ _PointStats(E, D).joint_error(mode))


def majority_vote_risk(E: PosteriorEnsemble, D: PointSet) -> float:
    return _clip01(D.weights @ _PointStats(E, D).mv_loss())


def view_gibbs_risks(E: PosteriorEnsemble, D: PointSet) -> np.ndarray:
    """``R(G_{Q_v})`` for every view."""
    st = _PointStats(E, D)
    return st._need_labels("view_gibbs_risks") @ D.weights


def view_disagreements(E: PosteriorEnsemble, M: PointSet) -> np.ndarray:
    """``d(Q_v)``: disagreement of a pair drawn from ``Q_v^2`` for every view."""
    st = _PointStats(E, M)
    return (2.0 * st.plus * st.minus) @ M.weights


def view_pair_disagreements(E: PosteriorEnsemble, M: PointSet, mode: str = "literal") -> np.ndarray:
    """``V x V`` matrix of the pair disagreement restricted to a view pair ``(v, v')``."""
    _check_mode(mode)
    st = _PointStats(E, M)
    if mode == "literal":
        d = (2.0 * st.plus * st.minus) @ M.weights
        return np.repeat(d[:, None], E.n_views, axis=1)
    a = (st.plus[:, None, :] * st.minus[None, :, :]) @ M.weights
    return a + a.T


def c_bound(gibbs: float, disagreement: float) -> float:
    """``1 - (1 - 2 g)^2 / (1 - 2 d)`` clamped to ``[0, 1]``; needs ``g, d < 1/2``."""
    if not 0.0 <= gibbs < 0.5:
        raise ValueError(f"c_bound needs 0 <= gibbs < 1/2, got {gibbs}")
    if not 0.0 <= disagreement < 0.5:
        raise ValueError(f"c_bound needs 0 <= disagreement < 1/2, got {disagreement}")
    return _clip01(1.0 - (1.0 - 2.0 * gibbs) ** 2 / (1.0 - 2.0 * disagreement))


def lambda_rho(E: PosteriorEnsemble, source: FiniteDomain, target: FiniteDomain,
               mode: str = "literal") -> float:
    source.schema.check(target.schema)
    return abs(mv_joint_error(E, target, mode) - mv_joint_error(E, source, mode))


def mv_domain_disagreement(E: PosteriorEnsemble, src: PointSet, tgt: PointSet,
                           mode: str = "literal") -> float:
    src.schema.check(tgt.schema)
    return abs(mv_disagreement(E, tgt, mode) - mv_disagreement(E, src, mode))


def exact_profile(E: PosteriorEnsemble, D: FiniteDomain, mode: str = "literal") -> RiskProfile:
    vals = {k: _clip01(D.weights @ v) for k, v in pointwise(E, D, mode).items()}
    return RiskProfile(vals.get("gibbs_risk"), vals["mv_disagreement"], vals.get("mv_joint_error"),
                       vals.get("majority_vote_risk"), "exact")


def empirical_profile(E: PosteriorEnsemble, S: SampleSet, T: SampleSet | None = None,
                      mode: str = "literal") -> RiskProfile:
    """Empirical quantities on ``S``; with ``T`` also the target disagreement and ``dis`` on ``(S_X, T_X)``."""
    vals = {k: _clip01(S.weights @ v) for k, v in pointwise(E, S, mode).items()}
    tag = f"empirical(m={S.n_points})"
    t_dis = dom = None
    if T is not None:
        S.schema.check(T.schema)
        t_dis = mv_disagreement(E, T, mode)
        dom = abs(t_dis - vals["mv_disagreement"])
        tag = f"empirical(m={S.n_points}, n={T.n_points})"
    return RiskProfile(vals.get("gibbs_risk"), vals["mv_disagreement"], vals.get("mv_joint_error"),
                       vals.get("majority_vote_risk"), tag, t_dis, dom)


def _eval_voters(E: PosteriorEnsemble, points: PointSet, idx: np.ndarray,
                 views: np.ndarray, voters: np.ndarray) -> np.ndarray:
    """Predictions of voter ``voters[j]`` of view ``views[j]`` at point ``idx[j]``."""
    out = np.empty(idx.size, dtype=np.int64)
    for v, (feat, thr, pol) in enumerate(E.hypothesis_set._arrays):
        sel = np.flatnonzero(views == v)
        if sel.size == 0:
            continue
        k = voters[sel]
        x = points.views[v][idx[sel], feat[k]]
        out[sel] = np.where(x >= thr[k], pol[k], -pol[k])
    return out


def _draw_voters(E: PosteriorEnsemble, views: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    out = np.empty(views.size, dtype=np.int64)
    for v, Q in enumerate(E.posteriors):
        sel = np.flatnonzero(views == v)
        out[sel] = categorical_draws(Q.weights, sel.size, rng)
    return out


def mc_estimate(quantity: str, E: PosteriorEnsemble, data: PointSet, n_draws: int, seed: int,
                mode: str = "literal") -> tuple[float, float]:
    """Monte Carlo estimate of a quantity and its standard error.

    Each draw picks a point by its weight, then ``v ~ rho`` and ``h ~ Q_v``
    (plus ``v'`` and ``h'`` for the pair quantities), and records the loss.
    """
    if quantity not in QUANTITIES:
        raise ValueError(f"unknown quantity {quantity!r}; expected one of {QUANTITIES}")
    _check_mode(mode)
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    E.schema.check(data.schema)
    needs_labels = quantity != "mv_disagreement"
    if needs_labels and data.labels is None:
        raise ValueError(f"{quantity} needs labeled points")
    rng = stream(seed, 2)
    idx = categorical_draws(data.weights, n_draws, rng)
    if quantity == "majority_vote_risk":
        st = _PointStats(E, data)
        losses = st.mv_loss()[idx]
    else:
        v = categorical_draws(E.rho.weights, n_draws, rng)
        h = _draw_voters(E, v, rng)
        a = _eval_voters(E, data, idx, v, h)
        if quantity == "gibbs_risk":
            losses = (a != data.labels[idx]).astype(float)
        else:
            v2 = categorical_draws(E.rho.weights, n_draws, rng)
            # literal: the partner voter comes from Q_v and is evaluated at x^v
            pv = v if mode == "literal" else v2
            h2 = _draw_voters(E, pv, rng)
            b = _eval_voters(E, data, idx, pv, h2)
            if quantity == "mv_disagreement":
                losses = (a != b).astype(float)
            else:
                y = data.labels[idx]
                losses = ((a != y) & (b != y)).astype(float)
    est = float(losses.mean())
    se = float(losses.std(ddof=1) / np.sqrt(n_draws)) if n_draws > 1 else 0.0
    return est, se


__all__ = [
    "MODES", "QUANTITIES", "ENUMERATION_CAP", "RiskProfile", "enumeration_size", "pointwise",
    "gibbs_risk", "mv_disagreement", "mv_joint_error", "majority_vote_risk", "view_gibbs_risks",
    "view_disagreements", "view_pair_disagreements", "c_bound", "lambda_rho",
    "mv_domain_disagreement", "exact_profile", "empirical_profile", "mc_estimate",
]
