"""View-specific decision stumps and the weighted multi-view ensemble."""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from . import _jsonfmt
from .domains import MultiViewPoint, PointSet, Schema, SchemaMismatchError
from .measures import Categorical, expected_kl, kl_categorical


@dataclass(frozen=True)
class Voter:
    """Decision stump on one feature of one view.

    Predicts ``polarity`` when the feature is ``>= threshold`` and
    ``-polarity`` otherwise. A threshold of ``-inf`` gives a constant voter.
    """

    view: int
    feature: int
    threshold: float
    polarity: int

    def __post_init__(self):
        if self.polarity not in (-1, 1):
            raise ValueError(f"polarity must be +1 or -1, got {self.polarity}")
        if self.view < 0 or self.feature < 0:
            raise ValueError("negative view or feature index")


def voter_predict(h: Voter, x: MultiViewPoint) -> int:
    if not 0 <= h.view < len(x.views) or not 0 <= h.feature < x.views[h.view].size:
        raise IndexError(f"voter {h} out of bounds for point with schema {x.schema}")
    return h.polarity if x.views[h.view][h.feature] >= h.threshold else -h.polarity


class ViewHypothesisSet:
    """Per-view tuples of voters, with vectorized prediction."""

    def __init__(self, schema: Schema, voters: Sequence[Sequence[Voter]]):
        if len(voters) != schema.n_views:
            raise SchemaMismatchError(f"{len(voters)} voter groups for {schema.n_views} views")
        groups = []
        for v, group in enumerate(voters):
            group = tuple(group)
            if not group:
                raise ValueError(f"view {v} has no voters")
            for h in group:
                if h.view != v:
                    raise ValueError(f"voter {h} stored under view {v}")
                if h.feature >= schema.dims[v]:
                    raise IndexError(f"voter {h} out of bounds for view dimension {schema.dims[v]}")
            groups.append(group)
        self.schema = schema
        self.voters: tuple[tuple[Voter, ...], ...] = tuple(groups)

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(len(g) for g in self.voters)

    @cached_property
    def _arrays(self):
        out = []
        for group in self.voters:
            out.append((np.array([h.feature for h in group], dtype=np.int64),
                        np.array([h.threshold for h in group], dtype=float),
                        np.array([h.polarity for h in group], dtype=np.int8)))
        return out

    def predict_views(self, views: Sequence[np.ndarray]) -> list[np.ndarray]:
        """``(K_v, n)`` arrays of ``+-1`` predictions, one per view."""
        if len(views) != self.schema.n_views:
            raise SchemaMismatchError(f"expected {self.schema.n_views} views, got {len(views)}")
        out = []
        for v, (X, (feat, thr, pol)) in enumerate(zip(views, self._arrays)):
            X = np.asarray(X, dtype=float)
            if X.ndim != 2 or X.shape[1] != self.schema.dims[v]:
                raise SchemaMismatchError(
                    f"view {v}: expected {self.schema.dims[v]} features, got shape {X.shape}")
            above = X[:, feat].T >= thr[:, None]
            out.append(np.where(above, pol[:, None], -pol[:, None]).astype(np.int8))
        return out

    def predict(self, points: PointSet) -> list[np.ndarray]:
        self.schema.check(points.schema)
        return self.predict_views(points.views)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ViewHypothesisSet):
            return NotImplemented
        return self.schema == other.schema and self.voters == other.voters

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"ViewHypothesisSet(schema={self.schema}, counts={self.counts})"


def _midpoint_thresholds(values: np.ndarray, cap: int) -> np.ndarray:
    distinct = np.unique(values)
    if distinct.size == 1:
        return np.array([-np.inf])
    mids = 0.5 * (distinct[:-1] + distinct[1:])
    if mids.size <= cap:
        return mids
    # cap thresholds, one at the center of each of `cap` equal index blocks
    picks = ((2 * np.arange(cap) + 1) * mids.size) // (2 * cap)
    return mids[picks]


def build_stump_grid(data: PointSet, per_view_thresholds: int) -> ViewHypothesisSet:
    """Stumps at midpoints between distinct observed values, both polarities.

    At most ``per_view_thresholds`` thresholds per feature. A feature with a
    single observed value yields the two constant voters.
    """
    if per_view_thresholds < 1:
        raise ValueError("per_view_thresholds must be >= 1")
    if data.n_points < 1:
        raise ValueError("cannot build stumps from empty input")
    groups = []
    for v, X in enumerate(data.views):
        group = []
        for f in range(X.shape[1]):
            for t in _midpoint_thresholds(X[:, f], per_view_thresholds):
                group.append(Voter(v, f, float(t), 1))
                group.append(Voter(v, f, float(t), -1))
        groups.append(group)
    return ViewHypothesisSet(data.schema, groups)


class PosteriorEnsemble:
    """Voters with posteriors ``Q_v``, hyper-posterior ``rho`` and their priors."""

    def __init__(self, hypothesis_set: ViewHypothesisSet, posteriors: Sequence[Categorical],
                 rho: Categorical, priors: Sequence[Categorical] | None = None,
                 pi: Categorical | None = None):
        counts = hypothesis_set.counts
        V = len(counts)
        posteriors = tuple(_categorical(q) for q in posteriors)
        rho = _categorical(rho)
        priors = (tuple(Categorical.uniform(k) for k in counts) if priors is None
                  else tuple(_categorical(p) for p in priors))
        pi = Categorical.uniform(V) if pi is None else _categorical(pi)
        if len(posteriors) != V or len(priors) != V:
            raise ValueError(f"expected {V} posteriors and priors")
        for v, k in enumerate(counts):
            if posteriors[v].support_size != k or priors[v].support_size != k:
                raise ValueError(f"view {v}: weights do not match its {k} voters")
        if rho.support_size != V or pi.support_size != V:
            raise ValueError(f"rho and pi must be over {V} views")
        self.hypothesis_set = hypothesis_set
        self.posteriors = posteriors
        self.rho = rho
        self.priors = priors
        self.pi = pi

    @property
    def schema(self) -> Schema:
        return self.hypothesis_set.schema

    @property
    def n_views(self) -> int:
        return self.schema.n_views

    def kl_posterior(self) -> float:
        """``E_{v~rho} KL(Q_v || P_v)``."""
        return expected_kl(self.posteriors, self.priors, self.rho)

    def kl_hyper(self) -> float:
        """``KL(rho || pi)``."""
        return kl_categorical(self.rho, self.pi)

    def with_weights(self, posteriors: Sequence[Categorical], rho: Categorical) -> "PosteriorEnsemble":
        return PosteriorEnsemble(self.hypothesis_set, posteriors, rho, self.priors, self.pi)

    def negated(self) -> "PosteriorEnsemble":
        """Same weights with every voter's polarity flipped."""
        flipped = [[Voter(h.view, h.feature, h.threshold, -h.polarity) for h in g]
                   for g in self.hypothesis_set.voters]
        hset = ViewHypothesisSet(self.schema, flipped)
        return PosteriorEnsemble(hset, self.posteriors, self.rho, self.priors, self.pi)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PosteriorEnsemble):
            return NotImplemented
        return (self.hypothesis_set == other.hypothesis_set and self.posteriors == other.posteriors
                and self.rho == other.rho and self.priors == other.priors and self.pi == other.pi)

    __hash__ = None  # type: ignore[assignment]


def _categorical(x) -> Categorical:
    return x if isinstance(x, Categorical) else Categorical(x)


def uniform_ensemble(hypothesis_set: ViewHypothesisSet) -> PosteriorEnsemble:
    posteriors = [Categorical.uniform(k) for k in hypothesis_set.counts]
    return PosteriorEnsemble(hypothesis_set, posteriors, Categorical.uniform(len(posteriors)))


def gibbs_posterior_ensemble(hypothesis_set: ViewHypothesisSet, data: PointSet,
                             temperature: float, priors: Sequence[Categorical] | None = None,
                             pi: Categorical | None = None) -> PosteriorEnsemble:
    """Posteriors ``Q_v(h) ~ P_v(h) exp(-temperature * R(h))`` with ``rho = pi``.

    ``R(h)`` is the weighted 0-1 risk of each voter on the labeled ``data``
    (exact for a domain, empirical for a sample).
    """
    if not data.labeled:
        raise ValueError("a Gibbs posterior needs labeled data")
    preds = hypothesis_set.predict(data)
    template = uniform_ensemble(hypothesis_set)
    priors = template.priors if priors is None else tuple(_categorical(p) for p in priors)
    pi = template.pi if pi is None else _categorical(pi)
    posteriors = []
    for P_v, H in zip(priors, preds):
        risk = (H != data.labels[None, :]).astype(float) @ data.weights
        with np.errstate(divide="ignore"):
            logw = np.log(P_v.weights) - temperature * risk
        logw -= logw.max()
        w = np.exp(logw)
        posteriors.append(Categorical(w / w.sum()))
    return PosteriorEnsemble(hypothesis_set, posteriors, pi, priors, pi)


def vote_margins(E: PosteriorEnsemble, points: PointSet | Sequence[np.ndarray]) -> np.ndarray:
    """``E_{v~rho} E_{h~Q_v} h(x^v)`` at every point."""
    views = points.views if isinstance(points, PointSet) else points
    if isinstance(points, PointSet):
        E.schema.check(points.schema)
    preds = E.hypothesis_set.predict_views(views)
    out = np.zeros(preds[0].shape[1])
    for r, Q, H in zip(E.rho.weights, E.posteriors, preds):
        out += r * (Q.weights @ H)
    return out


def sign_with_tie(values: np.ndarray) -> np.ndarray:
    """``sign`` with ``sign(0) = +1``."""
    return np.where(np.asarray(values) >= 0, 1, -1).astype(np.int64)


def mv_majority_vote(E: PosteriorEnsemble, x: MultiViewPoint) -> int:
    E.schema.check(x.schema)
    margin = vote_margins(E, [v[None, :] for v in x.views])[0]
    return int(sign_with_tie(margin))


def gibbs_predict(E: PosteriorEnsemble, x: MultiViewPoint, rng: np.random.Generator) -> int:
    """Draw ``v ~ rho`` then ``h ~ Q_v`` and return ``h(x^v)``."""
    v = int(rng.choice(E.n_views, p=E.rho.weights))
    k = int(rng.choice(E.posteriors[v].support_size, p=E.posteriors[v].weights))
    return voter_predict(E.hypothesis_set.voters[v][k], x)


# -- serialization --------------------------------------------------------

def ensemble_to_json(E: PosteriorEnsemble) -> dict:
    return {
        "schema": E.schema.to_json(),
        "voters": [[{"view": h.view, "feature": h.feature, "threshold": h.threshold,
                     "polarity": h.polarity} for h in g] for g in E.hypothesis_set.voters],
        "posteriors": [q.weights.tolist() for q in E.posteriors],
        "rho": E.rho.weights.tolist(),
        "priors": [p.weights.tolist() for p in E.priors],
        "pi": E.pi.weights.tolist(),
    }


def ensemble_from_json(obj: dict) -> PosteriorEnsemble:
    schema = Schema.from_json(obj["schema"])
    voters = [[Voter(int(h["view"]), int(h["feature"]), float(h["threshold"]), int(h["polarity"]))
               for h in g] for g in obj["voters"]]
    hset = ViewHypothesisSet(schema, voters)
    return PosteriorEnsemble(hset, [Categorical(q) for q in obj["posteriors"]],
                             Categorical(obj["rho"]), [Categorical(p) for p in obj["priors"]],
                             Categorical(obj["pi"]))


def dumps_ensemble(E: PosteriorEnsemble) -> str:
    return _jsonfmt.dumps(ensemble_to_json(E)) + "\n"


def write_ensemble(E: PosteriorEnsemble, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_ensemble(E))


def read_ensemble(path: str | os.PathLike) -> PosteriorEnsemble:
    with open(path, encoding="utf-8") as fh:
        return ensemble_from_json(_jsonfmt.loads(fh.read()))


__all__ = [
    "Voter", "ViewHypothesisSet", "PosteriorEnsemble", "voter_predict", "build_stump_grid",
    "uniform_ensemble", "gibbs_posterior_ensemble", "vote_margins", "sign_with_tie",
    "mv_majority_vote", "gibbs_predict", "ensemble_to_json", "ensemble_from_json",
    "dumps_ensemble", "write_ensemble", "read_ensemble",
]

