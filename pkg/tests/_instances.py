"""Random finite instances and loop-based reference implementations.

The reference functions enumerate atoms, view pairs and voter pairs one
term at a time, without the closed forms used by the package.
"""

import numpy as np

from mvpacda.domains import Schema, make_finite_domain
from mvpacda.measures import Categorical
from mvpacda.voters import PosteriorEnsemble, ViewHypothesisSet, Voter, voter_predict


def simplex(rng, k, sparse=False):
    w = rng.dirichlet(np.full(k, 0.7))
    if sparse and k > 1:
        w[rng.random(k) < 0.25] = 0.0
        if w.sum() == 0:
            w[rng.integers(k)] = 1.0
    return w / w.sum()


def random_schema(rng, views=(2, 3), max_dim=3):
    V = int(rng.choice(views))
    return Schema(V, [int(rng.integers(1, max_dim + 1)) for _ in range(V)])


def random_domain(rng, schema, max_atoms=30, min_atoms=1):
    n = int(rng.integers(min_atoms, max_atoms + 1))
    probs = simplex(rng, n, sparse=True)
    atoms = []
    for i in range(n):
        # coarse grid so that ties with thresholds actually happen
        views = [np.round(rng.normal(size=d), 1) for d in schema.dims]
        atoms.append((views, int(rng.choice([-1, 1])), float(probs[i])))
    return make_finite_domain(schema, atoms)


def random_ensemble(rng, schema, max_voters=12, sparse=True):
    groups = []
    for v, d in enumerate(schema.dims):
        k = int(rng.integers(1, max_voters + 1))
        groups.append([Voter(v, int(rng.integers(d)), float(np.round(rng.normal(), 1)),
                             int(rng.choice([-1, 1]))) for _ in range(k)])
    hset = ViewHypothesisSet(schema, groups)
    posteriors = [Categorical(simplex(rng, len(g), sparse)) for g in groups]
    priors = [Categorical(simplex(rng, len(g))) for g in groups]
    rho = Categorical(simplex(rng, schema.n_views, sparse))
    pi = Categorical(simplex(rng, schema.n_views))
    return PosteriorEnsemble(hset, posteriors, rho, priors, pi)


def random_instance(rng, max_atoms=30, max_voters=12):
    schema = random_schema(rng)
    return (random_ensemble(rng, schema, max_voters), random_domain(rng, schema, max_atoms),
            random_domain(rng, schema, max_atoms))


def _terms(E):
    for v, (r, Q) in enumerate(zip(E.rho.weights, E.posteriors)):
        for k, q in enumerate(Q.weights):
            yield v, r, E.hypothesis_set.voters[v][k], q


def ref_gibbs(E, D):
    total = 0.0
    for x, y, w in D.atoms():
        for v, r, h, q in _terms(E):
            total += w * r * q * (voter_predict(h, x) != y)
    return total


def _pair_sum(E, D, loss, mode):
    hs = E.hypothesis_set.voters
    rho = E.rho.weights
    total = 0.0
    for i in range(D.n_points):
        x, w = D.point(i), D.weights[i]
        y = None if D.labels is None else int(D.labels[i])
        for v in range(E.n_views):
            for v2 in range(E.n_views):
                # literal: both voters from Q_v, v2 only weights the pair
                pv = v if mode == "literal" else v2
                for h, q in zip(hs[v], E.posteriors[v].weights):
                    for h2, q2 in zip(hs[pv], E.posteriors[pv].weights):
                        a, b = voter_predict(h, x), voter_predict(h2, x)
                        total += w * rho[v] * rho[v2] * q * q2 * loss(a, b, y)
    return total


def ref_disagreement(E, M, mode="literal"):
    return _pair_sum(E, M, lambda a, b, y: a != b, mode)


def ref_joint_error(E, D, mode="literal"):
    return _pair_sum(E, D, lambda a, b, y: (a != y) and (b != y), mode)


def ref_margin(E, x):
    return sum(r * q * voter_predict(h, x) for v, r, h, q in _terms(E))


def ref_mv_risk(E, D):
    total = 0.0
    for x, y, w in D.atoms():
        pred = 1 if ref_margin(E, x) >= 0 else -1
        total += w * (pred != y)
    return total
