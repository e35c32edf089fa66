import numpy as np
import pytest
from hypothesis import given, strategies as st

from mvpacda.domains import MultiViewPoint, Schema, make_finite_domain, make_sample
from mvpacda.measures import Categorical
from mvpacda.risks import (QUANTITIES, c_bound, empirical_profile, exact_profile, gibbs_risk,
                           lambda_rho, majority_vote_risk, mc_estimate, mv_disagreement,
                           mv_domain_disagreement, mv_joint_error, view_disagreements,
                           view_gibbs_risks, view_pair_disagreements)
from mvpacda.voters import PosteriorEnsemble, ViewHypothesisSet, Voter

from _instances import (random_domain, random_ensemble, random_instance, random_schema,
                        ref_disagreement, ref_gibbs, ref_joint_error, ref_mv_risk)

seeds = st.integers(0, 2**32)
S1 = Schema(1, [1])


def _constant_ensemble(pols, weights, schema=S1):
    H = ViewHypothesisSet(schema, [[Voter(0, 0, -np.inf, p) for p in pols]])
    return PosteriorEnsemble(H, [Categorical(weights)], Categorical([1.0]))


def _one_point(label):
    return make_finite_domain(S1, [([[0.0]], label, 1.0)])


class TestAgainstLoops:
    @pytest.mark.parametrize("mode", ["literal", "cross"])
    @given(seed=seeds)
    def test_closed_forms(self, mode, seed):
        rng = np.random.default_rng(seed)
        E, D, _ = random_instance(rng, max_atoms=8, max_voters=5)
        assert gibbs_risk(E, D) == pytest.approx(ref_gibbs(E, D), abs=1e-12)
        assert mv_disagreement(E, D, mode) == pytest.approx(ref_disagreement(E, D, mode), abs=1e-12)
        assert mv_joint_error(E, D, mode) == pytest.approx(ref_joint_error(E, D, mode), abs=1e-12)
        assert majority_vote_risk(E, D) == pytest.approx(ref_mv_risk(E, D), abs=1e-12)

    def test_marginal_disagreement(self):
        rng = np.random.default_rng(0)
        E, D, _ = random_instance(rng)
        assert mv_disagreement(E, D.marginal()) == mv_disagreement(E, D)


class TestExamples:
    def test_gibbs(self):
        assert gibbs_risk(_constant_ensemble([1, 1], [0.5, 0.5]), _one_point(1)) == 0.0
        assert gibbs_risk(_constant_ensemble([1, -1], [0.5, 0.5]), _one_point(1)) == 0.5
        E = _constant_ensemble([1, -1], [0.0, 1.0])
        assert gibbs_risk(E, _one_point(1)) == 1.0

    def test_disagreement(self):
        assert mv_disagreement(_constant_ensemble([1, -1], [1.0, 0.0]), _one_point(1)) == 0.0
        assert mv_disagreement(_constant_ensemble([1, -1], [0.5, 0.5]), _one_point(-1)) == 0.5
        assert mv_disagreement(_constant_ensemble([1, 1, 1], [0.2, 0.3, 0.5]), _one_point(1)) == 0.0

    def test_joint_error(self):
        assert mv_joint_error(_constant_ensemble([1, 1], [0.5, 0.5]), _one_point(1)) == 0.0
        assert mv_joint_error(_constant_ensemble([1, -1], [0.5, 0.5]), _one_point(1)) == 0.25
        assert mv_joint_error(_constant_ensemble([1, -1], [0.0, 1.0]), _one_point(1)) == 1.0

    def test_majority_vote(self):
        assert majority_vote_risk(_constant_ensemble([1, 1], [0.5, 0.5]), _one_point(1)) == 0.0
        tie = _constant_ensemble([1, -1], [0.5, 0.5])
        assert majority_vote_risk(tie, _one_point(1)) == 0.0
        assert majority_vote_risk(tie, _one_point(-1)) == 1.0

    def test_c_bound(self):
        assert c_bound(0.0, 0.0) == 0.0
        assert c_bound(0.3, 0.2) == pytest.approx(1 - 0.16 / 0.6, abs=1e-12)
        assert c_bound(0.3, 0.2) == pytest.approx(0.733333, abs=1e-6)
        for g, d in [(0.5, 0.1), (0.1, 0.5), (-0.1, 0.1)]:
            with pytest.raises(ValueError):
                c_bound(g, d)

    def test_lambda_and_dis(self):
        rng = np.random.default_rng(1)
        E, D, D2 = random_instance(rng)
        assert lambda_rho(E, D, D) == 0.0
        assert mv_domain_disagreement(E, D, D) == 0.0
        assert lambda_rho(E, D, D2) == lambda_rho(E, D2, D)
        assert mv_domain_disagreement(E, D, D2) == mv_domain_disagreement(E, D2, D)
        assert lambda_rho(E, D, D2) == pytest.approx(
            abs(mv_joint_error(E, D2) - mv_joint_error(E, D)), abs=0)

    def test_unlabeled_errors(self):
        E = _constant_ensemble([1], [1.0])
        M = _one_point(1).marginal()
        for f in (gibbs_risk, mv_joint_error, majority_vote_risk):
            with pytest.raises(ValueError):
                f(E, M)

    def test_unknown_mode(self):
        E = _constant_ensemble([1], [1.0])
        with pytest.raises(ValueError):
            mv_disagreement(E, _one_point(1), mode="other")


@pytest.mark.parametrize("mode", ["literal", "cross"])
@given(seed=seeds)
def test_decomposition(mode, seed):
    rng = np.random.default_rng(seed)
    E, D, _ = random_instance(rng)
    prof = exact_profile(E, D, mode)
    assert abs(prof.gibbs_risk - (0.5 * prof.mv_disagreement + prof.mv_joint_error)) <= 1e-12


@given(seed=seeds)
def test_factor_two_and_range(seed):
    rng = np.random.default_rng(seed)
    E, D, _ = random_instance(rng)
    prof = exact_profile(E, D)
    for x in (prof.gibbs_risk, prof.mv_disagreement, prof.mv_joint_error, prof.majority_vote_risk):
        assert 0.0 <= x <= 1.0
    assert prof.majority_vote_risk <= 2 * prof.gibbs_risk + 1e-12


@pytest.mark.parametrize("mode", ["literal", "cross"])
@given(seed=seeds)
def test_c_bound_validity_and_chain(mode, seed):
    rng = np.random.default_rng(seed)
    E, D, _ = random_instance(rng)
    g, d = gibbs_risk(E, D), mv_disagreement(E, D, mode)
    if not (g < 0.5 and d < 0.5):
        return
    cb = c_bound(g, d)
    assert majority_vote_risk(E, D) <= cb + 1e-12
    rho = E.rho.weights
    gv, dv = rho @ view_gibbs_risks(E, D), rho @ view_disagreements(E, D)
    if gv < 0.5 and dv < 0.5:
        assert cb <= c_bound(gv, dv) + 1e-12


@given(seed=seeds)
def test_pseudometric(seed):
    rng = np.random.default_rng(seed)
    schema = random_schema(rng)
    E = random_ensemble(rng, schema)
    A, B, C = (random_domain(rng, schema).marginal() for _ in range(3))
    dis = mv_domain_disagreement
    assert dis(E, A, B) == dis(E, B, A)
    assert dis(E, A, A) == 0.0
    assert dis(E, A, C) <= dis(E, A, B) + dis(E, B, C) + 1e-12


@pytest.mark.parametrize("mode", ["literal", "cross"])
@given(seed=seeds)
def test_view_expectation_domination(mode, seed):
    rng = np.random.default_rng(seed)
    E, D, D2 = random_instance(rng)
    rho = E.rho.weights
    gap = np.abs(view_pair_disagreements(E, D2, mode) - view_pair_disagreements(E, D, mode))
    assert mv_domain_disagreement(E, D, D2, mode) <= rho @ gap @ rho + 1e-12
    # the pair matrix also reproduces the disagreement itself
    assert rho @ view_pair_disagreements(E, D, mode) @ rho == pytest.approx(
        mv_disagreement(E, D, mode), abs=1e-12)


class TestEmpirical:
    def test_enumerated_uniform_domain(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            schema = random_schema(rng)
            E = random_ensemble(rng, schema)
            D = random_domain(rng, schema, 12, 2)
            U = make_finite_domain(schema, [(x, y, 1.0 / D.n_atoms) for x, y, _ in D.atoms()])
            S = make_sample(schema, list(U.views), U.labels)
            exact, emp = exact_profile(E, U), empirical_profile(E, S)
            for k in ("gibbs_risk", "mv_disagreement", "mv_joint_error", "majority_vote_risk"):
                assert getattr(emp, k) == pytest.approx(getattr(exact, k), abs=1e-12)

    def test_single_correct_row(self):
        E = _constant_ensemble([1, 1], [0.4, 0.6])
        S = make_sample(S1, [[[0.0]]], [1])
        assert empirical_profile(E, S).gibbs_risk == 0.0

    def test_duplicated_rows(self):
        rng = np.random.default_rng(3)
        E, D, _ = random_instance(rng)
        idx = np.array([0, 0, 1, 2, 2, 2] if D.n_atoms >= 3 else [0, 0, 0])
        S = make_sample(D.schema, [v[idx] for v in D.views], D.labels[idx])
        uniq, counts = np.unique(idx, return_counts=True)
        W = make_finite_domain(D.schema, [(D.point(i), int(D.labels[i]), c / idx.size)
                                          for i, c in zip(uniq, counts)])
        emp, exact = empirical_profile(E, S), exact_profile(E, W)
        for k in ("gibbs_risk", "mv_disagreement", "mv_joint_error", "majority_vote_risk"):
            assert getattr(emp, k) == pytest.approx(getattr(exact, k), abs=1e-12)

    def test_target_fields(self):
        rng = np.random.default_rng(4)
        E, D, D2 = random_instance(rng)
        S = make_sample(D.schema, list(D.views), D.labels)
        T = make_sample(D2.schema, list(D2.views))
        prof = empirical_profile(E, S, T)
        assert prof.source == f"empirical(m={S.m}, n={T.m})"
        assert prof.target_disagreement == pytest.approx(mv_disagreement(E, T), abs=0)
        assert prof.domain_disagreement == pytest.approx(
            abs(prof.target_disagreement - prof.mv_disagreement), abs=0)
        unl = empirical_profile(E, T)
        assert unl.gibbs_risk is None and unl.mv_joint_error is None
        assert unl.mv_disagreement is not None


class TestMonteCarlo:
    def test_point_mass(self):
        E = _constant_ensemble([1, -1], [0.0, 1.0])
        D = _one_point(1)
        for q, exact in [("gibbs_risk", 1.0), ("mv_disagreement", 0.0), ("mv_joint_error", 1.0),
                         ("majority_vote_risk", 1.0)]:
            assert mc_estimate(q, E, D, 500, 0) == (exact, 0.0)

    def test_same_seed(self):
        rng = np.random.default_rng(5)
        E, D, _ = random_instance(rng)
        for q in QUANTITIES:
            assert mc_estimate(q, E, D, 1000, 3) == mc_estimate(q, E, D, 1000, 3)

    def test_errors(self):
        E = _constant_ensemble([1], [1.0])
        with pytest.raises(ValueError):
            mc_estimate("nope", E, _one_point(1), 10, 0)
        with pytest.raises(ValueError):
            mc_estimate("gibbs_risk", E, _one_point(1), 0, 0)

    @pytest.mark.parametrize("mode", ["literal", "cross"])
    def test_band(self, mode):
        rng = np.random.default_rng(6)
        E, D, _ = random_instance(rng)
        exact = exact_profile(E, D, mode)
        for q in QUANTITIES:
            hits = 0
            for seed in range(30):
                est, se = mc_estimate(q, E, D, 4000, seed, mode)
                hits += abs(est - getattr(exact, q)) <= 4 * se + 1e-15
            assert hits >= 29
