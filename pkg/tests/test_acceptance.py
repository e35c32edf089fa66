"""Acceptance criteria 1-14, each reported as one PASS/FAIL line."""

import json
import math
import time

import numpy as np
import pytest

from mvpacda.bounds import (BoundParams, catoni_coefficient, cor1_deviation, cor1_dis_mcallester,
                            cor3_dis_kl, mcallester_bound, seeger_bound)
from mvpacda.certify import (CANONICAL_BOUNDS, canonical_instance, certify_bound, exact_oracle,
                             maurer_check)
from mvpacda.cli import main
from mvpacda.domains import draw_sample
from mvpacda.learner import minimize_da_bound
from mvpacda.measures import Categorical, kl_categorical, pair_product, renyi_divergence
from mvpacda.risks import (QUANTITIES, c_bound, exact_profile, gibbs_risk, majority_vote_risk,
                           mc_estimate, mv_disagreement, mv_domain_disagreement,
                           view_disagreements, view_gibbs_risks)

from _instances import random_domain, random_ensemble, random_instance, random_schema

SLACK = 1e-12


def _instances(n, seed):
    rng = np.random.default_rng(seed)
    return [random_instance(rng, max_atoms=30, max_voters=12) for _ in range(n)]


@pytest.fixture(scope="module")
def thousand():
    return _instances(1000, 2)


def test_01_decomposition(acceptance):
    start = time.perf_counter()
    worst = 0.0
    for E, D, D2 in _instances(100, 1):
        for dom in (D, D2):
            prof = exact_profile(E, dom)
            worst = max(worst, abs(prof.gibbs_risk - (0.5 * prof.mv_disagreement + prof.mv_joint_error)))
    elapsed = time.perf_counter() - start
    ok = worst <= SLACK and elapsed < 10
    assert acceptance(1, ok, f"max |R - (d/2 + e)| = {worst:.2e}, {elapsed:.2f} s")


def test_02_target_risk_bound(acceptance, thousand):
    start = time.perf_counter()
    worst = -math.inf
    for E, D, D2 in thousand:
        o = exact_oracle(E, D, D2)
        worst = max(worst, o.gibbs_tgt - (o.gibbs_src + 0.5 * o.dis + o.lam))
    elapsed = time.perf_counter() - start
    ok = worst <= SLACK and elapsed < 60
    assert acceptance(2, ok, f"max R_P - rhs = {worst:.3e} over 1000 instances, {elapsed:.2f} s")


def test_03_pseudometric(acceptance):
    rng = np.random.default_rng(3)
    sym = selfd = tri = 0
    worst = -math.inf
    for _ in range(500):
        schema = random_schema(rng)
        E = random_ensemble(rng, schema)
        A, B, C = (random_domain(rng, schema).marginal() for _ in range(3))
        dis = lambda X, Y: mv_domain_disagreement(E, X, Y)  # noqa: E731
        sym += dis(A, B) != dis(B, A)
        selfd += dis(A, A) != 0.0
        gap = dis(A, C) - dis(A, B) - dis(B, C)
        worst = max(worst, gap)
        tri += gap > SLACK
    ok = sym == selfd == tri == 0
    assert acceptance(3, ok, f"asymmetric {sym}, nonzero self {selfd}, triangle failures {tri} "
                             f"(max gap {worst:.2e}) over 500 triples")


def test_04_c_bound(acceptance, thousand):
    n = fails = chain_fails = 0
    for E, D, _ in thousand:
        g, d = gibbs_risk(E, D), mv_disagreement(E, D)
        if not (g < 0.5 and d < 0.5):
            continue
        n += 1
        cb = c_bound(g, d)
        fails += majority_vote_risk(E, D) > cb + SLACK
        rho = E.rho.weights
        gv, dv = rho @ view_gibbs_risks(E, D), rho @ view_disagreements(E, D)
        chain_fails += not (gv < 0.5 and dv < 0.5) or cb > c_bound(gv, dv) + SLACK
    ok = n > 0 and fails == 0 and chain_fails == 0
    assert acceptance(4, ok, f"{n} qualifying instances, MV > C-bound: {fails}, chain failures: {chain_fails}")


def test_05_factor_two(acceptance, thousand):
    fails = sum(majority_vote_risk(E, D) > 2 * gibbs_risk(E, D) + SLACK for E, D, _ in thousand)
    assert acceptance(5, fails == 0, f"MV risk > 2 x Gibbs on {fails} of 1000 instances")


def test_06_product_kl(acceptance):
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(200):
        k = int(rng.integers(1, 10))
        Q = Categorical(rng.dirichlet(np.ones(k)))
        P = Categorical(rng.dirichlet(np.ones(k)))
        worst = max(worst, abs(kl_categorical(pair_product(Q), pair_product(P)) - 2 * kl_categorical(Q, P)))
    assert acceptance(6, worst <= SLACK, f"max |KL(Q2||P2) - 2 KL(Q||P)| = {worst:.2e} over 200 pairs")


def test_07_pinsker(acceptance):
    worst = -math.inf
    for emp in np.linspace(0, 1, 10):
        for m in np.unique(np.geomspace(1, 10**5, 10).astype(int)):
            for kl in np.linspace(0, 5, 10):
                p = BoundParams(m=int(m), delta=0.05, kl_posterior=float(kl), kl_hyper=float(kl) / 3)
                worst = max(worst, cor3_dis_kl(emp, p).upper() - cor1_dis_mcallester(emp, p).upper(),
                            seeger_bound(emp, p).upper() - mcallester_bound(emp, p).upper())
    assert acceptance(7, worst <= SLACK, f"max (kl-form hi - quadratic-form hi) = {worst:.3e} on a 10^3 grid")


def test_08_maurer(acceptance):
    start = time.perf_counter()
    parts, ok = [], True
    for m in (8, 50, 200):
        for mu in (0.1, 0.5):
            r = maurer_check(m, mu, 10**5, seed=8)
            ok &= r.passed
            parts.append(f"m={m},mu={mu}: {r.estimate:.3f}+-{r.std_error:.3f} in [{r.lower:.3f},{r.upper:.3f}]")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 60
    lin = maurer_check(200, 0.5, 10**5, seed=8, method="linear")
    detail = "; ".join(parts) + f"; {elapsed:.2f} s (E[m kl] itself: {lin.estimate:.3f})"
    assert acceptance(8, ok, "E[exp(m kl)] " + detail)


@pytest.fixture(scope="module")
def canonical():
    return canonical_instance(seed=0)


CANON_P = BoundParams(m=200, n=200, delta=0.05, c=1.0, alpha=0.5)


def test_09_per_sample(acceptance, canonical):
    E, src, tgt = canonical
    start = time.perf_counter()
    parts, ok = [], True
    for bid in CANONICAL_BOUNDS:
        r = certify_bound(bid, E, src, tgt, CANON_P, 2000, seed=9)
        ok &= r.rate <= 0.05 and r.wilson_ci[1] <= 0.08
        parts.append(f"{bid} {r.violations}/2000 (hi {r.wilson_ci[1]:.4f})")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 300
    assert acceptance(9, ok, ", ".join(parts) + f"; {elapsed:.1f} s")


def test_10_expectation(acceptance, canonical):
    E, src, tgt = canonical
    results = {bid: certify_bound(bid, E, src, tgt, CANON_P, 500, seed=10, reading="expectation")
               for bid in CANONICAL_BOUNDS}
    ok = all(r.passed for r in results.values())
    failed = [b for b, r in results.items() if not r.passed]
    assert acceptance(10, ok, f"{len(results) - len(failed)}/{len(results)} hold at 500-trial means"
                              + (f"; failed: {failed}" if failed else ""))


def test_11_monte_carlo(acceptance):
    rng = np.random.default_rng(11)
    E, D, _ = random_instance(rng, max_atoms=20, max_voters=8)
    exact = exact_profile(E, D)
    parts, ok = [], True
    for q in QUANTITIES:
        hits = 0
        for seed in range(100):
            est, se = mc_estimate(q, E, D, 10**4, seed)
            hits += abs(est - getattr(exact, q)) <= 4 * se + 1e-15
        ok &= hits >= 99
        parts.append(f"{q} {hits}/100")
    assert acceptance(11, ok, ", ".join(parts))


def test_12_learner(acceptance):
    from test_learner import _grid_oracle, _samples, _toy
    rng = np.random.default_rng(12)
    mono_fail = 0
    for i in range(20):
        E, D, D2 = random_instance(rng, max_atoms=12, max_voters=6)
        S, T = draw_sample(D, 30, True, i), draw_sample(D2, 30, False, 100 + i)
        objs = minimize_da_bound(E, S, T, BoundParams(m=30), max_iters=30).accepted_objectives
        mono_fail += any(b > a for a, b in zip(objs, objs[1:]))
    S, T = _samples()
    p = BoundParams(m=S.m, n=T.m, delta=0.05)
    q_star, _ = _grid_oracle(_toy(), S, T, p)
    q = minimize_da_bound(_toy(), S, T, p, max_iters=200).ensemble.posteriors[0].weights[0]
    ok = mono_fail == 0 and q >= 0.99
    assert acceptance(12, ok, f"nonmonotone traces {mono_fail}/20; toy mass {q:.4f} "
                              f"(grid minimizer {q_star:.4f})")


def test_13_spot_values(acceptance):
    vals = {"catoni_coefficient(1)": (catoni_coefficient(1.0), 1.581977),
            "cor1 deviation": (cor1_deviation(BoundParams(m=100, delta=0.05)), 0.173082),
            "renyi alpha=2": (renyi_divergence(Categorical([0.5, 0.5]), Categorical([0.25, 0.75]), 2.0),
                              0.287682)}
    ok = all(abs(a - b) <= 1e-6 for a, b in vals.values())
    assert acceptance(13, ok, ", ".join(f"{k} = {a:.6f}" for k, (a, _) in vals.items()))


def test_14_cli_determinism(acceptance, tmp_path):
    gen = {"seed": 14, "dims": [2, 2], "atoms": 20, "shift": 0.3, "samples": {"m": 200, "n": 200},
           "ensemble": {"n_thresholds": 3, "temperature": 5.0}}

    def run(tag):
        d = tmp_path / tag
        (tmp_path / "gen.json").write_text(json.dumps(gen))
        assert main(["gen", "--config", str(tmp_path / "gen.json"), "--out-dir", str(d)]) == 0
        ev = {"source_sample": str(d / "source_sample.jsonl"), "target_sample": str(d / "target_sample.jsonl"),
              "ensemble": str(d / "ensemble.json"), "source_domain": str(d / "source_domain.json"),
              "target_domain": str(d / "target_domain.json"),
              "bounds": ["thm1", "thm2", "thm3", "thm4", "cor1", "cor2", "cor3", "cor4", "goyal", "thm9"]}
        (d / "eval.json").write_text(json.dumps(ev))
        assert main(["eval", "--config", str(d / "eval.json"), "--out-dir", str(d / "eval")]) == 0
        ce = {"seed": 14, "source_domain": ev["source_domain"], "target_domain": ev["target_domain"],
              "ensemble": ev["ensemble"], "bounds": ["cor1", "thm9"], "trials": 200,
              "expectation_trials": 50, "params": {"m": 200, "delta": 0.05}}
        (d / "cert.json").write_text(json.dumps(ce))
        assert main(["certify", "--config", str(d / "cert.json"), "--out-dir", str(d / "cert")]) == 0
        names = ["source_domain.json", "target_domain.json", "source_sample.jsonl", "target_sample.jsonl",
                 "ensemble.json", "eval/bounds.csv", "cert/certification.json"]
        return {n: (d / n).read_bytes() for n in names}

    a, b = run("a"), run("b")
    differ = [n for n in a if a[n] != b[n]]
    assert acceptance(14, not differ, f"{len(a)} output files compared, {len(differ)} differ"
                                      + (f": {differ}" if differ else ""))
