"""Exact oracle, sample-expectation estimates and bound certification.

A certification run draws ``trials`` independent samples, evaluates a
bound on each, and counts how often the exact population quantity exceeds
it. Trial ``t`` owns the random streams derived from ``(seed, t)``, so
results do not depend on threading.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy import special, stats

from . import bounds as B
from ._random import derive_seed, stream
from .domains import FiniteDomain, SampleSet, draw_atom_indices, draw_sample
from .risks import ENUMERATION_CAP, enumeration_size, pointwise
from .voters import PosteriorEnsemble

VIOLATION_TOL = 1e-12
SAMPLE_QUANTITIES = ("gibbs_risk", "mv_disagreement", "mv_joint_error", "majority_vote_risk",
                     "target_disagreement", "domain_disagreement")

EnsembleRule = Callable[[SampleSet, SampleSet], PosteriorEnsemble]


class OracleInfeasible(RuntimeError):
    pass


@dataclass(frozen=True)
class OracleTable:
    gibbs_src: float
    gibbs_tgt: float
    d_src: float
    d_tgt: float
    e_src: float
    e_tgt: float
    dis: float
    lam: float
    mv_src: float
    mv_tgt: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def exact_oracle(E: PosteriorEnsemble, src: FiniteDomain, tgt: FiniteDomain,
                 mode: str = "literal", cap: int = ENUMERATION_CAP) -> OracleTable:
    """Every population quantity on both domains."""
    src.schema.check(tgt.schema)
    size = enumeration_size(E, max(src.n_atoms, tgt.n_atoms))
    if size > cap:
        raise OracleInfeasible(f"enumeration size {size} exceeds cap {cap}")
    s = {k: float(src.weights @ v) for k, v in pointwise(E, src, mode).items()}
    t = {k: float(tgt.weights @ v) for k, v in pointwise(E, tgt, mode).items()}
    return OracleTable(
        gibbs_src=s["gibbs_risk"], gibbs_tgt=t["gibbs_risk"],
        d_src=s["mv_disagreement"], d_tgt=t["mv_disagreement"],
        e_src=s["mv_joint_error"], e_tgt=t["mv_joint_error"],
        dis=abs(t["mv_disagreement"] - s["mv_disagreement"]),
        lam=abs(t["mv_joint_error"] - s["mv_joint_error"]),
        mv_src=s["majority_vote_risk"], mv_tgt=t["majority_vote_risk"])


# -- per-trial empirical quantities ----------------------------------------

class _AtomTables:
    """Per-atom quantity values, so a drawn sample costs one weighted sum."""

    def __init__(self, E: PosteriorEnsemble, src: FiniteDomain, tgt: FiniteDomain | None, mode: str):
        self.src = pointwise(E, src, mode)
        self.tgt = pointwise(E, tgt, mode) if tgt is not None else None
        self.n_src = src.n_atoms
        self.n_tgt = tgt.n_atoms if tgt is not None else 0


def _trial_draws(src: FiniteDomain, tgt: FiniteDomain | None, m: int, n: int,
                 seed: int, t: int) -> tuple[np.ndarray, Optional[np.ndarray]]:
    s_idx = draw_atom_indices(src, m, derive_seed(seed, t, 0))
    t_idx = draw_atom_indices(tgt, n, derive_seed(seed, t, 1)) if tgt is not None else None
    return s_idx, t_idx


def _empirical_from_counts(tab: _AtomTables, s_idx: np.ndarray, t_idx: np.ndarray | None) -> dict:
    ws = np.bincount(s_idx, minlength=tab.n_src) / s_idx.size
    out = {k: float(ws @ v) for k, v in tab.src.items()}
    if t_idx is not None:
        wt = np.bincount(t_idx, minlength=tab.n_tgt) / t_idx.size
        out["target_disagreement"] = float(wt @ tab.tgt["mv_disagreement"])
        out["domain_disagreement"] = abs(out["target_disagreement"] - out["mv_disagreement"])
    return out


def _sample_pair(src, tgt, m, n, seed, t) -> tuple[SampleSet, SampleSet]:
    S = draw_sample(src, m, True, derive_seed(seed, t, 0))
    T = draw_sample(tgt, n, False, derive_seed(seed, t, 1))
    return S, T


def _empirical_from_samples(E, S: SampleSet, T: SampleSet, mode: str) -> dict:
    out = {k: float(S.weights @ v) for k, v in pointwise(E, S, mode).items()}
    out["target_disagreement"] = float(T.weights @ pointwise(E, T, mode)["mv_disagreement"])
    out["domain_disagreement"] = abs(out["target_disagreement"] - out["mv_disagreement"])
    return out


def estimate_sample_expectation(quantity: str, E: PosteriorEnsemble, src: FiniteDomain,
                                m: int, trials: int, seed: int, tgt: FiniteDomain | None = None,
                                n: int | None = None, mode: str = "literal") -> tuple[float, float]:
    """Mean and standard error over ``trials`` fresh samples of an empirical quantity."""
    if quantity not in SAMPLE_QUANTITIES:
        raise ValueError(f"unknown quantity {quantity!r}; expected one of {SAMPLE_QUANTITIES}")
    if trials < 2:
        raise ValueError("trials must be >= 2")
    if quantity in ("target_disagreement", "domain_disagreement") and tgt is None:
        raise ValueError(f"{quantity} needs a target domain")
    n = m if n is None else n
    tab = _AtomTables(E, src, tgt, mode)
    vals = np.empty(trials)
    for t in range(trials):
        s_idx, t_idx = _trial_draws(src, tgt, m, n, seed, t)
        vals[t] = _empirical_from_counts(tab, s_idx, t_idx)[quantity]
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(trials))


# -- bound registry ---------------------------------------------------------

@dataclass(frozen=True)
class _BoundSpec:
    lhs: str
    evaluate: Callable[[dict, B.BoundParams, float], B.BoundReport]


def _total_kl(p: B.BoundParams) -> float:
    return p.kl_posterior + p.kl_hyper


BOUNDS: dict[str, _BoundSpec] = {
    # single-view theorems applied to the flattened posterior rho_v Q_v(h),
    # whose KL to pi_v P_v(h) is kl_hyper + kl_posterior
    "thm1": _BoundSpec("gibbs_src", lambda e, p, lam: B.seeger_bound(e["gibbs_risk"], p, _total_kl(p))),
    "thm2": _BoundSpec("gibbs_src", lambda e, p, lam: B.mcallester_bound(e["gibbs_risk"], p, _total_kl(p))),
    "thm3": _BoundSpec("gibbs_src", lambda e, p, lam: B.catoni_bound(e["gibbs_risk"], p, _total_kl(p))),
    "thm4": _BoundSpec("dis", lambda e, p, lam: B.germain_dis_bound(e["domain_disagreement"], p, _total_kl(p))),
    "cor1": _BoundSpec("dis", lambda e, p, lam: B.cor1_dis_mcallester(e["domain_disagreement"], p)),
    "cor2": _BoundSpec("dis", lambda e, p, lam: B.cor2_dis_catoni(e["domain_disagreement"], p)),
    "cor3": _BoundSpec("dis", lambda e, p, lam: B.cor3_dis_kl(e["domain_disagreement"], p)),
    "cor4": _BoundSpec("dis", lambda e, p, lam: B.cor4_dis_unequal(e["domain_disagreement"], p)),
    "goyal": _BoundSpec("gibbs_src", lambda e, p, lam: B.goyal_mv_gibbs_bound(e["gibbs_risk"], p)),
    "thm9": _BoundSpec("gibbs_tgt", lambda e, p, lam: B.da_pac_bound(
        e["gibbs_risk"], e["domain_disagreement"], lam, p)),
}
CANONICAL_BOUNDS = ("thm1", "thm2", "thm3", "thm4", "cor1", "cor2", "cor3", "cor4", "thm9")
READINGS = ("per_sample", "expectation")


def evaluate_bound(bound_id: str, emp: dict, p: B.BoundParams, lam: float = 0.0) -> B.BoundReport:
    """Evaluate a registered bound; ``lam`` is used by ``thm9`` only."""
    if bound_id not in BOUNDS:
        raise ValueError(f"unknown bound {bound_id!r}; expected one of {tuple(BOUNDS)}")
    return BOUNDS[bound_id].evaluate(emp, p, lam)


def violated(lhs: float, report: B.BoundReport) -> bool:
    return bool(lhs > report.upper() + VIOLATION_TOL)


@dataclass(frozen=True)
class CertificationResult:
    bound_id: str
    trials: int
    violations: int
    rate: float
    wilson_ci: tuple[float, float]
    params: dict
    seed: int
    reading: str
    passed: bool

    def to_json(self) -> dict:
        return {"bound_id": self.bound_id, "params": self.params, "trials": self.trials,
                "violations": self.violations, "rate": self.rate,
                "wilson_ci": list(self.wilson_ci), "seed": self.seed,
                "reading": self.reading, "pass": self.passed}


def wilson_interval(k: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    ci = stats.binomtest(k, n).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def _threads(threads: int | None) -> int:
    return max(1, threads if threads else (os.cpu_count() or 1))


def _run_trials(fn: Callable[[int], tuple], trials: int, threads: int | None) -> list:
    n = _threads(threads)
    if n == 1 or trials < 64:
        return [fn(t) for t in range(trials)]
    with ThreadPoolExecutor(max_workers=n) as pool:
        # map preserves trial order, which keeps the fold deterministic
        return list(pool.map(fn, range(trials), chunksize=max(1, trials // (4 * n))))


def _trial_quantities(ensemble: Union[PosteriorEnsemble, EnsembleRule], src, tgt, p, seed, mode,
                      tab: _AtomTables | None, oracle: OracleTable | None):
    """Closure returning ``(emp dict, KL pair, oracle)`` for trial ``t``."""
    if isinstance(ensemble, PosteriorEnsemble):
        kls = (ensemble.kl_posterior(), ensemble.kl_hyper())

        def run(t):
            s_idx, t_idx = _trial_draws(src, tgt, p.m, p.n, seed, t)
            return _empirical_from_counts(tab, s_idx, t_idx), kls, oracle
        return run

    def run_rule(t):
        S, T = _sample_pair(src, tgt, p.m, p.n, seed, t)
        E = ensemble(S, T.unlabeled())
        emp = _empirical_from_samples(E, S, T, mode)
        return emp, (E.kl_posterior(), E.kl_hyper()), exact_oracle(E, src, tgt, mode)
    return run_rule


def certify_bound(bound_id: str, ensemble: Union[PosteriorEnsemble, EnsembleRule],
                  src: FiniteDomain, tgt: FiniteDomain, p: B.BoundParams, trials: int, seed: int,
                  reading: str = "per_sample", mode: str = "literal",
                  threads: int | None = None) -> CertificationResult:
    """Certify one bound on ``(src, tgt)``.

    ``ensemble`` is either a fixed ensemble or a rule mapping ``(S, T_X)``
    to one. In the per-sample reading every trial is a test of the bound and
    the run passes when the violation rate is at most ``delta``. In the
    expectation reading the empirical inputs, KL terms and the bounded
    quantity are replaced by their means over the trials and the single
    resulting inequality decides the pass.
    """
    if bound_id not in BOUNDS:
        raise ValueError(f"unknown bound {bound_id!r}; expected one of {tuple(BOUNDS)}")
    if reading not in READINGS:
        raise ValueError(f"unknown reading {reading!r}; expected one of {READINGS}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    spec = BOUNDS[bound_id]
    oracle = tab = None
    if isinstance(ensemble, PosteriorEnsemble):
        oracle = exact_oracle(ensemble, src, tgt, mode)
        tab = _AtomTables(ensemble, src, tgt, mode)
    run = _trial_quantities(ensemble, src, tgt, p, seed, mode, tab, oracle)
    results = _run_trials(run, trials, threads)
    if isinstance(ensemble, PosteriorEnsemble):
        kp, kh = ensemble.kl_posterior(), ensemble.kl_hyper()
    else:
        kp = float(np.mean([r[1][0] for r in results]))
        kh = float(np.mean([r[1][1] for r in results]))
    params = p.with_kl(kp, kh).to_json()

    if reading == "per_sample":
        violations = 0
        for emp, (kp_t, kh_t), orc in results:
            report = spec.evaluate(emp, p.with_kl(kp_t, kh_t), orc.lam)
            violations += int(violated(getattr(orc, spec.lhs), report))
        rate = violations / trials
        return CertificationResult(bound_id, trials, violations, rate, wilson_interval(violations, trials),
                                   params, seed, reading, bool(rate <= p.delta))

    keys = results[0][0].keys()
    mean_emp = {k: float(np.mean([r[0][k] for r in results])) for k in keys}
    if oracle is None:
        fields = OracleTable.__dataclass_fields__
        oracle = OracleTable(**{f: float(np.mean([getattr(r[2], f) for r in results])) for f in fields})
    report = spec.evaluate(mean_emp, p.with_kl(kp, kh), oracle.lam)
    bad = int(violated(getattr(oracle, spec.lhs), report))
    return CertificationResult(bound_id, 1, bad, float(bad), wilson_interval(bad, 1),
                               params, seed, reading, bad == 0)


# -- Maurer's moment bound ------------------------------------------------------

@dataclass(frozen=True)
class MaurerResult:
    m: int
    mu: float
    estimate: float
    std_error: float
    lower: float
    upper: float
    passed: bool
    degenerate: bool
    method: str


def _m_kl(k: np.ndarray, m: int, mu: float) -> np.ndarray:
    """``m * kl(k/m || mu)`` for integer counts ``k``."""
    k = np.asarray(k, dtype=float)
    return (special.xlogy(k, k / (m * mu)) + special.xlogy(m - k, (m - k) / (m * (1.0 - mu))))


def maurer_exact(m: int, mu: float) -> float:
    """``E[exp(m kl(mean || mu))]`` by summing over the binomial count."""
    k = np.arange(m + 1)
    return float(np.exp(special.logsumexp(stats.binom.logpmf(k, m, mu) + _m_kl(k, m, mu))))


def maurer_check(m: int, mu: float, trials: int, seed: int, method: str = "importance") -> MaurerResult:
    """Monte Carlo estimate of the exponential moment ``E[exp(m kl(mean || mu))]``.

    ``method="naive"`` averages ``exp(m kl)`` over simulated means. Its
    distribution is heavy-tailed (most of the mass sits on rare extreme
    counts), so for larger ``m`` it underestimates with an optimistic standard
    error. ``method="importance"`` draws the count uniformly on ``0..m`` and
    reweights each draw by ``(m + 1) pmf(k)``, which makes that weighted term
    nearly flat. ``method="linear"`` estimates ``E[m kl(mean || mu)]`` itself.

    Passes when the estimate lies in ``[sqrt(m) - 3 se, 2 sqrt(m) + 3 se]``.
    """
    if m < 8:
        raise ValueError(f"the moment bound needs m >= 8, got {m}")
    if method not in ("importance", "naive", "linear"):
        raise ValueError(f"unknown method {method!r}")
    mu = float(mu)
    if not 0.0 <= mu <= 1.0:
        raise ValueError(f"mu must lie in [0, 1], got {mu}")
    lo, hi = math.sqrt(m), 2.0 * math.sqrt(m)
    if mu in (0.0, 1.0):
        # the sample mean equals mu surely, so kl is identically zero
        return MaurerResult(m, mu, 0.0, 0.0, lo, hi, False, True, method)
    rng = stream(seed, 3)
    if method == "importance":
        k = rng.integers(0, m + 1, size=trials)
        log_w = math.log(m + 1) + stats.binom.logpmf(k, m, mu) + _m_kl(k, m, mu)
        vals = np.exp(log_w)
    else:
        k = rng.binomial(m, mu, size=trials)
        vals = _m_kl(k, m, mu)
        if method == "naive":
            vals = np.exp(vals)
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    ok = bool(lo - 3.0 * se <= est <= hi + 3.0 * se)
    return MaurerResult(m, mu, est, se, lo, hi, ok, False, method)


__all__ = [
    "VIOLATION_TOL", "SAMPLE_QUANTITIES", "OracleInfeasible", "OracleTable", "exact_oracle",
    "estimate_sample_expectation", "BOUNDS", "CANONICAL_BOUNDS", "READINGS", "evaluate_bound",
    "violated", "CertificationResult", "wilson_interval", "certify_bound", "MaurerResult",
    "maurer_exact", "maurer_check", "canonical_instance",
]


def canonical_instance(seed: int = 0, d_per_view=(2, 2), atoms: int = 20, shift: float = 0.3,
                       n_thresholds: int = 3, temperature: float = 5.0):
    """``(ensemble, source, target)`` used by the certification criteria.

    Stumps come from the source atoms; the posteriors are the Gibbs
    posteriors of the exact source risks, so they do not depend on any
    sample (a uniform posterior would cancel the two polarities).
    """
    from .domains import synth_shift_pair
    from .voters import build_stump_grid, gibbs_posterior_ensemble

    src, tgt = synth_shift_pair(len(d_per_view), d_per_view, atoms, shift, seed=seed)
    hset = build_stump_grid(src, n_thresholds)
    return gibbs_posterior_ensemble(hset, src, temperature), src, tgt
