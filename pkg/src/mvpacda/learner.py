"""Exponentiated-gradient minimization of the target-risk bound over ``({Q_v}, rho)``.

The objective is the final domain-adaptation bound without its ``lambda``
term, which needs target labels. Partial derivatives come from finite
differences, projected onto each simplex's tangent space; a backtracking
step keeps the accepted objective values nonincreasing. Priors never move.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import xlogy

from . import _jsonfmt
from .bounds import BoundParams, catoni_coefficient
from .domains import SampleSet
from .measures import Categorical
from .risks import MODES
from .voters import PosteriorEnsemble, ensemble_to_json

FD_STEP = 1e-6
MAX_HALVINGS = 20
REL_TOL = 1e-9


@dataclass(frozen=True)
class LearnRecord:
    iter: int
    objective: float
    eta: float
    accepted: bool


@dataclass
class LearnTrace:
    records: list
    ensemble: PosteriorEnsemble

    @property
    def accepted_objectives(self) -> list[float]:
        return [r.objective for r in self.records if r.accepted]

    @property
    def final_objective(self) -> float:
        return self.accepted_objectives[-1]

    def to_json(self) -> dict:
        return {"trace": [{"iter": r.iter, "objective": r.objective, "eta": r.eta,
                           "accepted": r.accepted} for r in self.records],
                "ensemble": ensemble_to_json(self.ensemble)}

    def dumps(self) -> str:
        return _jsonfmt.dumps(self.to_json()) + "\n"


class BoundObjective:
    """Bound value as a function of raw weight blocks ``[q_1, ..., q_V, rho]``."""

    def __init__(self, E: PosteriorEnsemble, S: SampleSet, T: SampleSet, p: BoundParams,
                 mode: str = "literal"):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        if S.n_points < 1 or T.n_points < 1:
            raise ValueError("learning needs nonempty source and target samples")
        if not S.labeled:
            raise ValueError("the source sample must be labeled")
        E.schema.check(S.schema)
        E.schema.check(T.schema)
        self.mode = mode
        self.p = p
        hs = E.hypothesis_set
        y = S.labels[None, :]
        self.s_plus = [(H == 1).astype(float) for H in hs.predict_views(S.views)]
        self.s_wrong = [(H != y).astype(float) for H in hs.predict_views(S.views)]
        self.t_plus = [(H == 1).astype(float) for H in hs.predict_views(T.views)]
        self.ws, self.wt = S.weights, T.weights
        self.priors = [P.weights for P in E.priors]
        self.pi = E.pi.weights
        self.c1 = catoni_coefficient(p.c)
        self.a2 = catoni_coefficient(2.0 * p.alpha)

    @staticmethod
    def _kl(q: np.ndarray, prior: np.ndarray) -> float:
        if np.any((q > 0) & (prior == 0)):
            return np.inf
        return float(np.sum(xlogy(q, q) - xlogy(q, prior)))

    def _dis(self, plus, minus, rho) -> float:
        if self.mode == "literal":
            return rho @ np.stack([2.0 * a * b for a, b in zip(plus, minus)])
        pbar = rho @ np.stack(plus)
        mbar = rho @ np.stack(minus)
        return 2.0 * pbar * mbar

    def __call__(self, blocks: list) -> float:
        qs, rho = blocks[:-1], blocks[-1]
        # masses: Q_v weight on +1 voters; minus uses the block total so raw
        # (unnormalized) perturbations stay consistent
        sp = [q @ H for q, H in zip(qs, self.s_plus)]
        sm = [q.sum() - a for q, a in zip(qs, sp)]
        tp = [q @ H for q, H in zip(qs, self.t_plus)]
        tm = [q.sum() - a for q, a in zip(qs, tp)]
        gibbs = self.ws @ (rho @ np.stack([q @ W for q, W in zip(qs, self.s_wrong)]))
        d_s = self.ws @ self._dis(sp, sm, rho)
        d_t = self.wt @ self._dis(tp, tm, rho)
        kl_post = sum(r * self._kl(q, P) for r, q, P in zip(rho, qs, self.priors) if r != 0)
        kl_total = kl_post + self._kl(rho, self.pi)
        p = self.p
        return float(self.c1 * gibbs + self.a2 * 0.5 * abs(d_t - d_s)
                     + (self.c1 / p.c + self.a2 / p.alpha) * (kl_total - np.log(p.delta)) / p.m
                     + 0.5 * (self.a2 - 1.0))


def _blocks(E: PosteriorEnsemble) -> list:
    return [q.weights.copy() for q in E.posteriors] + [E.rho.weights.copy()]


def _gradient(f: BoundObjective, blocks: list) -> list:
    grads = []
    for b, w in enumerate(blocks):
        g = np.zeros_like(w)
        for j in range(w.size):
            h = min(FD_STEP, w[j] / 2.0) if w[j] > 0 else FD_STEP
            up = [x.copy() for x in blocks]
            up[b][j] += h
            if w[j] > 0:
                dn = [x.copy() for x in blocks]
                dn[b][j] -= h
                g[j] = (f(up) - f(dn)) / (2.0 * h)
            else:
                g[j] = (f(up) - f(blocks)) / h
        # drop the component normal to the simplex
        grads.append(g - g.mean())
    return grads


def _step(blocks: list, grads: list, eta: float) -> list:
    out = []
    for w, g in zip(blocks, grads):
        logw = np.full(w.size, -np.inf)
        pos = w > 0
        logw[pos] = np.log(w[pos]) - eta * g[pos]
        logw -= logw[pos].max()
        nw = np.exp(logw)
        out.append(nw / nw.sum())
    return out


def _ensemble(E0: PosteriorEnsemble, blocks: list) -> PosteriorEnsemble:
    return E0.with_weights([Categorical(q) for q in blocks[:-1]], Categorical(blocks[-1]))


def minimize_da_bound(E0: PosteriorEnsemble, S: SampleSet, T: SampleSet, p: BoundParams,
                      max_iters: int = 100, eta0: float = 1.0, seed: int = 0,
                      mode: str = "literal") -> LearnTrace:
    """Minimize the bound over the posteriors and hyper-posterior of ``E0``.

    ``p.m`` and ``p.n`` are replaced by the sample sizes. The procedure is
    deterministic; ``seed`` is accepted so every command carries one.
    """
    del seed
    p = replace(p, m=S.n_points, n=T.n_points, kl_posterior=0.0, kl_hyper=0.0)
    f = BoundObjective(E0, S, T, p, mode)
    blocks = _blocks(E0)
    current = f(blocks)
    if not np.isfinite(current):
        raise ValueError("objective is infinite: a posterior puts mass where its prior has none")
    records = [LearnRecord(0, current, 0.0, True)]
    for it in range(1, max_iters + 1):
        grads = _gradient(f, blocks)
        eta = eta0
        accepted = False
        for _ in range(MAX_HALVINGS + 1):
            cand = _step(blocks, grads, eta)
            value = f(cand)
            if value <= current:
                accepted = True
                break
            eta *= 0.5
        if not accepted:
            records.append(LearnRecord(it, value, eta, False))
            break
        improvement = (current - value) / max(abs(current), 1e-300)
        blocks, current = cand, value
        records.append(LearnRecord(it, value, eta, True))
        if improvement < REL_TOL:
            break
    E = E0 if len(records) == 1 else _ensemble(E0, blocks)
    return LearnTrace(records, E)


__all__ = ["LearnRecord", "LearnTrace", "BoundObjective", "minimize_da_bound"]
