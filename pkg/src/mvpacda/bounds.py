"""PAC-Bayesian bound evaluators.

Every evaluator is pure arithmetic on an empirical value and a
``BoundParams``; divergences are computed upstream (``measures``) and passed
in. Right-hand sides are reported unclamped, next to a clamped copy.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

from ._jsonfmt import format_real
from .measures import kl_inverse_lower, kl_inverse_upper

CSV_COLUMNS = ("bound_id", "m", "n", "delta", "c", "alpha", "kl_posterior", "kl_hyper",
               "emp_value", "lambda", "rhs", "rhs_clamped", "interval_lo", "interval_hi", "vacuous")

CATONI_NOTE = "Catoni complexity term read with omega := c"
DELTA_FNS = ("quadratic", "kl", "catoni")
FORMS = ("germain", "begin", "goyal")


@dataclass(frozen=True)
class BoundParams:
    m: int
    n: Optional[int] = None
    delta: float = 0.05
    c: float = 1.0
    alpha: float = 0.5
    kl_posterior: float = 0.0
    kl_hyper: float = 0.0
    renyi_alpha: Optional[float] = None
    # D_alpha(posterior || prior) for the Begin form, computed upstream like the KL terms
    renyi_posterior: Optional[float] = None

    def __post_init__(self):
        if self.n is None:
            object.__setattr__(self, "n", self.m)
        if int(self.m) != self.m or self.m < 1 or int(self.n) != self.n or self.n < 1:
            raise ValueError(f"m and n must be positive integers, got m={self.m}, n={self.n}")
        if not 0.0 < self.delta <= 1.0:
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")
        if not self.c > 0 or not self.alpha > 0:
            raise ValueError(f"c and alpha must be positive, got c={self.c}, alpha={self.alpha}")
        if not self.kl_posterior >= 0 or not self.kl_hyper >= 0:
            raise ValueError("KL terms must be nonnegative")
        if self.renyi_alpha is not None and not self.renyi_alpha > 1:
            raise ValueError(f"renyi_alpha must be > 1, got {self.renyi_alpha}")
        if self.renyi_posterior is not None and not self.renyi_posterior >= 0:
            raise ValueError("renyi_posterior must be nonnegative")

    @property
    def kl_total(self) -> float:
        return self.kl_posterior + self.kl_hyper

    def with_kl(self, kl_posterior: float, kl_hyper: float) -> "BoundParams":
        return replace(self, kl_posterior=kl_posterior, kl_hyper=kl_hyper)

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class BoundReport:
    bound_id: str
    lhs: str
    rhs: float
    params: BoundParams
    emp_value: float
    interval: Optional[tuple[float, float]] = None
    lam: Optional[float] = None
    emp_source: str = "sample"
    notes: tuple[str, ...] = ()
    extra: dict = field(default_factory=dict)

    @property
    def rhs_clamped(self) -> float:
        return min(max(self.rhs, 0.0), 1.0)

    @property
    def vacuous(self) -> bool:
        # also covers rhs = +inf from an infinite divergence
        return not self.rhs < 1.0

    def upper(self) -> float:
        """Value the bounded quantity must not exceed."""
        return self.rhs if self.interval is None else self.interval[1]

    def csv_row(self) -> list[str]:
        p = self.params

        def real(x):
            return "" if x is None else format_real(x)

        lo, hi = self.interval if self.interval is not None else (None, None)
        return [self.bound_id, str(p.m), str(p.n), real(p.delta), real(p.c), real(p.alpha),
                real(p.kl_posterior), real(p.kl_hyper), real(self.emp_value), real(self.lam),
                real(self.rhs), real(self.rhs_clamped), real(lo), real(hi),
                "true" if self.vacuous else "false"]


def catoni_coefficient(c: float) -> float:
    """``c / (1 - exp(-c))``, with the series limit ``1 + c/2`` below 1e-8."""
    if not c > 0:
        raise ValueError(f"c must be positive, got {c}")
    if c < 1e-8:
        return 1.0 + 0.5 * c
    return c / -math.expm1(-c)


def _check_emp(x: float) -> float:
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"empirical value must lie in [0, 1], got {x}")
    return x


def _symmetric(bound_id, lhs, emp, dev, p, **kw) -> BoundReport:
    if math.isinf(dev):
        return BoundReport(bound_id, lhs, math.inf, p, emp, (0.0, 1.0), **kw)
    interval = (max(emp - dev, 0.0), min(emp + dev, 1.0))
    return BoundReport(bound_id, lhs, emp + dev, p, emp, interval, extra={"deviation": dev}, **kw)


def _kl_interval(bound_id, lhs, emp, eps, p, **kw) -> BoundReport:
    if math.isinf(eps):
        return BoundReport(bound_id, lhs, math.inf, p, emp, (0.0, 1.0), **kw)
    lo, hi = kl_inverse_lower(emp, eps), kl_inverse_upper(emp, eps)
    return BoundReport(bound_id, lhs, hi, p, emp, (lo, hi), extra={"epsilon": eps}, **kw)


def _log_moment(m: int) -> float:
    # ln(2 sqrt(m)), the Maurer moment bound
    return math.log(2.0) + 0.5 * math.log(m)


# -- single-view theorems --------------------------------------------------

def mcallester_deviation(p: BoundParams, kl: float | None = None) -> float:
    kl = p.kl_posterior if kl is None else kl
    return math.sqrt((kl + _log_moment(p.m) - math.log(p.delta)) / (2.0 * p.m))


def mcallester_bound(emp: float, p: BoundParams, kl: float | None = None,
                     bound_id: str = "thm2") -> BoundReport:
    """``emp +- sqrt((KL + ln(2 sqrt(m) / delta)) / (2m))``; ``KL`` defaults to ``kl_posterior``."""
    emp = _check_emp(emp)
    return _symmetric(bound_id, "R(G_Q)", emp, mcallester_deviation(p, kl), p)


def seeger_epsilon(p: BoundParams, kl: float | None = None) -> float:
    kl = p.kl_posterior if kl is None else kl
    return (kl + _log_moment(p.m) - math.log(p.delta)) / p.m


def seeger_bound(emp: float, p: BoundParams, kl: float | None = None,
                 bound_id: str = "thm1") -> BoundReport:
    """``{r : kl(emp || r) <= (KL + ln(2 sqrt(m) / delta)) / m}``."""
    emp = _check_emp(emp)
    return _kl_interval(bound_id, "R(G_Q)", emp, seeger_epsilon(p, kl), p)


def catoni_bound(emp: float, p: BoundParams, kl: float | None = None,
                 bound_id: str = "thm3") -> BoundReport:
    """``c' [emp + (KL + ln(1/delta)) / (m c)]``."""
    emp = _check_emp(emp)
    kl = p.kl_posterior if kl is None else kl
    rhs = catoni_coefficient(p.c) * (emp + (kl - math.log(p.delta)) / (p.m * p.c))
    return BoundReport(bound_id, "R(G_Q)", rhs, p, emp, notes=(CATONI_NOTE,))


def germain_dis_bound(emp_dis: float, p: BoundParams, kl: float | None = None,
                      bound_id: str = "thm4") -> BoundReport:
    """``a' [emp_dis + (2 KL + ln(2/delta)) / (m alpha) + 1] - 1`` with ``a' = c'(2 alpha)``."""
    emp_dis = _check_emp(emp_dis)
    kl = p.kl_posterior if kl is None else kl
    a2 = catoni_coefficient(2.0 * p.alpha)
    rhs = a2 * (emp_dis + (2.0 * kl + math.log(2.0 / p.delta)) / (p.m * p.alpha) + 1.0) - 1.0
    return BoundReport(bound_id, "dis_Q(Q_X, P_X)", rhs, p, emp_dis)


def da_bound_population(gibbs_src: float, dis: float, lam: float) -> BoundReport:
    """``R_Q(G) + dis / 2 + lambda``, the population domain-adaptation bound."""
    for x in (gibbs_src, dis, lam):
        _check_emp(x)
    p = BoundParams(m=1, delta=1.0)
    return BoundReport("thm7", "R_P(G)", gibbs_src + 0.5 * dis + lam, p, gibbs_src, lam=lam,
                       emp_source="population", extra={"dis": dis})


# -- general convex-deviation form ----------------------------------------

def _parse_delta_fn(delta_fn: str) -> tuple[str, Optional[float]]:
    if delta_fn in ("quadratic", "kl"):
        return delta_fn, None
    if delta_fn.startswith("catoni(") and delta_fn.endswith(")"):
        return "catoni", float(delta_fn[len("catoni("):-1])
    raise ValueError(f"unknown deviation function {delta_fn!r}")


def general_delta_bound(emp: float, delta_fn: str, moment_bound: float, p: BoundParams,
                        form: str = "germain", instance: str = "gibbs") -> BoundReport:
    """Bound from a convex deviation ``Delta`` and a bound on its exponential moment.

    ``delta_fn`` is ``quadratic`` (``2 (a - b)^2``), ``kl`` or ``catoni(c)``;
    ``instance="dis"`` selects the disagreement version with doubled KL terms.
    The germain and goyal forms give the budget
    ``B = (KL terms + ln(moment_bound / delta)) / m``; the begin form gives
    ``B = exp((D_alpha + ln(moment_bound / delta)) / alpha')`` with
    ``alpha' = alpha / (alpha - 1)``. ``Delta(emp, b) <= B`` is then solved for
    ``b``. For ``catoni(c)`` the solution uses ``1 - exp(-x) <= x`` and reads
    ``c' (emp + B / c)``.
    """
    emp = _check_emp(emp)
    kind, cc = _parse_delta_fn(delta_fn)
    if form not in FORMS:
        raise ValueError(f"unknown form {form!r}; expected one of {FORMS}")
    if instance not in ("gibbs", "dis"):
        raise ValueError(f"unknown instance {instance!r}")
    if not moment_bound > 0:
        raise ValueError(f"moment bound must be positive, got {moment_bound}")
    log_term = math.log(moment_bound) - math.log(p.delta)
    if form == "begin":
        if p.renyi_alpha is None or p.renyi_posterior is None:
            raise ValueError("the begin form needs renyi_alpha and renyi_posterior")
        a_conj = p.renyi_alpha / (p.renyi_alpha - 1.0)
        budget = math.exp((p.renyi_posterior + log_term) / a_conj)
    else:
        kl = p.kl_posterior + (p.kl_hyper if form == "goyal" or instance == "dis" else 0.0)
        if instance == "dis":
            kl = 2.0 * kl
        budget = (kl + log_term) / p.m
    bound_id = f"general[{form},{delta_fn},{instance}]"
    lhs = "R(G)" if instance == "gibbs" else "dis(Q_X, P_X)"
    if kind == "quadratic":
        return _symmetric(bound_id, lhs, emp, math.sqrt(budget / 2.0), p)
    if kind == "kl":
        return _kl_interval(bound_id, lhs, emp, budget, p)
    rhs = catoni_coefficient(cc) * (emp + budget / cc)
    return BoundReport(bound_id, lhs, rhs, p, emp, notes=(CATONI_NOTE,))


# -- multi-view disagreement corollaries ----------------------------------

def cor1_deviation(p: BoundParams, size: int | None = None) -> float:
    size = p.m if size is None else size
    return math.sqrt((2.0 * p.kl_total + _log_moment(size) - math.log(p.delta)) / (2.0 * size))


def cor1_dis_mcallester(emp_dis: float, p: BoundParams) -> BoundReport:
    emp_dis = _check_emp(emp_dis)
    return _symmetric("cor1", "dis^MV(Q_X, P_X)", emp_dis, cor1_deviation(p), p)


def cor2_dis_catoni(emp_dis: float, p: BoundParams) -> BoundReport:
    """``a' [emp_dis + (KL_post + KL_hyper + ln sqrt(1/delta)) / (m alpha)]``."""
    emp_dis = _check_emp(emp_dis)
    a2 = catoni_coefficient(2.0 * p.alpha)
    rhs = a2 * (emp_dis + (p.kl_total - 0.5 * math.log(p.delta)) / (p.m * p.alpha))
    return BoundReport("cor2", "dis^MV(Q_X, P_X)", rhs, p, emp_dis)


def cor3_epsilon(p: BoundParams) -> float:
    return (2.0 * p.kl_total + _log_moment(p.m) - math.log(p.delta)) / p.m


def cor3_dis_kl(emp_dis: float, p: BoundParams) -> BoundReport:
    emp_dis = _check_emp(emp_dis)
    return _kl_interval("cor3", "dis^MV(Q_X, P_X)", emp_dis, cor3_epsilon(p), p)


def cor4_deviation(p: BoundParams) -> float:
    return cor1_deviation(p, p.m) + cor1_deviation(p, p.n)


def cor4_dis_unequal(emp_dis: float, p: BoundParams) -> BoundReport:
    emp_dis = _check_emp(emp_dis)
    return _symmetric("cor4", "dis^MV(Q_X, P_X)", emp_dis, cor4_deviation(p), p)


# -- multi-view Gibbs risk and the final bound ----------------------------

def goyal_mv_gibbs_bound(emp_gibbs: float, p: BoundParams) -> BoundReport:
    """``c' [emp + (KL_post + KL_hyper + ln(1/delta)) / (m c)]``."""
    emp_gibbs = _check_emp(emp_gibbs)
    rhs = catoni_coefficient(p.c) * (emp_gibbs + (p.kl_total - math.log(p.delta)) / (p.m * p.c))
    return BoundReport("goyal", "R_Q(G^MV)", rhs, p, emp_gibbs, notes=(CATONI_NOTE,))


def da_pac_bound(emp_gibbs_src: float, emp_dis: float, lam: float, p: BoundParams) -> BoundReport:
    """Target Gibbs risk bound from the two Catoni-type ingredients.

    ``c' g + a' dis / 2 + (c'/c + a'/alpha)(KL_post + KL_hyper + ln(1/delta)) / m
    + lambda + (a' - 1) / 2``.
    """
    g = _check_emp(emp_gibbs_src)
    d = _check_emp(emp_dis)
    _check_emp(lam)
    c1 = catoni_coefficient(p.c)
    a2 = catoni_coefficient(2.0 * p.alpha)
    rhs = (c1 * g + a2 * 0.5 * d + (c1 / p.c + a2 / p.alpha) * (p.kl_total - math.log(p.delta)) / p.m
           + lam + 0.5 * (a2 - 1.0))
    return BoundReport("thm9", "R_P(G^MV)", rhs, p, g, lam=lam, extra={"emp_dis": d})


__all__ = [
    "CSV_COLUMNS", "BoundParams", "BoundReport", "catoni_coefficient", "mcallester_deviation",
    "mcallester_bound", "seeger_epsilon", "seeger_bound", "catoni_bound", "germain_dis_bound",
    "da_bound_population", "general_delta_bound", "cor1_deviation", "cor1_dis_mcallester",
    "cor2_dis_catoni", "cor3_epsilon", "cor3_dis_kl", "cor4_deviation", "cor4_dis_unequal",
    "goyal_mv_gibbs_bound", "da_pac_bound",
]
