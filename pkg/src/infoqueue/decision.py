"""Revenue/welfare comparisons across information cases, fee optimisation
and the manager's disclosure advice."""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .analytics import (_lambda_bar_or_cap, eq_private, q_shared_of_p, revenue,
                        shared_saturation_threshold, welfare, xi_inverse, xi_of_p)
from .equilibrium import solve_classical
from .errors import NoCrossing, NonUnimodal, NotMM1, OutOfSupport, UnstableRegime
from .model import BeliefDistribution, InfoCase, SystemParams, clipped_ratio_mean
from .numerics import bisect_sign_change, golden_section_max

EQ_RTOL = 1e-9
XI0_TOL = 1e-10
PRICE_TOL = 1e-9
N_SEEDS = 64
MODE_RTOL = 1e-6
OPT_RTOL = 1e-8

OBJECTIVES = ("revenue", "welfare_expected", "welfare_physical")


# --------------------------------------------------------------------------
# Threshold curve


def _a_of_xi(belief: BeliefDistribution, xi: float) -> float:
    """E[min(1/xi, 1/Lambda)]: mass below xi weighted 1/xi, the rest 1/Lambda."""
    return belief.expect(lambda x: np.minimum(1.0 / xi, 1.0 / x), kinks=(xi,))


def threshold_M(belief: BeliefDistribution, xi: float) -> float:
    """True arrival rate at which private and classical revenue coincide
    for threshold rate ``xi``; private revenue is higher above it."""
    if xi > belief.lambda_max * (1 + 1e-12):
        raise OutOfSupport(f"xi={xi} beyond lambda_max={belief.lambda_max}")
    if xi >= belief.lambda_max:
        return belief.lambda_max
    if xi <= belief.lambda_min:
        return belief.harmonic_mean
    return 1.0 / _a_of_xi(belief, xi)


class ThresholdCurve:
    """``xi -> M(xi)`` for one belief, with its two anchor values."""

    def __init__(self, belief: BeliefDistribution):
        self.belief = belief
        self.at_min = belief.harmonic_mean
        self.at_max = belief.lambda_max

    def __call__(self, xi):
        if np.ndim(xi):
            return np.array([threshold_M(self.belief, float(x)) for x in np.ravel(xi)]).reshape(np.shape(xi))
        return threshold_M(self.belief, xi)


# --------------------------------------------------------------------------
# Pointwise region classification


def _sign_label(a, b, rtol=EQ_RTOL):
    if abs(a - b) <= rtol * max(abs(a), abs(b), 1e-300):
        return "="
    return ">" if a > b else "<"


@dataclass
class RegionClass:
    """Revenue dominance at one ``(xi, lambda)`` point.

    ``pvc`` reads "private vs classical": ``">"`` means private revenue is
    higher. Labels compare aggregate joining rates, which orders revenue
    identically at any positive fee.
    """

    xi: float
    lam: float
    pvc: str
    svc: str
    pvs: str
    sources: dict = field(default_factory=dict)

    def consistent(self) -> bool:
        """True if some weak ordering of (P, S, C) realises all three labels."""
        rel = {"<": lambda a, b: a < b, "=": lambda a, b: a == b, ">": lambda a, b: a > b}
        pairs = [("P", "C", self.pvc), ("S", "C", self.svc), ("P", "S", self.pvs)]
        for ranks in itertools.product(range(3), repeat=3):
            r = dict(zip("PSC", ranks))
            if all(lab == "indeterminate" or rel[lab](r[a], r[b]) for a, b, lab in pairs):
                return True
        return False

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def _shared_vs_classical_guarantee(lam, xi, mean, lam_bar):
    if lam <= mean:
        return "guaranteed:S<=C"
    if lam <= lam_bar and xi >= lam:
        return "guaranteed:S<=C"
    if lam > lam_bar and xi >= lam_bar:
        return "guaranteed:S>=C"
    return "computed"


def _classify(lam, xi, belief, m_val, eq_val, qs_val, xi0, lam_bar):
    src = {}
    if xi >= belief.lambda_max:
        return RegionClass(xi, lam, "=", "=", "=", {"pvc": "guaranteed", "svc": "guaranteed", "pvs": "guaranteed"})
    pvc = _sign_label(lam, m_val)
    src["pvc"] = "guaranteed"
    svc = _sign_label(qs_val * lam, min(xi, lam))
    src["svc"] = _shared_vs_classical_guarantee(lam, xi, belief.mean, lam_bar)
    if xi0 is None:
        pvs = _sign_label(eq_val, qs_val)
        src["pvs"] = "computed"
    else:
        pvs = _sign_label(xi0, xi)
        src["pvs"] = "guaranteed"
    return RegionClass(xi, lam, pvc, svc, pvs, src)


def _xi0_or_none(params, belief):
    try:
        return find_xi0(params, belief)
    except NoCrossing:
        return None


def classify_region(params: SystemParams, belief: BeliefDistribution, p: float,
                    xi0: Optional[float] = None) -> RegionClass:
    """Which information case earns most at fee ``p``.

    ``xi0`` may be passed to avoid recomputing the private/shared crossover.
    """
    xi = xi_of_p(params, p)
    lam_bar = _lambda_bar_or_cap(params, belief)
    if xi0 is None and xi < belief.lambda_max:
        xi0 = _xi0_or_none(params, belief)
    m_val = threshold_M(belief, min(xi, belief.lambda_max))
    return _classify(params.lambda_true, xi, belief, m_val, eq_private(params, belief, p),
                     q_shared_of_p(params, belief, p, lambda_bar=lam_bar), xi0, lam_bar)


def find_xi0(params: SystemParams, belief: BeliefDistribution) -> float:
    """Threshold rate below which private beliefs out-earn a shared belief.

    Bisects ``E[Q] - q^S`` over ``[lambda_min, lambda_bar_S]``.
    """
    if belief.is_point_mass:
        raise NoCrossing("point-mass belief: private and shared joining coincide", identical=True)
    lam_bar = _lambda_bar_or_cap(params, belief)
    lo, hi = belief.lambda_min, min(lam_bar, belief.lambda_max)

    def gap(x):
        fee = xi_inverse(params, x)
        return clipped_ratio_mean(belief, x) - q_shared_of_p(params, belief, fee, lambda_bar=lam_bar)

    g_lo, g_hi = gap(lo), gap(hi)
    if g_lo == 0.0:
        return lo
    if g_hi == 0.0:
        return hi
    if (g_lo > 0) == (g_hi > 0):
        raise NoCrossing(f"E[Q] - q^S keeps sign {np.sign(g_lo):+.0f} on [{lo}, {hi}]")
    return bisect_sign_change(gap, lo, hi, tol=XI0_TOL, f_lo=g_lo)


# --------------------------------------------------------------------------
# Fee optimisation


def objective_fn(params, belief, case, objective):
    case = InfoCase(case)
    if objective == "revenue":
        return lambda p: revenue(params, belief, case, p)
    if objective in ("welfare_expected", "welfare_physical"):
        variant = objective.split("_", 1)[1]
        return lambda p: welfare(params, belief, case, p, variant=variant)
    raise ValueError(f"unknown objective {objective!r}")


def _local_maxima(values):
    """Grid indices of strict local peaks; a flat run counts once, at the
    index where it starts falling."""
    n = len(values)
    out = []
    for i in range(n):
        if i == 0:
            peak = values[0] > values[1]
        elif i == n - 1:
            peak = values[i] > values[i - 1]
        else:
            left, right = values[i - 1], values[i + 1]
            peak = values[i] >= left and values[i] >= right and values[i] > right
        if peak:
            out.append(i)
    return out


def optimize_price(params: SystemParams, belief: BeliefDistribution, case: InfoCase,
                   objective: str = "revenue") -> tuple:
    """Fee in ``[0, R - C/mu]`` maximising ``objective``; returns ``(p, value)``.

    Classical revenue under exponential service uses the closed-form
    optimal threshold rate; everything else is a 64-point scan followed by
    golden-section refinement of each local maximum. Raises
    :class:`NonUnimodal` if two distinct peaks differ materially.
    """
    case = InfoCase(case)
    p_max = params.max_fee
    if p_max <= 0:
        return 0.0, 0.0
    if case is InfoCase.CLASSICAL and objective == "revenue" and params.is_mm1:
        x = min(params.mu - math.sqrt(params.C * params.mu / params.R), params.lambda_true)
        p = xi_inverse(params, x)
        return p, p * x

    f = objective_fn(params, belief, case, objective)
    grid = np.linspace(0.0, p_max, N_SEEDS)
    vals = [f(p) for p in grid]
    step = grid[1] - grid[0]
    peaks = []
    candidates = _local_maxima(vals) or [int(np.argmax(vals))]
    for i in candidates:
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, N_SEEDS - 1)]
        p, v = golden_section_max(f, lo, hi, tol=PRICE_TOL)
        p, v = float(p), float(v)
        if not any(abs(p - q) <= 2 * step for q, _ in peaks):
            peaks.append((p, v))
    peaks.sort(key=lambda t: -t[1])
    best = peaks[0]
    for other in peaks[1:]:
        if abs(best[1] - other[1]) > MODE_RTOL * max(abs(best[1]), 1e-300):
            raise NonUnimodal(f"{case.value} {objective}: separated maxima {peaks}", peaks)
    return best


# --------------------------------------------------------------------------
# Optimal-value comparisons (exponential service)


def classical_optimal_rate(params: SystemParams) -> float:
    return min(params.mu - math.sqrt(params.C * params.mu / params.R), params.lambda_true)


def _holds(relation, a, b):
    tol = OPT_RTOL * max(abs(a), abs(b), 1.0)
    if relation in ("<=", "<"):
        return a <= b + tol
    if relation in (">=", ">"):
        return a >= b - tol
    return abs(a - b) <= tol


@dataclass
class RevenueComparison:
    harmonic_mean: float
    mean: float
    xi_C: float
    M_xi_C: float
    asserted: dict
    basis: dict
    optima: dict
    consistent: bool

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def compare_optimal_revenue(params: SystemParams, belief: BeliefDistribution) -> RevenueComparison:
    """Ordering of the optimal revenues implied by the structural results,
    checked against directly optimised values."""
    if not params.is_mm1:
        raise NotMM1("optimal-revenue ordering is established for exponential service only")
    lam = params.lambda_true
    hm, mean = belief.harmonic_mean, belief.mean
    xi_c = min(classical_optimal_rate(params), belief.lambda_max)
    m_c = threshold_M(belief, xi_c)
    asserted, basis = {}, {}
    if lam <= hm:
        asserted["P_vs_C"], basis["P_vs_C"] = "<=", "lambda <= 1/E[1/Lambda]"
    elif lam >= m_c:
        asserted["P_vs_C"], basis["P_vs_C"] = ">=", "lambda >= M(xi^C)"
    else:
        asserted["P_vs_C"], basis["P_vs_C"] = "<", "1/E[1/Lambda] < lambda < M(xi^C)"
    if lam <= mean:
        asserted["S_vs_C"], basis["S_vs_C"] = "<=", "lambda <= E[Lambda]"
    else:
        basis["S_vs_C"] = "computed only"
    optima = {c.value: list(optimize_price(params, belief, c, "revenue")) for c in InfoCase}
    value = {k: v[1] for k, v in optima.items()}
    ok = True
    if "P_vs_C" in asserted:
        ok &= _holds(asserted["P_vs_C"], value["private"], value["classical"])
    if "S_vs_C" in asserted:
        ok &= _holds(asserted["S_vs_C"], value["shared"], value["classical"])
    return RevenueComparison(hm, mean, xi_c, m_c, asserted, basis, optima, bool(ok))


@dataclass
class WelfareComparison:
    epsilon: float
    lambda_bar_S: Optional[float]
    xi_at_zero: float
    condition_i: bool
    condition_ii: bool
    asserted: Optional[str]
    optima: dict
    consistent: bool

    @property
    def applicable(self):
        return self.condition_i or self.condition_ii

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def welfare_conditions(params: SystemParams, belief: BeliefDistribution):
    eps = math.sqrt(params.C / (params.R * params.mu))
    try:
        lam_bar = shared_saturation_threshold(params, belief).lambda_bar_S
    except UnstableRegime:
        lam_bar = None
    xi0 = xi_of_p(params, 0.0)
    cond_i = lam_bar is not None and xi0 >= lam_bar
    cond_ii = (not cond_i) and belief.lambda_max <= (1 + eps) * params.lambda_true
    return eps, lam_bar, xi0, cond_i, cond_ii


def compare_optimal_welfare(params: SystemParams, belief: BeliefDistribution) -> WelfareComparison:
    if not params.is_mm1:
        raise NotMM1("optimal-welfare ordering is established for exponential service only")
    eps, lam_bar, xi0, cond_i, cond_ii = welfare_conditions(params, belief)
    optima = {
        "classical": list(optimize_price(params, belief, InfoCase.CLASSICAL, "welfare_physical")),
        "shared": list(optimize_price(params, belief, InfoCase.SHARED, "welfare_physical")),
        "private_expected": list(optimize_price(params, belief, InfoCase.PRIVATE, "welfare_expected")),
        "private_physical": list(optimize_price(params, belief, InfoCase.PRIVATE, "welfare_physical")),
    }
    asserted = None
    ok = True
    if cond_i or cond_ii:
        asserted = "SW_P <= SW_C = SW_S"
        v = {k: val[1] for k, val in optima.items()}
        ok = (_holds("=", v["classical"], v["shared"])
              and _holds("<=", v["private_expected"], v["classical"])
              and _holds("<=", v["private_physical"], v["classical"]))
    return WelfareComparison(eps, lam_bar, xi0, cond_i, cond_ii, asserted, optima, bool(ok))


# --------------------------------------------------------------------------
# Disclosure advice


def belief_regime(params: SystemParams, belief: BeliefDistribution):
    """``(regime, tie)`` from the true rate against 1/E[1/Lambda] and E[Lambda]."""
    lam, hm, mean = params.lambda_true, belief.harmonic_mean, belief.mean
    if lam <= hm:
        return "pessimistic", math.isclose(lam, hm, rel_tol=1e-12)
    if lam <= mean:
        return "neutral", math.isclose(lam, mean, rel_tol=1e-12)
    return "optimistic", False


@dataclass
class Advice:
    audience: str
    regime: str
    action: str
    fee: Optional[float]
    rationale: str
    numbers: dict
    boundary_tie: bool = False
    equivalent_information: bool = False
    caution: bool = False

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def _advise_rm(params, belief, regime, numbers):
    lam = params.lambda_true
    p_c, rev_c = optimize_price(params, belief, InfoCase.CLASSICAL, "revenue")
    numbers["classical_optimum"] = [p_c, rev_c]
    if regime == "pessimistic":
        return "reveal_true_rate", p_c, "customers overestimate congestion; reveal the true rate and price as in the classical case"
    if regime == "neutral":
        if lam < numbers["M_xi_C"]:
            return "reveal_true_rate", p_c, "lambda < M(xi^C): classical optimum dominates"
        p_p, rev_p = optimize_price(params, belief, InfoCase.PRIVATE, "revenue")
        numbers["private_optimum"] = [p_p, rev_p]
        return "conceal", p_p, "lambda >= M(xi^C): private-belief optimum dominates"
    p_p, rev_p = optimize_price(params, belief, InfoCase.PRIVATE, "revenue")
    p_s, rev_s = optimize_price(params, belief, InfoCase.SHARED, "revenue")
    numbers["private_optimum"] = [p_p, rev_p]
    numbers["shared_optimum"] = [p_s, rev_s]
    xi0 = _xi0_or_none(params, belief)
    crossover = xi_inverse(params, xi0) if xi0 is not None else None
    numbers["xi0"] = xi0
    numbers["crossover_fee"] = crossover
    best = max((rev_p, "private"), (rev_s, "shared"), (rev_c, "classical"))[1]
    if best == "private" and (crossover is None or p_p >= crossover):
        return "conceal", p_p, "optimistic customers and a high-price plan: keep beliefs private"
    fee = {"private": p_p, "shared": p_s, "classical": p_c}[best]
    numbers["best_case"] = best
    return "compute_case_by_case", fee, f"optimistic customers; computed optima favour the {best} case"


def _advise_so(params, belief, regime, numbers):
    eps, lam_bar, xi0, cond_i, cond_ii = welfare_conditions(params, belief)
    numbers.update(epsilon=eps, lambda_bar_S=lam_bar, xi_at_zero=xi0,
                   condition_i=cond_i, condition_ii=cond_ii)
    p_so = solve_classical(params).p_s
    if regime == "optimistic" or cond_i:
        return "reveal_true_rate", p_so, "revealing information cannot lower optimal welfare here", False
    if belief.lambda_max <= (1 + eps) * params.lambda_true:
        return "reveal_true_rate", p_so, "pessimism bounded by lambda_max <= (1+eps) lambda", False
    return ("compute_case_by_case", p_so,
            "pessimistic customers with wide right tail: revealing may not help, compare computed optima",
            True)


def advise(params: SystemParams, belief: BeliefDistribution, audience: str = "rm") -> Advice:
    """Disclosure recommendation for a revenue maximiser (``"rm"``) or a
    social optimiser (``"so"``)."""
    audience = audience.lower()
    if audience not in ("rm", "so"):
        raise ValueError(f"unknown audience {audience!r}")
    regime, tie = belief_regime(params, belief)
    numbers = {"harmonic_mean": belief.harmonic_mean, "mean": belief.mean,
               "lambda": params.lambda_true}
    if params.is_mm1:
        numbers["xi_C"] = min(classical_optimal_rate(params), belief.lambda_max)
        numbers["M_xi_C"] = threshold_M(belief, numbers["xi_C"])
    numbers["epsilon"] = math.sqrt(params.C / (params.R * params.mu))

    if belief.is_point_mass:
        fee = optimize_price(params, belief, InfoCase.CLASSICAL,
                             "revenue" if audience == "rm" else "welfare_physical")[0]
        return Advice(audience.upper(), regime, "reveal_true_rate", fee,
                      "beliefs are degenerate; all information cases coincide", numbers,
                      boundary_tie=tie, equivalent_information=True)
    if audience == "rm":
        if regime == "neutral" and "M_xi_C" not in numbers:
            raise NotMM1("neutral-regime advice needs exponential service")
        action, fee, why = _advise_rm(params, belief, regime, numbers)
        return Advice("RM", regime, action, fee, why, numbers, boundary_tie=tie)
    action, fee, why, caution = _advise_so(params, belief, regime, numbers)
    return Advice("SO", regime, action, fee, why, numbers, boundary_tie=tie, caution=caution)


# --------------------------------------------------------------------------
# Region map over (xi, lambda)


@dataclass
class ThresholdMap:
    cells: list
    m_curve: list
    xi0: Optional[float]
    xi0_line: list
    svc_curve: list
    triple_point: Optional[tuple]
    consistent: bool

    def to_dict(self):
        return {"cells": [c.to_dict() for c in self.cells], "m_curve": self.m_curve,
                "xi0": self.xi0, "xi0_line": self.xi0_line, "svc_curve": self.svc_curve,
                "triple_point": self.triple_point, "consistent": self.consistent}

    @classmethod
    def from_dict(cls, d):
        tp = d["triple_point"]
        return cls([RegionClass.from_dict(c) for c in d["cells"]], d["m_curve"], d["xi0"],
                   d["xi0_line"], d["svc_curve"], tuple(tp) if tp is not None else None,
                   d["consistent"])


def _svc_switch(params, belief, lam, xs, qs, lam_bar):
    """Threshold rates where shared and classical joining rates swap order
    at true rate ``lam``; ``qs`` holds q^S on the bracketing grid ``xs``."""

    def gap(x):
        q = q_shared_of_p(params, belief, xi_inverse(params, x), lambda_bar=lam_bar)
        return q * lam - min(x, lam)

    roots = []
    pts = [(x, q * lam - min(x, lam)) for x, q in zip(xs, qs) if x <= lam]
    for (x0, g0), (x1, g1) in zip(pts, pts[1:]):
        if g0 == 0.0:
            roots.append(float(x0))
        elif (g0 > 0) != (g1 > 0) and g1 != 0.0:
            roots.append(float(bisect_sign_change(gap, x0, x1, tol=XI0_TOL, f_lo=g0)))
    return roots


def region_map(params: SystemParams, belief: BeliefDistribution, xi_range=None,
                lambda_range=None, steps: int = 25) -> ThresholdMap:
    """Classify a ``steps x steps`` grid over ``(xi, lambda)`` and trace the
    three switch curves: ``lambda = M(xi)``, the vertical ``xi = xi0`` and the
    shared-vs-classical switch."""
    mu = params.mu
    if xi_range is None:
        xi_range = (min(0.5 * belief.lambda_min, belief.lambda_min), belief.lambda_max)
    if lambda_range is None:
        lambda_range = (0.8 * belief.lambda_min, min(belief.lambda_max * 1.1, 0.99 * mu))
    xi_lo, xi_hi = xi_range
    if xi_hi > belief.lambda_max:
        xi_hi = belief.lambda_max
    xis = np.linspace(xi_lo, xi_hi, steps)
    lams = np.linspace(*lambda_range, steps)
    lam_bar = _lambda_bar_or_cap(params, belief)
    xi0 = _xi0_or_none(params, belief)

    fees = [xi_inverse(params, x) for x in xis]
    m_vals = [threshold_M(belief, x) for x in xis]
    eq_vals = [clipped_ratio_mean(belief, x) for x in xis]
    qs_vals = [q_shared_of_p(params, belief, f, lambda_bar=lam_bar) for f in fees]
    cells = []
    for lam in lams:
        for x, m, e, q in zip(xis, m_vals, eq_vals, qs_vals):
            cells.append(_classify(float(lam), float(x), belief, m, e, q, xi0, lam_bar))

    m_curve = [[float(x), float(m)] for x, m in zip(xis, m_vals)]
    xi0_line = [[xi0, float(l)] for l in lams] if xi0 is not None else []
    # the switch curve often lives in a thin band of lambda; trace it over
    # that band as well as over the grid rows
    q_lo = qs_vals[0]
    band = []
    if q_lo > 0 and xi_lo > 0:
        band = list(np.linspace(xi_lo / q_lo, min(lam_bar, 0.999999 * mu), steps))
    svc_curve = []
    for lam in sorted({float(l) for l in lams} | set(band)):
        for root in _svc_switch(params, belief, lam, xis, qs_vals, lam_bar):
            svc_curve.append([root, lam])

    triple, consistent = None, all(c.consistent() for c in cells)
    if xi0 is not None:
        lam_star = threshold_M(belief, xi0)
        if lam_star < mu:
            triple = (xi0, lam_star)
            q0 = q_shared_of_p(params, belief, xi_inverse(params, xi0), lambda_bar=lam_bar)
            at = _classify(lam_star, xi0, belief, lam_star, clipped_ratio_mean(belief, xi0), q0,
                           xi0, lam_bar)
            # a coarse map grid can hide two nearby roots in one cell, so
            # bracket on a dedicated grid below the triple point
            local = np.linspace(belief.lambda_min, min(lam_bar, lam_star), N_SEEDS)
            local_q = [q_shared_of_p(params, belief, xi_inverse(params, x), lambda_bar=lam_bar)
                       for x in local]
            roots = _svc_switch(params, belief, lam_star, local, local_q, lam_bar)
            consistent = (consistent and at.pvc == at.svc == at.pvs == "="
                          and any(abs(r - xi0) <= 1e-6 for r in roots))
    return ThresholdMap(cells, m_curve, xi0, xi0_line, svc_curve, triple, consistent)
