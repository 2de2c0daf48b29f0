"""Equilibrium joining probabilities preferred by customers (individual),
the revenue maximiser and the social optimiser, for each information case."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

from .analytics import (CAP_MARGIN, expected_wait, q_shared_of_p, rev_shared_q_slope,
                        waiting_time, xi_of_p)
from .errors import NoJoin, NotMM1
from .model import BeliefDistribution, InfoCase, SystemParams, pk_wait, pk_wait_slope
from .numerics import bisect_decreasing

ROOT_TOL = 1e-13
ORDER_TOL = 1e-8
UNBIASED_RTOL = 1e-8


@dataclass
class EquilibriumSet:
    case: InfoCase
    q_e: float
    q_m: float
    q_s: float
    p_e: float
    p_m: Optional[float]
    p_s: Optional[float]
    notes: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d["case"] = self.case.value
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**{**d, "case": InfoCase(d["case"])})


def _classical_critical_rate(params: SystemParams) -> float:
    """Effective rate maximising x (R - C W(x)) over [0, mu)."""
    R, C, mu, s2 = params.R, params.C, params.mu, params.s2
    if C == 0:
        return mu
    if params.is_mm1:
        return mu - math.sqrt(C * mu / R)

    def slope(x):
        return R - C * (pk_wait(x, mu, s2) + x * pk_wait_slope(x, mu, s2))

    if slope(0.0) <= 0:
        return 0.0
    return bisect_decreasing(slope, 0.0, mu * (1 - 1e-15), tol=ROOT_TOL * mu)


def solve_classical(params: SystemParams) -> EquilibriumSet:
    lam = params.lambda_true
    q_e = min(xi_of_p(params, 0.0) / lam, 1.0)
    q_opt = min(_classical_critical_rate(params) / lam, 1.0)
    p_opt = params.R - params.C * waiting_time(params, q_opt * lam)
    return EquilibriumSet(InfoCase.CLASSICAL, q_e, q_opt, q_opt, 0.0, p_opt, p_opt)


def shared_fee_for(params: SystemParams, belief: BeliefDistribution, q: float) -> Optional[float]:
    """Fee inducing joining probability ``q`` under a shared belief, or
    ``None`` when ``q`` is beyond what any finite fee can induce."""
    if q * belief.lambda_max >= params.mu:
        return None
    return params.R - params.C * expected_wait(params, belief, q)


def _shared_rm_q(params: SystemParams, belief: BeliefDistribution) -> float:
    q_top = min(1.0, (params.mu - CAP_MARGIN) / belief.lambda_max)
    slope = lambda q: rev_shared_q_slope(params, belief, q)
    if slope(0.0) <= 0:
        return 0.0
    if q_top == 1.0 and slope(1.0) >= 0:
        return 1.0
    return bisect_decreasing(slope, 0.0, q_top, tol=ROOT_TOL)


def solve_shared(params: SystemParams, belief: BeliefDistribution) -> EquilibriumSet:
    if math.isclose(params.R * params.mu, params.C, rel_tol=1e-12):
        raise NoJoin("R*mu == C: no customer gains from joining")
    q_e = q_shared_of_p(params, belief, 0.0)
    q_m = _shared_rm_q(params, belief)
    q_s = solve_classical(params).q_s
    out = EquilibriumSet(InfoCase.SHARED, q_e, q_m, q_s, 0.0,
                         shared_fee_for(params, belief, q_m),
                         shared_fee_for(params, belief, q_s))
    if out.p_s is None:
        out.notes["p_s"] = "social optimum unreachable with a finite fee"
    return out


@dataclass
class PrivateRule:
    """Joining rule ``q(belief) = min(xi / belief, 1)`` under private beliefs."""

    regime: str
    xi: float
    fee: float
    mean_join: float

    def join_probability(self, believed_rate):
        return min(self.xi / believed_rate, 1.0)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def solve_private(params: SystemParams, belief: BeliefDistribution, regime: str = "individual",
                  welfare_variant: str = "expected") -> PrivateRule:
    from .analytics import eq_private
    from .decision import optimize_price

    if regime == "individual":
        fee = 0.0
    elif regime == "rm":
        fee, _ = optimize_price(params, belief, InfoCase.PRIVATE, "revenue")
    elif regime == "so":
        fee, _ = optimize_price(params, belief, InfoCase.PRIVATE, f"welfare_{welfare_variant}")
    else:
        raise ValueError(f"unknown regime {regime!r}")
    return PrivateRule(regime, xi_of_p(params, fee), fee, eq_private(params, belief, fee))


# --------------------------------------------------------------------------
# Ordering checks


@dataclass
class OrderingCheck:
    name: str
    claim: str
    hypothesis: str
    hypothesis_holds: bool
    observed: bool

    @property
    def asserted(self) -> bool:
        return self.hypothesis_holds


@dataclass
class OrderingReport:
    classical: EquilibriumSet
    shared: EquilibriumSet
    checks: list

    @property
    def violations(self):
        return [c for c in self.checks if c.asserted and not c.observed]

    def check(self, name) -> OrderingCheck:
        return next(c for c in self.checks if c.name == name)

    def to_dict(self):
        return {"classical": self.classical.to_dict(), "shared": self.shared.to_dict(),
                "checks": [asdict(c) | {"asserted": c.asserted} for c in self.checks]}


def _close(a, b, rtol=UNBIASED_RTOL):
    return math.isclose(a, b, rel_tol=rtol)


def check_orderings(params: SystemParams, belief: BeliefDistribution) -> OrderingReport:
    """Evaluate every equilibrium ordering claim for exponential service.

    Each check records whether its hypothesis holds numerically and whether
    the ordering is observed; only the former makes it an assertion.
    """
    if not params.is_mm1:
        raise NotMM1("equilibrium orderings are established for exponential service only")
    cl = solve_classical(params)
    sh = solve_shared(params, belief)
    lam = params.lambda_true
    le = lambda a, b: a <= b + ORDER_TOL
    eq = lambda a, b: abs(a - b) <= ORDER_TOL

    def unbiased(q, power=1):
        if q * belief.lambda_max >= params.mu:
            return False
        return _close(expected_wait(params, belief, q, power), waiting_time(params, q * lam) ** power)

    w_unbiased_s = unbiased(sh.q_s)
    checks = [
        OrderingCheck("classical", "q_m^C = q_s^C <= q_e^C", "none", True,
                      eq(cl.q_m, cl.q_s) and le(cl.q_s, cl.q_e)),
        OrderingCheck("rm_le_individual", "q_m^S <= q_e^S", "none", True, le(sh.q_m, sh.q_e)),
        OrderingCheck("so_le_individual", "q_s^S <= q_e^S", "p_s^S >= 0",
                      sh.p_s is not None and sh.p_s >= 0, le(sh.q_s, sh.q_e)),
        OrderingCheck("rm_eq_so", "q_m^S = q_s^S", "E[W^2(q_s Lambda)] = W^2(q_s lambda)",
                      unbiased(sh.q_s, 2), eq(sh.q_m, sh.q_s)),
        OrderingCheck("rm_le_so", "q_m^S <= q_s^S", "E[W(q_s Lambda)] = W(q_s lambda)",
                      w_unbiased_s, le(sh.q_m, sh.q_s)),
        OrderingCheck("full_ordering", "q_m^S <= q_s^S <= q_e^S", "E[W(q_s Lambda)] = W(q_s lambda)",
                      w_unbiased_s, le(sh.q_m, sh.q_s) and le(sh.q_s, sh.q_e)),
        OrderingCheck("so_matches_classical", "q_s^S = q_s^C", "none", True, eq(sh.q_s, cl.q_s)),
        OrderingCheck("individual_matches_classical", "q_e^S = q_e^C", "E[W(q_e Lambda)] = W(q_e lambda)",
                      unbiased(sh.q_e), eq(sh.q_e, cl.q_e)),
    ]
    return OrderingReport(cl, sh, checks)


_LABELS = ("q_m^S", "q_m^C", "q_s^C", "q_s^S", "q_e^S", "q_e^C")


def ordering_string(classical: EquilibriumSet, shared: EquilibriumSet, tol: float = ORDER_TOL) -> str:
    """Chain such as ``q_m^S < q_m^C = q_s^C = q_s^S < q_e^S < q_e^C = 1``."""
    values = dict(zip(_LABELS, (shared.q_m, classical.q_m, classical.q_s, shared.q_s,
                                shared.q_e, classical.q_e)))
    ranked = sorted(_LABELS, key=lambda k: values[k])
    groups = []
    for label in ranked:
        if groups and abs(values[label] - values[groups[-1][0]]) <= tol:
            groups[-1].append(label)
        else:
            groups.append([label])
    parts = [" = ".join(sorted(g, key=_LABELS.index)) for g in groups]
    text = " < ".join(parts)
    if abs(values[groups[-1][0]] - 1.0) <= tol:
        text += " = 1"
    return text
