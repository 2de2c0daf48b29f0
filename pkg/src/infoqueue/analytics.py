"""Closed-form and semi-closed-form quantities of the unobservable queue
under the three information cases, as functions of the joining probability
``q`` or of the entrance fee ``p``."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np

from .errors import InfoQueueError, UnstableRegime
from .model import (BeliefDistribution, InfoCase, SystemParams, clipped_ratio_mean,
                    ensure_wait_finite, pk_rate_for_wait, pk_wait, pk_wait_slope)
from .numerics import bisect_decreasing

Q_TOL = 1e-12
CAP_MARGIN = 1e-9


def waiting_time(params: SystemParams, lambda_e: float) -> float:
    """Mean sojourn time (queueing delay plus service) at effective rate ``lambda_e``."""
    if lambda_e >= params.mu:
        raise UnstableRegime(f"effective rate {lambda_e} >= mu = {params.mu}")
    if lambda_e < 0:
        raise ValueError("negative effective rate")
    return pk_wait(lambda_e, params.mu, params.s2)


def xi_of_p(params: SystemParams, p: float) -> float:
    """Threshold effective arrival rate: the congestion at which joining is
    exactly worth the fee ``p``. Zero once ``p >= R - C/mu``."""
    surplus = params.R - p - params.C / params.mu
    if surplus <= 0:
        return 0.0
    if params.C == 0:
        return params.mu
    return 1.0 / (params.C * params.s2 / (2.0 * surplus) + 1.0 / params.mu)


def xi_inverse(params: SystemParams, x: float) -> float:
    """Fee that makes ``x`` the threshold effective arrival rate."""
    if x >= params.mu:
        raise UnstableRegime(f"threshold rate {x} >= mu = {params.mu}")
    mu = params.mu
    return params.R - params.C / mu - params.C * params.s2 * mu * x / (2.0 * (mu - x))


def u_classical(params: SystemParams, p: float, q: float) -> float:
    return params.R - p - params.C * waiting_time(params, q * params.lambda_true)


def expected_wait(params: SystemParams, belief: BeliefDistribution, q: float, power: int = 1) -> float:
    """E[W(q Lambda)**power]."""
    ensure_wait_finite(params, belief, q)
    mu, s2 = params.mu, params.s2
    if power == 1:
        return belief.expect(lambda x: pk_wait(q * x, mu, s2))
    return belief.expect(lambda x: pk_wait(q * x, mu, s2) ** power)


def u_shared(params: SystemParams, belief: BeliefDistribution, p: float, q: float) -> float:
    return params.R - p - params.C * expected_wait(params, belief, q)


def q_classical_of_p(params: SystemParams, p: float) -> float:
    return min(xi_of_p(params, p) / params.lambda_true, 1.0)


@dataclass(frozen=True)
class SharedThresholds:
    lambda_bar_S: float


def shared_saturation_threshold(params: SystemParams, belief: BeliefDistribution) -> SharedThresholds:
    """Threshold rate above which every shared-belief customer joins: the
    rate whose waiting time equals ``E[W(Lambda)]``, which is
    ``mu - 1/E[W(Lambda)]`` under exponential service.

    Raises :class:`UnstableRegime` when ``E[W(Lambda)]`` diverges (belief
    mass at or next to ``mu``).
    """
    ew = expected_wait(params, belief, 1.0)
    if not math.isfinite(ew):
        raise UnstableRegime("E[W(Lambda)] diverges")
    return SharedThresholds(pk_rate_for_wait(ew, params.mu, params.s2))


def _lambda_bar_or_cap(params, belief):
    try:
        return shared_saturation_threshold(params, belief).lambda_bar_S
    except UnstableRegime:
        return params.mu


def q_shared_of_p(params: SystemParams, belief: BeliefDistribution, p: float,
                  lambda_bar: Optional[float] = None) -> float:
    if params.R - p - params.C / params.mu <= 0:
        return 0.0
    lam_bar = _lambda_bar_or_cap(params, belief) if lambda_bar is None else lambda_bar
    if xi_of_p(params, p) >= lam_bar:
        return 1.0
    hi = min(1.0, (params.mu - CAP_MARGIN) / belief.lambda_max)
    target = (params.R - p) / params.C
    mu, s2 = params.mu, params.s2

    def excess(q):
        return target - belief.expect(lambda x: pk_wait(q * x, mu, s2))

    return min(bisect_decreasing(excess, 0.0, hi, tol=Q_TOL), 1.0)


def eq_private(params: SystemParams, belief: BeliefDistribution, p: float) -> float:
    """Aggregate joining probability E[Q(p)] = E[min(xi(p)/Lambda, 1)]."""
    return clipped_ratio_mean(belief, xi_of_p(params, p))


# --------------------------------------------------------------------------
# Objectives as functions of q


def rev_classical_q(params: SystemParams, q: float) -> float:
    """Revenue (= welfare) when everyone joins with probability ``q`` and
    the fee extracts the full surplus."""
    lam = params.lambda_true
    return q * lam * (params.R - params.C * waiting_time(params, q * lam))


sw_classical_q = rev_classical_q
sw_shared_q = rev_classical_q


def rev_classical_q_slope(params: SystemParams, q: float) -> float:
    lam, mu, s2 = params.lambda_true, params.mu, params.s2
    x = q * lam
    return lam * (params.R - params.C * (pk_wait(x, mu, s2) + x * pk_wait_slope(x, mu, s2)))


def rev_shared_q(params: SystemParams, belief: BeliefDistribution, q: float) -> float:
    return q * params.lambda_true * (params.R - params.C * expected_wait(params, belief, q))


def rev_shared_q_slope(params: SystemParams, belief: BeliefDistribution, q: float) -> float:
    """d Rev^S / dq, differentiated under the expectation."""
    ensure_wait_finite(params, belief, q)
    mu, s2 = params.mu, params.s2
    marginal = belief.expect(lambda x: pk_wait(q * x, mu, s2) + q * x * pk_wait_slope(q * x, mu, s2))
    return params.lambda_true * (params.R - params.C * marginal)


def physical_welfare_at_rate(params: SystemParams, rate: float) -> float:
    """Welfare rate when customers join at aggregate rate ``rate``."""
    if rate <= 0:
        return 0.0
    return rate * (params.R - params.C * waiting_time(params, rate))


# --------------------------------------------------------------------------
# Objectives as functions of p


def revenue(params: SystemParams, belief: BeliefDistribution, case: InfoCase, p: float) -> float:
    case = InfoCase(case)
    lam = params.lambda_true
    if case is InfoCase.CLASSICAL:
        return p * min(xi_of_p(params, p), lam)
    if case is InfoCase.SHARED:
        return p * lam * q_shared_of_p(params, belief, p)
    return p * lam * eq_private(params, belief, p)


def sw_private_expected(params: SystemParams, belief: BeliefDistribution, p: float) -> float:
    """E[lambda Q (R - C W(lambda Q))] with Q = min(xi/Lambda, 1) random."""
    xi = xi_of_p(params, p)
    if xi <= 0:
        return 0.0
    lam, R, C, mu, s2 = params.lambda_true, params.R, params.C, params.mu, params.s2

    def g(x):
        rate = lam * np.minimum(xi / x, 1.0)
        return rate * (R - C * pk_wait(rate, mu, s2))

    return belief.expect(g, kinks=(xi,))


def welfare(params: SystemParams, belief: BeliefDistribution, case: InfoCase, p: float,
            variant: str = "expected") -> float:
    """Social welfare rate at fee ``p``.

    For the private case ``variant`` selects between the expectation of the
    welfare over individual joining probabilities (``"expected"``) and the
    welfare realised at the aggregate joining rate (``"physical"``); the
    other cases have a single welfare.
    """
    case = InfoCase(case)
    lam = params.lambda_true
    if case is InfoCase.CLASSICAL:
        return physical_welfare_at_rate(params, lam * q_classical_of_p(params, p))
    if case is InfoCase.SHARED:
        return physical_welfare_at_rate(params, lam * q_shared_of_p(params, belief, p))
    if variant == "expected":
        return sw_private_expected(params, belief, p)
    if variant == "physical":
        return physical_welfare_at_rate(params, lam * eq_private(params, belief, p))
    raise ValueError(f"unknown welfare variant {variant!r}")


@dataclass
class MetricsRow:
    p: float
    xi: float
    q_C: Optional[float] = None
    q_S: Optional[float] = None
    EQ_P: Optional[float] = None
    rev_C: Optional[float] = None
    rev_S: Optional[float] = None
    rev_P: Optional[float] = None
    sw_C: Optional[float] = None
    sw_S: Optional[float] = None
    sw_P_expected: Optional[float] = None
    sw_P_physical: Optional[float] = None
    issues: dict = field(default_factory=dict)

    @classmethod
    def columns(cls):
        return [f.name for f in fields(cls) if f.name != "issues"]

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def metrics_row(params: SystemParams, belief: BeliefDistribution, p: float) -> MetricsRow:
    """Every per-fee quantity for the three cases; a failing field is left
    ``None`` and its reason recorded in ``issues``."""
    row = MetricsRow(p=p, xi=xi_of_p(params, p))
    lam = params.lambda_true
    lam_bar = _lambda_bar_or_cap(params, belief)

    def put(name, fn):
        try:
            setattr(row, name, fn())
        except InfoQueueError as exc:
            row.issues[name] = exc.code

    put("q_C", lambda: q_classical_of_p(params, p))
    put("q_S", lambda: q_shared_of_p(params, belief, p, lambda_bar=lam_bar))
    put("EQ_P", lambda: eq_private(params, belief, p))
    put("rev_C", lambda: p * min(row.xi, lam))
    if row.q_S is not None:
        put("rev_S", lambda: p * lam * row.q_S)
        put("sw_S", lambda: physical_welfare_at_rate(params, lam * row.q_S))
    if row.EQ_P is not None:
        put("rev_P", lambda: p * lam * row.EQ_P)
        put("sw_P_physical", lambda: physical_welfare_at_rate(params, lam * row.EQ_P))
    put("sw_C", lambda: physical_welfare_at_rate(params, lam * row.q_C))
    put("sw_P_expected", lambda: sw_private_expected(params, belief, p))
    return row
