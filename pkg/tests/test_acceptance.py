"""Acceptance criteria for the build, one test per criterion.

Run with ``pytest tests/test_acceptance.py``; the terminal summary ends with
one PASS/FAIL line per criterion.
"""
import math
import sys
import time

import numpy as np
import pytest

from infoqueue import reproduce
from infoqueue.analytics import (revenue, rev_classical_q, rev_shared_q,
                                 sw_classical_q, u_shared, xi_of_p)
from infoqueue.decision import (ThresholdCurve, advise, belief_regime, find_xi0, optimize_price,
                                threshold_M)
from infoqueue.equilibrium import ordering_string, solve_classical, solve_shared
from infoqueue.model import DiscreteBelief, InfoCase, SystemParams, UniformBelief, point_mass
from infoqueue.sim import SimConfig, analytic_targets, run

import expected_tables as ref
import oracles

pytestmark = pytest.mark.acceptance

TOL = 1e-3
BASE = SystemParams(R=5, C=5, mu=5, lambda_true=4.2)


def _close(got, want, tol=TOL):
    # reference values carry three decimals
    return abs(got - want) <= tol + 1e-12


def _table_mismatches(table, expected, text_cols):
    bad = []
    assert len(table.rows) == len(expected)
    for i, (row, want) in enumerate(zip(table.rows, expected), start=1):
        for col, (g, w) in enumerate(zip(row, want)):
            ok = g == w if col in text_cols else _close(g, w)
            if not ok:
                bad.append((i, table.columns[col], g, w))
    return bad


def _random_belief(rng, cap):
    if rng.random() < 0.5:
        lo = rng.uniform(0.05, 0.9) * cap
        hi = min(lo + rng.uniform(0.005, 0.6) * cap, 0.995 * cap)
        return UniformBelief(lo, hi)
    k = int(rng.integers(2, 6))
    vals = np.sort(rng.uniform(0.05, 0.995, k) * cap)
    w = rng.dirichlet(np.ones(k))
    w[-1] = 1.0 - w[:-1].sum()
    return DiscreteBelief(list(zip(vals.tolist(), w.tolist())))


def _random_params(rng, s2_free=False):
    mu = rng.uniform(1.0, 10.0)
    C = rng.uniform(0.1, 10.0)
    R = C / mu * rng.uniform(1.1, 25.0)
    lam = rng.uniform(0.05, 0.98) * mu
    s2 = rng.uniform(1.0, 3.0) / mu**2 if s2_free else None
    return SystemParams(R=R, C=C, mu=mu, lambda_true=lam, s2=s2)


@pytest.mark.criterion(1, "table reproduction, mean sweep")
def test_criterion_01():
    start = time.perf_counter()
    table = reproduce.table_mean()
    elapsed = time.perf_counter() - start
    assert _table_mismatches(table, ref.MEAN_TABLE, text_cols={0}) == []
    assert elapsed < 1.0, f"took {elapsed:.3f}s"


@pytest.mark.criterion(2, "table reproduction, spread sweep")
def test_criterion_02():
    table = reproduce.table_spread()
    assert _table_mismatches(table, ref.SPREAD_TABLE, text_cols={0, 1}) == []
    optimistic_private = [round(r[3], 3) for r in table.rows if r[0] == "optimistic"]
    assert optimistic_private == [5.921, 5.922, 5.927, 5.926, 5.910]


@pytest.mark.criterion(3, "table reproduction, fee sweeps and private/shared switch")
def test_criterion_03():
    opt = reproduce.table_p_optimistic()
    pes = reproduce.table_p_pessimistic()
    assert _table_mismatches(opt, ref.P_TABLE_OPTIMISTIC, text_cols=set()) == []
    assert _table_mismatches(pes, ref.P_TABLE_PESSIMISTIC, text_cols=set()) == []
    # private overtakes shared exactly once, between xi = 3.78 and xi = 3.649
    signs = [np.sign(r[2] - r[3]) for r in opt.rows]
    flips = [i for i in range(1, len(signs)) if signs[i] != signs[i - 1]]
    assert flips == [3]
    assert (round(opt.rows[2][1], 3), round(opt.rows[3][1], 3)) == (3.78, 3.649)
    xi0 = find_xi0(BASE, UniformBelief(3.6, 4.0))
    assert opt.rows[3][1] < xi0 < opt.rows[2][1]


@pytest.mark.criterion(4, "optimal fees and revenues")
def test_criterion_04():
    p_c, rev_c = optimize_price(BASE, UniformBelief(3.6, 4.0), InfoCase.CLASSICAL)
    p_p, rev_p = optimize_price(BASE, UniformBelief(3.6, 4.0), InfoCase.PRIVATE)
    assert abs(p_c - 2.764) <= 0.002 and abs(rev_c - 7.639) <= 0.002
    assert abs(rev_p - 8.451) <= 0.002


@pytest.mark.criterion(5, "equilibrium ordering in the two-point example")
def test_criterion_05():
    params = SystemParams(R=5, C=4, mu=4, lambda_true=3)
    belief = DiscreteBelief([(2.2, 0.5), (3.8, 0.5)])
    cl, sh = solve_classical(params), solve_shared(params, belief)
    assert ordering_string(cl, sh) == "q_m^S < q_m^C = q_s^C = q_s^S < q_e^S < q_e^C = 1"
    assert abs(cl.q_s - (4 - math.sqrt(3.2)) / 3) <= 1e-12
    assert abs(cl.q_m - cl.q_s) <= 1e-8 and abs(sh.q_s - cl.q_s) <= 1e-8
    assert abs(cl.q_e - 1.0) <= 1e-8
    assert sh.q_m < cl.q_m - 1e-8 and cl.q_s < sh.q_e - 1e-8 and sh.q_e < cl.q_e - 1e-8


@pytest.mark.criterion(6, "private vs classical revenue sign law, 1000 instances")
def test_criterion_06():
    rng = np.random.default_rng(2024)
    checked, violations = 0, []
    while checked < 1000:
        params = _random_params(rng)
        belief = _random_belief(rng, params.mu)
        p = rng.uniform(0.0, params.max_fee)
        xi = xi_of_p(params, p)
        if p <= 0 or xi >= belief.lambda_max:
            continue
        lam, m = params.lambda_true, threshold_M(belief, xi)
        checked += 1
        if abs(lam - m) <= 1e-9 * max(lam, m):
            continue
        diff = revenue(params, belief, InfoCase.PRIVATE, p) - revenue(params, belief, InfoCase.CLASSICAL, p)
        if np.sign(diff) != np.sign(lam - m):
            violations.append((params, belief, p, diff, lam - m))
    assert violations == []


@pytest.mark.criterion(7, "shape of the threshold curve M")
def test_criterion_07():
    rng = np.random.default_rng(77)
    for _ in range(20):
        lo = rng.uniform(0.2, 6.0)
        hi = lo + rng.uniform(0.01, 3.0)
        belief = UniformBelief(lo, hi)
        curve = ThresholdCurve(belief)
        xs = np.linspace(0.0, hi, 10_000)
        m = curve(xs)
        # continuity: no point departs from the midpoint of its neighbours
        # by more than smooth curvature allows
        jump = np.abs(m[1:-1] - 0.5 * (m[:-2] + m[2:])) / m[1:-1]
        assert jump.max() < 1e-6
        assert np.diff(m).min() >= -1e-12
        inner = np.linspace(lo, hi, 10_000)[1:-1]
        assert np.diff(curve(inner), 2).min() >= -1e-10
        assert curve(lo) == pytest.approx(belief.harmonic_mean, rel=1e-12)
        assert curve(hi) == hi
        # 10^4 equal-weight atoms at the cell midpoints of [lo, hi]
        atoms = lo + (hi - lo) * (np.arange(10_000) + 0.5) / 10_000
        grid = DiscreteBelief(list(zip(atoms.tolist(), [1e-4] * 10_000)))
        probe = np.linspace(0.0, grid.lambda_max, 100)
        cont = curve(probe)
        disc = np.array([threshold_M(grid, x) for x in probe])
        assert np.max(np.abs(disc - cont) / cont) <= 1e-4


@pytest.mark.criterion(8, "concavity and monotonicity in the joining probability")
def test_criterion_08():
    rng = np.random.default_rng(8)
    violations = []
    for _ in range(1000):
        params = _random_params(rng, s2_free=True)
        lo = rng.uniform(0.05, 0.9) * params.mu
        hi = min(lo + rng.uniform(0.005, 0.5) * params.mu, 0.99 * params.mu)
        belief = UniformBelief(lo, hi)
        top_s = min(1.0, 0.999 * params.mu / hi)
        top_c = min(1.0, 0.999 * params.mu / params.lambda_true)
        a, b, theta = rng.random(3)
        for name, fn, top in (("rev_S", lambda q: rev_shared_q(params, belief, q), top_s),
                              ("rev_C", lambda q: rev_classical_q(params, q), top_c),
                              ("sw_C", lambda q: sw_classical_q(params, q), top_c)):
            q1, q2 = a * top, b * top
            mid = theta * q1 + (1 - theta) * q2
            chord = theta * fn(q1) + (1 - theta) * fn(q2)
            if fn(mid) < chord - 1e-9 * max(1.0, abs(chord)):
                violations.append((name, params, belief, q1, q2, theta))
        q1, q2 = sorted((a * top_s, b * top_s))
        if q2 - q1 > 1e-9 and not u_shared(params, belief, 0.0, q2) < u_shared(params, belief, 0.0, q1):
            violations.append(("U_S", params, belief, q1, q2))
    assert violations == []


def _sim_configs():
    det = BASE.replace(s2=1 / 25)
    opt, pes = UniformBelief(3.6, 4.0), UniformBelief(4.4, 4.8)
    two = DiscreteBelief([(3.0, 0.5), (4.6, 0.5)])
    rows = [
        (BASE, opt, InfoCase.CLASSICAL, 1.5, "exponential"),
        (BASE, opt, InfoCase.CLASSICAL, 2.9, "exponential"),
        (BASE, opt, InfoCase.SHARED, 1.5, "exponential"),
        (BASE, pes, InfoCase.SHARED, 2.5, "exponential"),
        (BASE, opt, InfoCase.PRIVATE, 2.5, "exponential"),
        (BASE, two, InfoCase.PRIVATE, 0.9, "exponential"),
        (det, opt, InfoCase.CLASSICAL, 1.0, "deterministic"),
        (det, pes, InfoCase.SHARED, 1.5, "deterministic"),
        (det, opt, InfoCase.PRIVATE, 2.0, "deterministic"),
        (det, point_mass(4.2), InfoCase.PRIVATE, 0.5, "deterministic"),
    ]
    return [SimConfig(pr, b, c, p, horizon=1e6, warmup=100.0, seed=100 + i, service_dist=d)
            for i, (pr, b, c, p, d) in enumerate(rows)]


@pytest.mark.criterion(9, "simulator agrees with closed forms")
def test_criterion_09():
    start = time.perf_counter()
    misses = []
    for config in _sim_configs():
        report = run(config)
        targets = analytic_targets(config)
        for metric in ("join_fraction", "mean_wait", "revenue_rate"):
            est = getattr(report, metric)
            if not est.covers(targets[metric], k=3):
                misses.append((config.case.value, config.p, config.service_dist, metric,
                               est.mean, est.half_width, targets[metric]))
    elapsed = time.perf_counter() - start
    assert misses == []
    assert elapsed < 60.0, f"took {elapsed:.1f}s"


@pytest.mark.criterion(10, "disclosure advice and regime classification")
def test_criterion_10():
    optimistic = advise(BASE, UniformBelief(3.6, 4.0), "rm")
    pessimistic = advise(BASE, UniformBelief(4.4, 4.8), "rm")
    assert (optimistic.regime, optimistic.action) == ("optimistic", "conceal")
    assert (pessimistic.regime, pessimistic.action) == ("pessimistic", "reveal_true_rate")
    assert abs(optimistic.fee - 2.764) <= 0.002 and abs(pessimistic.fee - 2.764) <= 0.002

    rng = np.random.default_rng(10)
    for _ in range(100):
        params = _random_params(rng)
        belief = _random_belief(rng, params.mu)
        if isinstance(belief, UniformBelief):
            shape = ("uniform", belief.a, belief.b)
        else:
            shape = ("discrete", belief.points)
        hm = 1.0 / oracles.mean_over(shape, lambda t: 1.0 / t)
        mean = oracles.mean_over(shape, lambda t: t)
        lam = params.lambda_true
        want = "pessimistic" if lam <= hm else ("neutral" if lam <= mean else "optimistic")
        assert belief_regime(params, belief)[0] == want
        assert advise(params, belief, "so").regime == want


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
