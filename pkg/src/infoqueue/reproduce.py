"""Fixed experiment set-ups for the reference tables and plot data.

Every target is a pure function returning a :class:`Table`; the CLI only
formats it.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .analytics import eq_private, q_shared_of_p, xi_of_p
from .decision import region_map, threshold_M
from .equilibrium import check_orderings, ordering_string
from .model import (BeliefDistribution, DiscreteBelief, SystemParams, UniformBelief, pk_wait,
                    point_mass)

BASE = dict(R=5.0, C=5.0, mu=5.0, lambda_true=4.2)
TABLE_FEE = 1.5
P_GRID = (0.1, 0.5, 0.9, 1.3, 1.7, 2.1, 2.5, 2.9, 3.3, 3.7)


@dataclass
class Table:
    name: str
    columns: list
    rows: list
    extra: dict = field(default_factory=dict)

    def records(self):
        return [dict(zip(self.columns, r)) for r in self.rows]

    def to_dict(self):
        return {"name": self.name, "columns": self.columns, "rows": self.records(), **self.extra}


def base_params() -> SystemParams:
    return SystemParams(**BASE)


def _num(x):
    s = f"{x:g}"
    return s if "." in s or "e" in s else s + ".0"


def belief_label(belief: BeliefDistribution) -> str:
    if belief.is_point_mass:
        return _num(belief.lambda_min)
    if isinstance(belief, UniformBelief):
        return f"U({_num(belief.a)}, {_num(belief.b)})"
    return belief.describe()


def revenues(params, belief, p):
    lam = params.lambda_true
    xi = xi_of_p(params, p)
    return (p * lam * eq_private(params, belief, p),
            p * lam * q_shared_of_p(params, belief, p),
            p * min(xi, lam))


def _uniform(a, b):
    a, b = round(a, 10), round(b, 10)
    return point_mass(a) if a == b else UniformBelief(a, b)


def table_mean() -> Table:
    params = base_params()
    xi = xi_of_p(params, TABLE_FEE)
    rows = []
    for k in range(11):
        a = 3.4 + 0.1 * k
        belief = _uniform(a, a + 0.6)
        rows.append([belief_label(belief), belief.harmonic_mean, belief.mean,
                     threshold_M(belief, min(xi, belief.lambda_max)),
                     *revenues(params, belief, TABLE_FEE)])
    return Table("table-mean", ["belief", "inv_mean_inv", "mean", "M_xi", "rev_P", "rev_S", "rev_C"],
                 rows, {"p": TABLE_FEE, "xi": xi})


def table_spread() -> Table:
    params = base_params()
    rows = []
    for level, centre in (("unbiased", 4.2), ("optimistic", 3.8), ("pessimistic", 4.6)):
        for k in range(5):
            h = 0.1 * k
            belief = _uniform(centre - h, centre + h)
            rows.append([level, belief_label(belief), belief.mean,
                         *revenues(params, belief, TABLE_FEE)])
    return Table("table-spread", ["level", "belief", "mean", "rev_P", "rev_S", "rev_C"], rows,
                 {"p": TABLE_FEE})


def _table_p(name, belief):
    params = base_params()
    rows = [[p, xi_of_p(params, p), *revenues(params, belief, p)] for p in P_GRID]
    return Table(name, ["p", "xi", "rev_P", "rev_S", "rev_C"], rows,
                 {"belief": belief_label(belief)})


def table_p_optimistic() -> Table:
    return _table_p("table-p-optimistic", UniformBelief(3.6, 4.0))


def table_p_pessimistic() -> Table:
    return _table_p("table-p-pessimistic", UniformBelief(4.4, 4.8))


def two_point_setup():
    return (SystemParams(R=5.0, C=4.0, mu=4.0, lambda_true=3.0),
            DiscreteBelief([(2.2, 0.5), (3.8, 0.5)]))


def fig_equilibria(n_points: int = 101) -> Table:
    """Marginal-cost and waiting curves against q whose crossings with the
    R/C line locate each equilibrium, plus the equilibria themselves."""
    params, belief = two_point_setup()
    report = check_orderings(params, belief)
    cl, sh = report.classical, report.shared
    mu, s2, lam = params.mu, params.s2, params.lambda_true
    q_top = min(1.0, 0.999 * mu / belief.lambda_max)
    rows = []
    for q in np.linspace(0.0, q_top, n_points):
        x = q * np.array(belief.values)
        w = pk_wait(x, mu, s2)
        slope = mu * s2 / (2.0 * (mu - x) ** 2)      # d/dx of the P-K sojourn
        rows.append([float(q),
                     float(np.dot(belief.weights, w + x * slope)),
                     float(pk_wait(q * lam, mu, s2) + q * lam * mu * s2 / (2.0 * (mu - q * lam) ** 2)),
                     float(np.dot(belief.weights, w)),
                     float(pk_wait(q * lam, mu, s2)),
                     params.R / params.C])
    extra = {
        "equilibria": {"q_m^S": sh.q_m, "q_m^C": cl.q_m, "q_s^C": cl.q_s, "q_s^S": sh.q_s,
                       "q_e^S": sh.q_e, "q_e^C": cl.q_e},
        "ordering": ordering_string(cl, sh),
        "violations": [c.name for c in report.violations],
    }
    return Table("fig-equilibria",
                 ["q", "marginal_shared", "marginal_classical", "wait_shared", "wait_classical",
                  "R_over_C"], rows, extra)


def fig_regions(steps: int = 25) -> Table:
    params, belief = base_params(), UniformBelief(3.6, 4.0)
    m = region_map(params, belief, steps=steps)
    rows = [[c.xi, c.lam, c.pvc, c.svc, c.pvs] for c in m.cells]
    extra = {"m_curve": m.m_curve, "xi0": m.xi0, "xi0_line": m.xi0_line, "svc_curve": m.svc_curve,
             "triple_point": m.triple_point, "consistent": m.consistent}
    return Table("fig-regions", ["xi", "lambda", "pvc", "svc", "pvs"], rows, extra)


TARGETS = {
    "table-mean": table_mean,
    "table-spread": table_spread,
    "table-p-optimistic": table_p_optimistic,
    "table-p-pessimistic": table_p_pessimistic,
    "fig-equilibria": fig_equilibria,
    "fig-regions": fig_regions,
}
