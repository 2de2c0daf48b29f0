"""Unobservable queues where customers hold beliefs about the arrival rate:
equilibria, revenue and welfare under classical, shared and private
information, disclosure advice and a simulator to check it all."""
from .analytics import metrics_row, q_shared_of_p, revenue, welfare, xi_inverse, xi_of_p
from .decision import (advise, classify_region, compare_optimal_revenue, compare_optimal_welfare,
                       region_map, find_xi0, optimize_price, threshold_M)
from .equilibrium import check_orderings, solve_classical, solve_private, solve_shared
from .errors import InfoQueueError
from .model import (BeliefDistribution, DiscreteBelief, InfoCase, SystemParams, TabulatedBelief,
                    UniformBelief, point_mass, validate)

__version__ = "0.1.0"

__all__ = [
    "BeliefDistribution", "DiscreteBelief", "InfoCase", "InfoQueueError", "SystemParams",
    "TabulatedBelief", "UniformBelief", "advise", "check_orderings", "classify_region",
    "compare_optimal_revenue", "compare_optimal_welfare", "region_map", "find_xi0",
    "metrics_row", "optimize_price", "point_mass", "q_shared_of_p", "revenue", "solve_classical",
    "solve_private", "solve_shared", "threshold_M", "validate", "welfare", "xi_inverse", "xi_of_p",
]
