"""Discrete-event simulation of the unobservable single-server queue.

Arrivals are Poisson at the true rate; each one decides to join with the
probability its information case prescribes, and joined customers are
served first-come first-served. Waiting times come from the Lindley
recursion, vectorised as a running minimum of partial sums.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from .analytics import (eq_private, physical_welfare_at_rate, q_classical_of_p,
                        q_shared_of_p, waiting_time, xi_of_p)
from .errors import UnstableEffective, ValidationError
from .model import BeliefDistribution, InfoCase, SystemParams, belief_from_dict

SERVICE_DISTS = ("exponential", "deterministic", "lognormal")
MOMENT_TOL = 1e-9
SATURATION = 0.999


@dataclass
class SimConfig:
    params: SystemParams
    belief: BeliefDistribution
    case: InfoCase
    p: float
    horizon: float = 1e5
    warmup: float = 0.0
    seed: int = 0
    service_dist: str = "exponential"
    n_batches: int = 20

    def __post_init__(self):
        self.case = InfoCase(self.case)
        if not self.horizon > self.warmup >= 0:
            raise ValidationError(f"need horizon > warmup >= 0, got {self.horizon}, {self.warmup}")
        if self.n_batches < 20:
            raise ValidationError("at least 20 batches are needed for batch-means intervals")
        if self.service_dist not in SERVICE_DISTS:
            raise ValidationError(f"unknown service distribution {self.service_dist!r}")
        mu, s2 = self.params.mu, self.params.s2
        if self.service_dist == "exponential":
            implied = 2.0 / mu**2
        elif self.service_dist == "deterministic":
            implied = 1.0 / mu**2
        else:
            implied = s2 if s2 > 1.0 / mu**2 else None
        if implied is None or abs(implied - s2) > MOMENT_TOL * max(s2, 1.0):
            raise ValidationError(
                f"{self.service_dist} service cannot have mean 1/mu and second moment {s2}")

    def to_dict(self):
        return {"params": self.params.to_dict(), "belief": self.belief.to_dict(),
                "case": self.case.value, "p": self.p, "horizon": self.horizon,
                "warmup": self.warmup, "seed": self.seed, "service_dist": self.service_dist,
                "n_batches": self.n_batches}

    @classmethod
    def from_dict(cls, d):
        return cls(SystemParams.from_dict(d["params"]), belief_from_dict(d["belief"]),
                   InfoCase(d["case"]), d["p"], d["horizon"], d["warmup"], d["seed"],
                   d["service_dist"], d["n_batches"])


@dataclass
class Estimate:
    """Point estimate with a 95% batch-means half-width."""

    mean: float
    half_width: float

    def covers(self, value, k=3.0, atol=1e-12):
        return abs(self.mean - value) <= k * self.half_width + atol * max(1.0, abs(value))


@dataclass
class SimReport:
    case: str
    p: float
    seed: int
    horizon: float
    warmup: float
    service_dist: str
    n_arrivals: int
    n_joined: int
    join_fraction: Estimate
    mean_wait: Optional[Estimate]
    revenue_rate: Estimate
    welfare_rate_physical: Estimate
    utilization: float

    def to_dict(self):
        return asdict(self)

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for k in ("join_fraction", "mean_wait", "revenue_rate", "welfare_rate_physical"):
            if d[k] is not None:
                d[k] = Estimate(**d[k])
        return cls(**d)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass
class SamplePath:
    """Raw per-arrival outcome of one run, warmup included."""

    arrivals: np.ndarray
    beliefs: Optional[np.ndarray]
    joined: np.ndarray
    sojourn: np.ndarray        # one entry per joined customer
    service: np.ndarray        # one entry per joined customer

    @property
    def join_times(self):
        return self.arrivals[self.joined]


def join_probability(config: SimConfig) -> float:
    """Aggregate joining probability the simulator should reproduce."""
    params, belief, p = config.params, config.belief, config.p
    if config.case is InfoCase.CLASSICAL:
        return q_classical_of_p(params, p)
    if config.case is InfoCase.SHARED:
        return q_shared_of_p(params, belief, p)
    return eq_private(params, belief, p)


def _poisson_times(rng, rate, horizon):
    expected = rate * horizon
    chunk = int(expected + 6.0 * math.sqrt(expected) + 16)
    times = np.cumsum(rng.exponential(1.0 / rate, chunk))
    while times[-1] < horizon:
        more = np.cumsum(rng.exponential(1.0 / rate, chunk)) + times[-1]
        times = np.concatenate([times, more])
    return times[times < horizon]


def _service_times(rng, config, n):
    mu = config.params.mu
    if config.service_dist == "exponential":
        return rng.exponential(1.0 / mu, n)
    if config.service_dist == "deterministic":
        return np.full(n, 1.0 / mu)
    m1, s2 = 1.0 / mu, config.params.s2
    sigma2 = math.log(s2 / m1**2)
    return rng.lognormal(math.log(m1) - 0.5 * sigma2, math.sqrt(sigma2), n)


def sample_path(config: SimConfig) -> SamplePath:
    rng = np.random.default_rng(config.seed)
    params = config.params
    arrivals = _poisson_times(rng, params.lambda_true, config.horizon)
    n = arrivals.size
    beliefs = None
    if config.case is InfoCase.PRIVATE:
        beliefs = config.belief.sample(rng, n)
        xi = xi_of_p(params, config.p)
        q = np.minimum(xi / beliefs, 1.0)
    else:
        q = np.full(n, join_probability(config))
    joined = rng.random(n) < q

    t = arrivals[joined]
    service = _service_times(rng, config, t.size)
    if t.size:
        # queue delay D_k = P_k - min_{j<=k} P_j with P the partial sums of
        # (previous service - interarrival gap)
        steps = np.empty(t.size)
        steps[0] = 0.0
        steps[1:] = service[:-1] - np.diff(t)
        partial = np.cumsum(steps)
        delay = partial - np.minimum.accumulate(np.minimum(partial, 0.0))
        sojourn = delay + service
    else:
        sojourn = np.empty(0)
    return SamplePath(arrivals, beliefs, joined, sojourn, service)


def _t_half_width(batch_values):
    v = np.asarray(batch_values, dtype=float)
    if v.size < 2:
        return 0.0
    sd = float(np.std(v, ddof=1))
    return float(stats.t.ppf(0.975, v.size - 1) * sd / math.sqrt(v.size))


def write_trace(path_obj: SamplePath, out_path):
    """CSV with one row per arrival: arrival_time, belief, joined, wait."""
    wait = np.full(path_obj.arrivals.size, np.nan)
    wait[path_obj.joined] = path_obj.sojourn
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["arrival_time", "belief", "joined", "wait"])
        beliefs = path_obj.beliefs
        for i, t in enumerate(path_obj.arrivals):
            b = "" if beliefs is None else repr(float(beliefs[i]))
            wt = "" if math.isnan(wait[i]) else repr(float(wait[i]))
            w.writerow([repr(float(t)), b, int(path_obj.joined[i]), wt])


def run(config: SimConfig, trace=None) -> SimReport:
    """Simulate ``config`` and summarise the post-warmup window.

    Counts, rates and averages refer to customers arriving in
    ``[warmup, horizon)``; the window is cut into ``n_batches`` equal
    time slices for the confidence intervals.
    """
    path = sample_path(config)
    if trace is not None:
        write_trace(path, trace)
    params, p = config.params, config.p
    window = config.horizon - config.warmup
    edges = np.linspace(config.warmup, config.horizon, config.n_batches + 1)
    width = window / config.n_batches

    arr_batch = np.searchsorted(edges, path.arrivals, side="right") - 1
    keep = arr_batch >= 0
    arrivals_per = np.bincount(arr_batch[keep], minlength=config.n_batches)[:config.n_batches]
    jt_batch = arr_batch[path.joined]
    jkeep = jt_batch >= 0
    jb = jt_batch[jkeep]
    soj = path.sojourn[jkeep]
    joined_per = np.bincount(jb, minlength=config.n_batches)[:config.n_batches]
    soj_per = np.bincount(jb, weights=soj, minlength=config.n_batches)[:config.n_batches]

    n_arr, n_join = int(arrivals_per.sum()), int(joined_per.sum())
    busy = float(path.service[jkeep].sum())
    utilization = busy / window
    if utilization >= SATURATION:
        raise UnstableEffective(f"measured utilisation {utilization:.4f} at saturation")

    frac_b = np.divide(joined_per, arrivals_per, out=np.zeros(config.n_batches),
                       where=arrivals_per > 0)
    join_fraction = Estimate(n_join / n_arr if n_arr else 0.0, _t_half_width(frac_b))
    revenue_rate = Estimate(p * n_join / window, _t_half_width(p * joined_per / width))
    welfare_b = (params.R * joined_per - params.C * soj_per) / width
    welfare = Estimate(float(params.R * n_join - params.C * soj.sum()) / window,
                       _t_half_width(welfare_b))
    if n_join:
        has = joined_per > 0
        mean_wait = Estimate(float(soj.mean()), _t_half_width(soj_per[has] / joined_per[has]))
    else:
        mean_wait = None
    return SimReport(config.case.value, p, config.seed, config.horizon, config.warmup,
                     config.service_dist, n_arr, n_join, join_fraction, mean_wait,
                     revenue_rate, welfare, utilization)


def run_many(configs, max_workers=None):
    """Run independent configurations on worker threads; results keep input order."""
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(run, configs))


@dataclass
class MetricCheck:
    name: str
    simulated: Optional[float]
    half_width: Optional[float]
    analytic: Optional[float]
    passed: bool


@dataclass
class ValidationSummary:
    report: SimReport
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def lines(self):
        return [f"{'PASS' if c.passed else 'FAIL'} {c.name}: sim={c.simulated} "
                f"+/- {c.half_width} analytic={c.analytic}" for c in self.checks]

    def to_dict(self):
        return {"report": self.report.to_dict(), "checks": [asdict(c) for c in self.checks],
                "passed": self.passed}


def analytic_targets(config: SimConfig) -> dict:
    params = config.params
    q = join_probability(config)
    rate = params.lambda_true * q
    return {
        "join_fraction": q,
        "mean_wait": waiting_time(params, rate) if rate > 0 else None,
        "revenue_rate": config.p * rate,
        "welfare_rate_physical": physical_welfare_at_rate(params, rate),
    }


def validate_against_analytics(config: SimConfig, k: float = 3.0) -> ValidationSummary:
    """Simulate and compare each metric with its closed-form value; a metric
    passes when the gap is within ``k`` half-widths."""
    report = run(config)
    summary = ValidationSummary(report)
    for name, target in analytic_targets(config).items():
        est = getattr(report, name)
        if est is None or target is None:
            ok = est is None and (target is None or report.n_joined == 0)
            summary.checks.append(MetricCheck(name, None, None, target, ok))
            continue
        summary.checks.append(MetricCheck(name, est.mean, est.half_width, target,
                                          est.covers(target, k)))
    return summary
