"""Domain types: system primitives, arrival-rate beliefs and the expectation
operator every shared/private-belief formula is built on."""
from __future__ import annotations

import enum
import functools
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import UnstableRegime, ValidationError
from .numerics import gauss_legendre

MM1_RTOL = 1e-12
EXPECT_RTOL = 1e-10


@functools.total_ordering
class InfoCase(enum.Enum):
    """Information available to customers; compares by information content."""

    CLASSICAL = "classical"
    SHARED = "shared"
    PRIVATE = "private"

    @property
    def level(self) -> int:
        return {"private": 0, "shared": 1, "classical": 2}[self.value]

    def __lt__(self, other):
        if not isinstance(other, InfoCase):
            return NotImplemented
        return self.level < other.level


def pk_wait(x, mu, s2):
    """Pollaczek-Khinchine mean time in system at arrival rate ``x``.

    Vectorised; no stability check (callers do that).
    """
    x = np.asarray(x, dtype=float)
    out = x * s2 / (2.0 * (1.0 - x / mu)) + 1.0 / mu
    return out if out.ndim else float(out)


def pk_rate_for_wait(w, mu, s2):
    """Arrival rate whose :func:`pk_wait` equals ``w`` (``w >= 1/mu``)."""
    excess = w - 1.0 / mu
    return excess / (0.5 * s2 + excess / mu)


def pk_wait_slope(x, mu, s2):
    """d/dx of :func:`pk_wait`."""
    x = np.asarray(x, dtype=float)
    out = 0.5 * s2 / (1.0 - x / mu) ** 2
    return out if out.ndim else float(out)


# --------------------------------------------------------------------------
# System parameters


@dataclass(frozen=True)
class Issue:
    code: str
    message: str
    hard: bool


def _param_issues(R, C, mu, s2, lam):
    issues = []
    if not (mu > 0 and C >= 0 and R > 0):
        issues.append(Issue("nonpositive", "R and mu must be positive and C non-negative", True))
        return issues
    if R < C / mu * (1 - 1e-12):
        issues.append(Issue("reward_below_service_cost",
                            f"R={R} < C/mu={C / mu}: nobody would ever join", True))
    if not 0 < lam < mu:
        issues.append(Issue("unstable", f"true arrival rate {lam} must lie in (0, mu={mu})", True))
    if s2 < (1.0 / mu**2) * (1 - 1e-12):
        issues.append(Issue("service_moment",
                            f"s2={s2} < 1/mu^2={1 / mu**2} violates E[S^2] >= E[S]^2", True))
    return issues


@dataclass(frozen=True)
class SystemParams:
    """True system primitives known to the manager.

    ``s2`` is the second moment of the service time; ``None`` means
    exponential service (``2/mu**2``). Construction rejects unstable or
    non-viable systems unless ``strict=False``.
    """

    R: float
    C: float
    mu: float
    lambda_true: float
    s2: Optional[float] = None
    strict: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        if self.s2 is None:
            object.__setattr__(self, "s2", 2.0 / self.mu**2)
        for name in ("R", "C", "mu", "lambda_true", "s2"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.strict:
            hard = [i for i in _param_issues(self.R, self.C, self.mu, self.s2,
                                             self.lambda_true) if i.hard]
            if hard:
                raise ValidationError("; ".join(i.message for i in hard))

    @property
    def is_mm1(self) -> bool:
        return math.isclose(self.s2, 2.0 / self.mu**2, rel_tol=MM1_RTOL)

    @property
    def max_fee(self) -> float:
        """Largest fee at which an empty system is still worth joining."""
        return self.R - self.C / self.mu

    def with_lambda(self, lam: float) -> "SystemParams":
        return SystemParams(self.R, self.C, self.mu, lam, self.s2, strict=self.strict)

    def replace(self, **changes) -> "SystemParams":
        kw = dict(R=self.R, C=self.C, mu=self.mu, lambda_true=self.lambda_true,
                  s2=self.s2, strict=self.strict)
        kw.update(changes)
        return SystemParams(**kw)

    def wait(self, x):
        return pk_wait(x, self.mu, self.s2)

    def to_dict(self) -> dict:
        return {"R": self.R, "C": self.C, "mu": self.mu, "s2": self.s2,
                "lambda": self.lambda_true}

    @classmethod
    def from_dict(cls, d: dict, strict: bool = True) -> "SystemParams":
        try:
            return cls(R=d["R"], C=d["C"], mu=d["mu"], lambda_true=d["lambda"],
                       s2=d.get("s2"), strict=strict)
        except KeyError as exc:
            raise ValidationError(f"params missing key {exc}") from None


# --------------------------------------------------------------------------
# Beliefs


class BeliefDistribution:
    """Distribution of the customers' arrival-rate beliefs.

    Subclasses provide ``lambda_min``, ``lambda_max``, :meth:`expect` and
    :meth:`sample`. Every instance is immutable.
    """

    kind = ""

    lambda_min: float
    lambda_max: float

    def expect(self, g: Callable, kinks: Iterable[float] = ()) -> float:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def shifted(self, delta: float) -> "BeliefDistribution":
        raise NotImplementedError

    def scaled(self, factor: float) -> "BeliefDistribution":
        """Spread scaled by ``factor`` about the mean (mean preserved)."""
        raise NotImplementedError

    @functools.cached_property
    def mean(self) -> float:
        return self.expect(lambda x: x)

    @functools.cached_property
    def inv_mean(self) -> float:
        """E[1/Lambda]."""
        return self.expect(lambda x: 1.0 / x)

    @property
    def harmonic_mean(self) -> float:
        return 1.0 / self.inv_mean

    @property
    def is_point_mass(self) -> bool:
        return self.lambda_min == self.lambda_max

    def cdf_at(self, x: float) -> float:
        """P(Lambda <= x)."""
        if x >= self.lambda_max:
            return 1.0
        if x < self.lambda_min:
            return 0.0
        return self.expect(lambda t: (t <= x).astype(float), kinks=(x,))

    def with_mean(self, m: float) -> "BeliefDistribution":
        return self.shifted(m - self.mean)

    def with_half_range(self, h: float) -> "BeliefDistribution":
        """Same mean, support half-width ``h`` (0 gives a point mass)."""
        if h < 0:
            raise ValidationError("half range must be non-negative")
        if h == 0:
            return DiscreteBelief([(self.mean, 1.0)])
        current = 0.5 * (self.lambda_max - self.lambda_min)
        if current == 0:
            return UniformBelief(self.mean - h, self.mean + h)
        return self.scaled(h / current)

    def __repr__(self):
        return f"{type(self).__name__}({self.describe()})"

    def __eq__(self, other):
        return type(self) is type(other) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(json.dumps(self.to_dict()))

    def describe(self) -> str:
        return json.dumps(self.to_dict())


def _check_support(lo, hi):
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValidationError("belief support must be bounded")
    if lo <= 0:
        raise ValidationError(f"belief support must be positive, got lambda_min={lo}")
    if hi < lo:
        raise ValidationError("empty belief support")


class DiscreteBelief(BeliefDistribution):
    """Finite set of belief atoms ``[(lambda_i, p_i), ...]``."""

    kind = "discrete"

    def __init__(self, points: Sequence[Sequence[float]]):
        merged = {}
        for lam, w in points:
            lam, w = float(lam), float(w)
            if w < 0:
                raise ValidationError("negative belief weight")
            if w > 0:
                merged[lam] = merged.get(lam, 0.0) + w
        if not merged:
            raise ValidationError("discrete belief needs at least one positive weight")
        total = sum(merged.values())
        if abs(total - 1.0) > 1e-12:
            raise ValidationError(f"discrete weights sum to {total}, not 1")
        lams = np.array(sorted(merged))
        self.values = lams
        self.weights = np.array([merged[x] for x in lams])
        self.lambda_min = float(lams[0])
        self.lambda_max = float(lams[-1])
        _check_support(self.lambda_min, self.lambda_max)

    @property
    def points(self):
        return list(zip(self.values.tolist(), self.weights.tolist()))

    def expect(self, g, kinks=()):
        return float(np.dot(self.weights, g(self.values)))

    def sample(self, rng, size):
        return rng.choice(self.values, size=size, p=self.weights)

    def to_dict(self):
        return {"type": "discrete", "points": [list(p) for p in self.points]}

    def shifted(self, delta):
        return DiscreteBelief([(x + delta, w) for x, w in self.points])

    def scaled(self, factor):
        m = self.mean
        return DiscreteBelief([(m + factor * (x - m), w) for x, w in self.points])


class UniformBelief(BeliefDistribution):
    kind = "uniform"

    def __init__(self, a: float, b: float):
        a, b = float(a), float(b)
        if not b > a:
            raise ValidationError("uniform belief needs a < b; use a point mass for a == b")
        _check_support(a, b)
        self.a, self.b = a, b
        self.lambda_min, self.lambda_max = a, b

    def expect(self, g, kinks=()):
        return gauss_legendre(g, self.a, self.b, kinks, rtol=EXPECT_RTOL) / (self.b - self.a)

    def sample(self, rng, size):
        return rng.uniform(self.a, self.b, size)

    def to_dict(self):
        return {"type": "uniform", "a": self.a, "b": self.b}

    def shifted(self, delta):
        return UniformBelief(self.a + delta, self.b + delta)

    def scaled(self, factor):
        m, h = 0.5 * (self.a + self.b), 0.5 * (self.b - self.a) * factor
        return UniformBelief(m - h, m + h)

    def describe(self):
        return f"U({self.a:g}, {self.b:g})"


class TabulatedBelief(BeliefDistribution):
    """Density given on a grid, piecewise linear between grid points.

    The density is renormalised to unit mass at construction; the original
    mass is kept in ``normalization``.
    """

    kind = "tabulated"

    def __init__(self, grid: Sequence[Sequence[float]]):
        arr = np.array(sorted((float(x), float(f)) for x, f in grid))
        if arr.ndim != 2 or len(arr) < 2:
            raise ValidationError("tabulated belief needs at least two grid points")
        x, f = arr[:, 0], arr[:, 1]
        if np.any(np.diff(x) <= 0):
            raise ValidationError("tabulated grid abscissae must be distinct")
        if np.any(f < 0):
            raise ValidationError("negative density")
        _check_support(x[0], x[-1])
        mass = float(np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(x)))
        if not mass > 0:
            raise ValidationError("density has zero mass")
        self.normalization = mass
        self.renormalized = abs(mass - 1.0) > 1e-9
        self.x = x
        self.f = f / mass
        self.lambda_min = float(x[0])
        self.lambda_max = float(x[-1])
        self._cum = np.concatenate([[0.0], np.cumsum(0.5 * (self.f[1:] + self.f[:-1]) * np.diff(x))])

    def density(self, t):
        return np.interp(t, self.x, self.f, left=0.0, right=0.0)

    def expect(self, g, kinks=()):
        return gauss_legendre(lambda t: g(t) * self.density(t), self.lambda_min,
                              self.lambda_max, [*self.x[1:-1], *kinks], rtol=EXPECT_RTOL)

    def sample(self, rng, size):
        u = rng.uniform(0.0, self._cum[-1], size)
        i = np.clip(np.searchsorted(self._cum, u, side="right") - 1, 0, len(self.x) - 2)
        h = self.x[i + 1] - self.x[i]
        f0, f1 = self.f[i], self.f[i + 1]
        a = (f1 - f0) / (2.0 * h)
        c = u - self._cum[i]
        # stable root of a t^2 + f0 t - c = 0
        disc = np.sqrt(np.maximum(f0 * f0 + 4.0 * a * c, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(f0 + disc > 0, 2.0 * c / (f0 + disc), 0.0)
        return self.x[i] + np.clip(t, 0.0, h)

    def to_dict(self):
        return {"type": "tabulated", "grid": [[float(a), float(b)] for a, b in zip(self.x, self.f)]}

    def shifted(self, delta):
        return TabulatedBelief(list(zip(self.x + delta, self.f)))

    def scaled(self, factor):
        m = self.mean
        return TabulatedBelief(list(zip(m + factor * (self.x - m), self.f / factor)))


def point_mass(lam: float) -> DiscreteBelief:
    return DiscreteBelief([(lam, 1.0)])


def belief_from_dict(d: dict) -> BeliefDistribution:
    kind = d.get("type")
    try:
        if kind == "discrete":
            return DiscreteBelief(d["points"])
        if kind == "uniform":
            if float(d["a"]) == float(d["b"]):
                return point_mass(d["a"])
            return UniformBelief(d["a"], d["b"])
        if kind == "tabulated":
            return TabulatedBelief(d["grid"])
    except KeyError as exc:
        raise ValidationError(f"belief missing key {exc}") from None
    raise ValidationError(f"unknown belief type {kind!r}")


def load_params(path, strict: bool = True) -> SystemParams:
    with open(path) as fh:
        return SystemParams.from_dict(json.load(fh), strict=strict)


def load_belief(path) -> BeliefDistribution:
    with open(path) as fh:
        return belief_from_dict(json.load(fh))


# --------------------------------------------------------------------------
# Validation of a (params, belief) pair


@dataclass
class ValidationReport:
    issues: list

    @property
    def errors(self):
        return [i for i in self.issues if i.hard]

    @property
    def warnings(self):
        return [i for i in self.issues if not i.hard]

    @property
    def ok(self) -> bool:
        return not self.errors

    def to_dict(self):
        return {"ok": self.ok, "issues": [asdict(i) for i in self.issues]}


def validate(params: SystemParams, belief: BeliefDistribution) -> ValidationReport:
    """Report (never raise) every violated assumption of the model."""
    issues = list(_param_issues(params.R, params.C, params.mu, params.s2, params.lambda_true))
    if belief.lambda_max > params.mu * (1 + 1e-12):
        issues.append(Issue("support_cap",
                            f"lambda_max={belief.lambda_max} exceeds mu={params.mu}", True))
    if belief.is_point_mass:
        issues.append(Issue("degenerate_belief", "belief is a point mass", False))
    if not belief.lambda_min <= params.lambda_true <= belief.lambda_max:
        issues.append(Issue("true_rate_outside_support",
                            f"lambda={params.lambda_true} not in "
                            f"[{belief.lambda_min}, {belief.lambda_max}]", False))
    return ValidationReport(issues)


# --------------------------------------------------------------------------
# Expectation requests


class Transform(enum.Enum):
    W = "W"
    W_SQUARED = "W_squared"
    RECIPROCAL = "reciprocal"
    INDICATOR_BELOW = "indicator_below"
    CLIPPED_RATIO = "clipped_ratio"


_NEEDS_WAIT = {Transform.W, Transform.W_SQUARED}
_NEEDS_XI = {Transform.INDICATOR_BELOW, Transform.CLIPPED_RATIO}


@dataclass(frozen=True)
class ExpectationRequest:
    """What :func:`expect` should average over the belief.

    ``W`` / ``W_squared``: P-K wait (squared) at rate ``q * Lambda``;
    ``indicator_below``: 1{Lambda <= xi}; ``clipped_ratio``: min(xi/Lambda, 1).
    """

    transform: Transform
    q: float = 1.0
    xi: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "transform", Transform(self.transform))
        if not 0.0 <= self.q <= 1.0:
            raise ValidationError(f"joining probability {self.q} outside [0, 1]")
        if self.transform in _NEEDS_XI and self.xi is None:
            raise ValidationError(f"{self.transform.value} needs xi")


def ensure_wait_finite(params: SystemParams, belief: BeliefDistribution, q: float):
    if q * belief.lambda_max >= params.mu:
        raise UnstableRegime(
            f"q*lambda_max = {q * belief.lambda_max} >= mu = {params.mu}")


def expect(belief: BeliefDistribution, req: ExpectationRequest,
           params: Optional[SystemParams] = None) -> float:
    """E[g(Lambda)] for the transform named in ``req``."""
    t = req.transform
    if t in _NEEDS_WAIT:
        if params is None:
            raise ValidationError("waiting-time transforms need system params")
        ensure_wait_finite(params, belief, req.q)
        mu, s2, q = params.mu, params.s2, req.q
        power = 1 if t is Transform.W else 2
        return belief.expect(lambda x: pk_wait(q * x, mu, s2) ** power)
    if t is Transform.RECIPROCAL:
        return belief.inv_mean
    xi = req.xi
    if t is Transform.INDICATOR_BELOW:
        return belief.cdf_at(xi)
    return clipped_ratio_mean(belief, xi)


def clipped_ratio_mean(belief: BeliefDistribution, xi: float) -> float:
    """E[min(xi / Lambda, 1)] using the three-branch split at ``xi``."""
    if xi >= belief.lambda_max:
        return 1.0
    if xi <= belief.lambda_min:
        return xi * belief.inv_mean
    return min(belief.expect(lambda x: np.minimum(xi / x, 1.0), kinks=(xi,)), 1.0)
