"""Reference implementations used only by the tests.

Written directly from the model definitions with scipy's quad/brentq so
they share no code with the package's own quadrature and root finders.
"""
import math

import numpy as np
from scipy import integrate, optimize


def wait(x, mu, s2):
    return x * s2 / (2.0 * (1.0 - x / mu)) + 1.0 / mu


def xi(R, C, mu, s2, p):
    surplus = R - p - C / mu
    if surplus <= 0:
        return 0.0
    return 1.0 / (C * s2 / (2.0 * surplus) + 1.0 / mu)


def mean_over(belief, g):
    """E[g(Lambda)] for ("uniform", a, b) or ("discrete", [(v, w), ...])."""
    kind = belief[0]
    if kind == "uniform":
        a, b = belief[1], belief[2]
        pts = [t for t in belief[3:] if a < t < b] if len(belief) > 3 else None
        val, _ = integrate.quad(g, a, b, points=pts, epsabs=1e-13, epsrel=1e-12, limit=200)
        return val / (b - a)
    return sum(w * g(v) for v, w in belief[1])


def support(belief):
    if belief[0] == "uniform":
        return belief[1], belief[2]
    vals = [v for v, _ in belief[1]]
    return min(vals), max(vals)


def expected_join(belief, x):
    lo, hi = support(belief)
    if belief[0] == "uniform":
        return mean_over(("uniform", lo, hi, x), lambda t: min(x / t, 1.0))
    return mean_over(belief, lambda t: min(x / t, 1.0))


def q_shared(R, C, mu, s2, belief, p):
    if R - p - C / mu <= 0:
        return 0.0
    _, hi_rate = support(belief)
    target = (R - p) / C
    f = lambda q: mean_over(belief, lambda t: wait(q * t, mu, s2)) - target
    q_hi = min(1.0, (mu - 1e-9) / hi_rate)
    if f(q_hi) <= 0:
        return q_hi if q_hi < 1.0 else 1.0
    return optimize.brentq(f, 0.0, q_hi, xtol=1e-15, rtol=1e-15)


def revenues(R, C, mu, lam, belief, p, s2=None):
    s2 = 2.0 / mu**2 if s2 is None else s2
    x = xi(R, C, mu, s2, p)
    return (p * lam * expected_join(belief, x),
            p * lam * q_shared(R, C, mu, s2, belief, p),
            p * min(x, lam))


def threshold_M(belief, x):
    lo, hi = support(belief)
    if x >= hi:
        return hi
    if belief[0] == "uniform":
        a, b = lo, hi
        # closed form of E[min(1/x, 1/Lambda)] for a uniform belief
        if x <= a:
            return (b - a) / math.log(b / a)
        return (b - a) / ((x - a) / x + math.log(b / x))
    return 1.0 / sum(w * min(1.0 / x, 1.0 / v) for v, w in belief[1])


def uniform_inv_mean(a, b):
    return math.log(b / a) / (b - a)


def midpoint(g, a, b, n):
    h = (b - a) / n
    t = a + h * (np.arange(n) + 0.5)
    return float(np.sum(g(t)) * h)
