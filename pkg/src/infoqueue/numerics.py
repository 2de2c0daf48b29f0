"""Small numerical kernels: adaptive Gauss-Legendre quadrature, bisection
and golden-section search.

All three are written for the shapes that occur in this package (smooth
integrands with a few known kinks, monotone scalar functions, unimodal
objectives on a closed interval) rather than as general-purpose solvers.
"""
import math

import numpy as np

_GL_ORDER = 20
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(_GL_ORDER)

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def _gl_panel(f, a, b):
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    x = mid + half * _GL_NODES
    return half * float(np.dot(_GL_WEIGHTS, f(x)))


def gauss_legendre(f, a, b, breakpoints=(), rtol=1e-10, max_depth=48):
    """Integrate a vectorised ``f`` over ``[a, b]``.

    The interval is first cut at every breakpoint strictly inside it; each
    piece is then bisected adaptively until a 20-point rule on the piece and
    on its two halves agree to ``rtol`` (relative to the running total).
    Pieces that hit ``max_depth`` are accepted as they stand.
    """
    if b < a:
        return -gauss_legendre(f, b, a, breakpoints, rtol, max_depth)
    if b == a:
        return 0.0
    cuts = sorted({a, b, *(x for x in breakpoints if a < x < b)})
    pieces = [(lo, hi, _gl_panel(f, lo, hi)) for lo, hi in zip(cuts[:-1], cuts[1:])]
    scale = abs(sum(p[2] for p in pieces))
    width = b - a

    total = 0.0
    stack = [(lo, hi, whole, 0) for lo, hi, whole in pieces]
    while stack:
        lo, hi, whole, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        left = _gl_panel(f, lo, mid)
        right = _gl_panel(f, mid, hi)
        both = left + right
        local_tol = max(rtol * abs(both), rtol * scale * (hi - lo) / width, 1e-300)
        if abs(both - whole) <= local_tol or depth >= max_depth:
            total += both
        else:
            stack.append((lo, mid, left, depth + 1))
            stack.append((mid, hi, right, depth + 1))
            # running scale keeps the absolute floor meaningful when the
            # coarse estimate was poor
            scale = max(scale, abs(both))
    return total


def bisect_decreasing(f, lo, hi, tol=1e-12, max_iter=200):
    """Root of a strictly decreasing ``f`` with ``f(lo) > 0 >= f(hi)``.

    The endpoint signs are taken as given and ``f`` is never evaluated at
    ``hi``; callers use this where ``hi`` sits next to a singularity.
    """
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def bisect_sign_change(f, lo, hi, tol=1e-12, max_iter=200, f_lo=None):
    """Generic bisection on a bracket whose endpoint values differ in sign."""
    f_lo = f(lo) if f_lo is None else f_lo
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if f_mid == 0.0:
            return mid
        if (f_mid > 0.0) == (f_lo > 0.0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def golden_section_max(f, lo, hi, tol=1e-9, max_iter=500):
    """Maximise a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x))``.

    The endpoints are compared against the interior optimum at the end so a
    monotone objective returns the right boundary.
    """
    a, b = lo, hi
    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_PHI * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - INV_PHI * (b - a)
            f1 = f(x1)
    x_best, f_best = (x1, f1) if f1 >= f2 else (x2, f2)
    for x_end in (lo, hi):
        f_end = f(x_end)
        if f_end > f_best:
            x_best, f_best = x_end, f_end
    return x_best, f_best
