"""Compiled inner loops for the power-cone projection."""

from __future__ import annotations

import math

from numba import njit

TINY = 1e-300


@njit(cache=True)
def _point(a, b, t, alpha, r, d):
    """Candidate ``(x, y)`` for tail norm ``r = t - d`` and the value ``phi``."""
    beta = 1.0 - alpha
    w = r * d
    sa = math.sqrt(a * a + 4.0 * alpha * w)
    sb = math.sqrt(b * b + 4.0 * beta * w)
    # the cancellation-free branch is used when the coordinate is negative
    x = 0.5 * (a + sa) if a >= 0.0 else 2.0 * alpha * w / (sa - a)
    y = 0.5 * (b + sb) if b >= 0.0 else 2.0 * beta * w / (sb - b)
    g = x**alpha * y**beta
    return x, y, sa, sb, g


@njit(cache=True)
def _root(a, b, t, alpha, s0, tol, max_iter):
    """Solve ``phi(r) = g(r) - r = 0`` on ``(0, t)``.

    ``phi`` is decreasing. When the root lies in the upper half the iteration
    runs on ``d = t - r`` instead of ``r``, so that roots close to ``t`` are
    resolved to full relative precision.
    """
    beta = 1.0 - alpha
    half = 0.5 * t
    g_half = _point(a, b, t, alpha, half, half)[4]
    upper = g_half > half
    v = (1.0 - s0) * t if upper else s0 * t
    lo = 0.0
    hi = half
    if not 0.0 < v < hi:
        v = 0.5 * hi
    x = 0.0
    y = 0.0
    r = 0.0
    prev = math.inf
    for _ in range(max_iter):
        if upper:
            d = v
            r = t - v
        else:
            r = v
            d = t - v
        x, y, sa, sb, g = _point(a, b, t, alpha, r, d)
        phi = g - r
        if abs(phi) <= tol:
            return x, y, r, True
        # phi > 0 means r lies below the root
        if (phi > 0.0) != upper:
            lo = v
        else:
            hi = v
        if hi - lo <= 2e-16 * hi or hi <= TINY:
            return x, y, r, True
        step = math.nan
        # fall back to bisection when Newton stops making progress
        slow = abs(phi) > 0.5 * prev
        prev = abs(phi)
        if x > 0.0 and y > 0.0 and not slow:
            dphi = g * (d - r) * (alpha * alpha / (x * sa) + beta * beta / (y * sb)) - 1.0
            if upper:
                dphi = -dphi
            if dphi != 0.0:
                step = v - phi / dphi
        if not (lo < step < hi):
            # bisect in log scale so that roots far below t are reached quickly
            base = max(lo, TINY)
            step = math.sqrt(base) * math.sqrt(hi) if hi > 4.0 * base else 0.5 * (lo + hi)
        v = step
    return x, y, r, False


@njit(cache=True)
def project_power_rows(P, alpha, hint, use_hint, out, tol_rel, max_iter):
    """Project each row of ``P`` onto the power cone; returns a failing row or -1."""
    k, n = P.shape
    beta = 1.0 - alpha
    for i in range(k):
        a = P[i, 0]
        b = P[i, 1]
        t2 = 0.0
        for j in range(2, n):
            t2 += P[i, j] * P[i, j]
        t = math.sqrt(t2)
        if a >= 0.0 and b >= 0.0 and a**alpha * b**beta >= t:
            for j in range(n):
                out[i, j] = P[i, j]
            continue
        if a <= 0.0 and b <= 0.0 and (-a / alpha) ** alpha * (-b / beta) ** beta >= t:
            for j in range(n):
                out[i, j] = 0.0
            continue
        if t == 0.0:
            out[i, 0] = max(a, 0.0)
            out[i, 1] = max(b, 0.0)
            for j in range(2, n):
                out[i, j] = 0.0
            continue
        s0 = 0.5
        if use_hint:
            s0 = min(max(hint[i], 1e-3), 1.0 - 1e-3)
        tol = tol_rel * max(1.0, abs(a) + abs(b) + t)
        x, y, r, ok = _root(a, b, t, alpha, s0, tol, max_iter)
        if not ok:
            return i
        out[i, 0] = x
        out[i, 1] = y
        s = r / t
        for j in range(2, n):
            out[i, j] = s * P[i, j]
        if use_hint:
            hint[i] = s
    return -1
