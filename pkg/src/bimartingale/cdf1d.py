"""Closed forms on the real line.

A probability measure ``m`` on R is encoded by its potential

    G_m(x) = sum_i w_i (x - x_i)_+ ,

a convex piecewise-linear function with slope 0 far left and slope 1 far
right. Convex order is pointwise order of potentials (at equal means), and
the least upper bound of two measures in convex order is the measure whose
potential is ``max(G_mu, G_nu)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measure import DiscreteMeasure, MeasureError

MEAN_TOL = 1e-10
ORDER_SLACK = 1e-12
JUMP_TOL = 1e-13


@dataclass(frozen=True)
class PiecewiseLinearConvex:
    """Continuous piecewise-linear function given by knots and slopes.

    Attributes
    ----------
    knots : ndarray
        Strictly increasing breakpoints.
    slopes : ndarray
        Slope on each of the ``len(knots) + 1`` pieces, left to right.
    anchor : float
        Value at ``knots[0]``.
    """

    knots: np.ndarray
    slopes: np.ndarray
    anchor: float = 0.0

    def __post_init__(self):
        if len(self.slopes) != len(self.knots) + 1:
            raise ValueError("need one more slope than knots")

    @property
    def values(self) -> np.ndarray:
        """Function values at the knots."""
        steps = self.slopes[1:-1] * np.diff(self.knots)
        return self.anchor + np.concatenate([[0.0], np.cumsum(steps)])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        k, v = self.knots, self.values
        out = np.interp(x, k, v)
        out = np.where(x < k[0], v[0] + self.slopes[0] * (x - k[0]), out)
        return np.where(x > k[-1], v[-1] + self.slopes[-1] * (x - k[-1]), out)

    def slope_at(self, x):
        """Right derivative at ``x``."""
        return self.slopes[np.searchsorted(self.knots, x, side="right")]

    def second_derivative(self, jump_tol: float = JUMP_TOL) -> DiscreteMeasure:
        """The measure ``f''``; slope jumps below ``jump_tol`` are dropped."""
        jumps = np.diff(self.slopes)
        if np.any(jumps < -jump_tol):
            raise ValueError("function is not convex")
        keep = jumps > jump_tol
        w = jumps[keep]
        return DiscreteMeasure(self.knots[keep], w / w.sum())


def _require_1d(*measures):
    for m in measures:
        if m.dim != 1:
            raise MeasureError("one-dimensional measure required")


def g_potential(m: DiscreteMeasure) -> PiecewiseLinearConvex:
    """Potential ``G_m``."""
    _require_1d(m)
    order = np.argsort(m.points[:, 0], kind="stable")
    x = m.points[order, 0]
    w = m.weights[order]
    # slope just right of x_k is the cumulative mass up to x_k
    return PiecewiseLinearConvex(x, np.concatenate([[0.0], np.cumsum(w)]), 0.0)


def _means_match(m1, m2):
    gap = abs(float(m1.weights @ m1.points[:, 0] - m2.weights @ m2.points[:, 0]))
    if gap > MEAN_TOL:
        raise MeasureError(f"means differ by {gap:.3e}")


def convex_order_1d(m1: DiscreteMeasure, m2: DiscreteMeasure,
                    slack: float = ORDER_SLACK) -> bool:
    """Whether ``m1`` precedes ``m2`` in convex order.

    Both potentials are linear between the union of their knots and agree
    outside it, so comparing them at the knots is exact.
    """
    _require_1d(m1, m2)
    _means_match(m1, m2)
    g1, g2 = g_potential(m1), g_potential(m2)
    grid = np.union1d(g1.knots, g2.knots)
    scale = 1.0 + float(np.max(np.abs(grid)))
    return bool(np.all(g1(grid) <= g2(grid) + slack * scale))


def lub_1d(m1: DiscreteMeasure, m2: DiscreteMeasure,
           jump_tol: float = JUMP_TOL) -> DiscreteMeasure:
    """Least upper bound of ``m1`` and ``m2`` in convex order."""
    _require_1d(m1, m2)
    _means_match(m1, m2)
    g1, g2 = g_potential(m1), g_potential(m2)
    grid = np.union1d(g1.knots, g2.knots)
    d = g1(grid) - g2(grid)
    # add the crossings of g1 and g2 strictly inside a segment
    s = np.sign(d)
    cross = np.flatnonzero(s[:-1] * s[1:] < 0)
    t = d[cross] / (d[cross] - d[cross + 1])
    xc = grid[cross] + t * (grid[cross + 1] - grid[cross])
    knots = np.union1d(grid, xc)
    # no crossing inside a piece, so one potential is on top throughout it;
    # its slope there is an exact cumulative mass
    mid = 0.5 * (knots[:-1] + knots[1:])
    top1 = g1(mid) >= g2(mid)
    inner = np.where(top1, g1.slope_at(mid), g2.slope_at(mid))
    slopes = np.concatenate([[0.0], inner, [g1.slopes[-1]]])
    # a misjudged sliver next to a crossing could produce a dip
    slopes = np.maximum.accumulate(slopes)
    h = PiecewiseLinearConvex(knots, slopes, float(max(g1(knots[0]), g2(knots[0]))))
    return h.second_derivative(jump_tol)
