"""Grid-restricted three-plan linear program, used as an independent check.

Restricting the dominating variable ``z`` to a finite grid turns the
dominance problem into a linear program over plans ``w(x_i, y_j, z_k) >= 0``
whose first two marginals form a coupling of ``mu`` and ``nu`` and whose
(x, z) and (y, z) projections are martingale plans. Its value is an upper
bound on the dominance cost that tightens as the grid is refined.

The program is handed to the HiGHS solver through :func:`scipy.optimize.linprog`
so that the oracle shares no code with the conic solver it checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .m2ot import check_pair
from .measure import DiscreteMeasure

MAX_VARIABLES = 200_000


class OracleError(ValueError):
    """The grid program is too large, malformed, or infeasible."""


@dataclass(frozen=True)
class GridSpec:
    """Regular grid on the box ``[lower, upper]`` with ``counts[k]`` points per axis."""

    lower: tuple
    upper: tuple
    counts: tuple

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        counts = np.atleast_1d(np.asarray(self.counts, dtype=int))
        if not (lo.shape == hi.shape == counts.shape):
            raise ValueError("lower, upper and counts must have one entry per axis")
        if np.any(counts < 2):
            raise ValueError("each axis needs at least 2 grid points")
        if np.any(hi <= lo):
            raise ValueError("upper must exceed lower on every axis")
        object.__setattr__(self, "lower", tuple(lo.tolist()))
        object.__setattr__(self, "upper", tuple(hi.tolist()))
        object.__setattr__(self, "counts", tuple(int(c) for c in counts))

    @classmethod
    def covering(cls, *measures: DiscreteMeasure, counts, pad: float = 0.0) -> "GridSpec":
        """Smallest box (plus ``pad``) around the given supports."""
        pts = np.vstack([m.points for m in measures])
        d = pts.shape[1]
        counts = np.broadcast_to(np.asarray(counts, dtype=int), (d,))
        lo = pts.min(axis=0) - pad
        hi = pts.max(axis=0) + pad
        hi = np.where(hi > lo, hi, lo + 1.0)
        return cls(tuple(lo), tuple(hi), tuple(counts))

    @property
    def dim(self) -> int:
        return len(self.counts)

    def points(self) -> np.ndarray:
        axes = [np.linspace(lo, hi, c) for lo, hi, c in zip(self.lower, self.upper, self.counts)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])

    def refined(self) -> "GridSpec":
        """Same box with the spacing halved (every old point is kept)."""
        return GridSpec(self.lower, self.upper, tuple(2 * c - 1 for c in self.counts))

    def contains(self, pts: np.ndarray, tol: float = 1e-12) -> bool:
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        return bool(np.all(pts >= lo - tol) and np.all(pts <= hi + tol))


def grid_dominance_lp(mu: DiscreteMeasure, nu: DiscreteMeasure,
                      f: Callable[[np.ndarray], np.ndarray],
                      grid: GridSpec) -> tuple[DiscreteMeasure, float]:
    """Minimize ``sum f(z_k) w_ijk`` over grid-restricted three-plans.

    Parameters
    ----------
    mu, nu : DiscreteMeasure
        Marginals with a common barycentre.
    f : callable
        Maps an ``(k, d)`` array of grid points to ``k`` costs.
    grid : GridSpec
        Must contain both supports.

    Returns
    -------
    rho : DiscreteMeasure
        The third marginal of an optimal plan.
    cost : float
    """
    check_pair(mu, nu)
    if grid.dim != mu.dim:
        raise OracleError("grid dimension does not match the measures")
    if not (grid.contains(mu.points) and grid.contains(nu.points)):
        raise OracleError("grid box must contain both supports")
    z = grid.points()
    n_mu, n_nu, n_z, d = len(mu), len(nu), len(z), mu.dim
    nvar = n_mu * n_nu * n_z
    if nvar > MAX_VARIABLES:
        raise OracleError(f"{nvar} variables exceeds the cap of {MAX_VARIABLES}")

    idx = np.arange(nvar)
    ii, rest = np.divmod(idx, n_nu * n_z)
    jj, kk = np.divmod(rest, n_z)
    rows, cols, vals = [ii, n_mu + jj], [idx, idx], [np.ones(nvar), np.ones(nvar)]
    off = n_mu + n_nu
    for a in range(d):
        rows.append(off + a * n_mu + ii)
        cols.append(idx)
        vals.append(z[kk, a] - mu.points[ii, a])
    off += d * n_mu
    for a in range(d):
        rows.append(off + a * n_nu + jj)
        cols.append(idx)
        vals.append(z[kk, a] - nu.points[jj, a])
    nrows = off + d * n_nu
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(nrows, nvar))
    b = np.concatenate([mu.weights, nu.weights, np.zeros(d * (n_mu + n_nu))])
    fz = np.asarray(f(z), dtype=float).ravel()
    if fz.shape != (n_z,) or not np.all(np.isfinite(fz)):
        raise OracleError("cost function must return one finite value per grid point")
    res = linprog(fz[kk], A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    if res.status == 2:
        raise OracleError("grid program is infeasible; refine or enlarge the grid")
    if res.status != 0:
        raise OracleError(f"grid program failed: {res.message}")
    mass = np.bincount(kk, weights=res.x, minlength=n_z)
    keep = mass > 1e-12
    rho = DiscreteMeasure(z[keep], mass[keep] / mass[keep].sum())
    return rho, float(res.fun)
