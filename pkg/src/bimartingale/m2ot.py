"""Conic builders for bi-martingale transport between discrete measures.

For every pair of atoms ``(x_i, y_j)`` the program carries a plan weight
``gamma_ij``, a vector coupling ``q_ij`` in R^d and an epigraph variable
``r_ij`` tied together by the power cone

    r_ij^(1/p) * gamma_ij^(1 - 1/p) >= |q_ij|,

so that ``r_ij >= |q_ij|^p / gamma_ij^(p-1) = gamma_ij |zeta_ij|^p`` with the
coupling map ``zeta = q / gamma``. Linear rows pin the marginals of ``gamma``
to ``mu`` and ``nu`` and the marginals of ``q`` to ``x mu`` and ``y nu``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .conic import OPTIMAL, ConicProgram, Power, Settings, SolveReport, solve
from .measure import DiscreteMeasure, MeasureError, barycentre, same_dim

BARYCENTRE_TOL = 1e-8
GAMMA_FLOOR = 1e-9


class BarycentreMismatch(MeasureError):
    """The two measures do not share a barycentre."""


class SolverFailure(RuntimeError):
    """A conic solve finished without an optimal status."""

    def __init__(self, report: SolveReport, what: str = "solve"):
        super().__init__(f"{what} ended with status {report.status} "
                         f"after {report.iterations} iterations")
        self.report = report


@dataclass(frozen=True)
class Dominance:
    """Cost ``f(z) = |z|^p``."""

    p: float = 2.0

    def __post_init__(self):
        if not self.p > 1.0:
            raise ValueError("dominance exponent must satisfy p > 1")


def Quadratic() -> Dominance:
    return Dominance(2.0)


@dataclass(frozen=True)
class MotPenalty:
    """Cost ``c(x, y) + |z|^2 / (2 epsilon)``."""

    cost: np.ndarray
    epsilon: float

    def __post_init__(self):
        cost = np.asarray(self.cost, dtype=float)
        if cost.ndim != 2 or not np.all(np.isfinite(cost)):
            raise ValueError("cost matrix must be a finite 2-D array")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        object.__setattr__(self, "cost", cost)

    @property
    def p(self) -> float:
        return 2.0


@dataclass(frozen=True)
class IndexMap:
    """Where each pair's variables live in the program vector.

    Pair ``(i, j)`` owns the contiguous block ``[r, gamma, q_1..q_d]``. The
    program works in units where the supports have unit size: the stored
    values are ``r / scale**p``, ``gamma`` and ``q / scale``.
    """

    n_mu: int
    n_nu: int
    dim: int
    p: float
    scale: float = 1.0

    @property
    def block(self) -> int:
        return self.dim + 2

    @property
    def n_pairs(self) -> int:
        return self.n_mu * self.n_nu

    def _base(self):
        return (np.arange(self.n_pairs) * self.block).reshape(self.n_mu, self.n_nu)

    @property
    def r(self):
        return self._base()

    @property
    def gamma(self):
        return self._base() + 1

    @property
    def q(self):
        return self._base()[..., None] + 2 + np.arange(self.dim)


def check_pair(mu: DiscreteMeasure, nu: DiscreteMeasure, tol: float = BARYCENTRE_TOL):
    same_dim(mu, nu)
    gap = np.max(np.abs(barycentre(mu) - barycentre(nu)))
    if gap > tol:
        raise BarycentreMismatch(f"barycentres differ by {gap:.3e} (> {tol:g}); recentre first")


def _support_scale(mu, nu) -> float:
    L = max(np.max(np.linalg.norm(mu.points, axis=1)),
            np.max(np.linalg.norm(nu.points, axis=1)))
    return float(L) if L > 0 else 1.0


def _constraints(mu, nu, scale):
    n_mu, n_nu, d = len(mu), len(nu), mu.dim
    blk = d + 2
    pair = np.arange(n_mu * n_nu)
    ii, jj = np.divmod(pair, n_nu)
    rows, cols = [], []
    # gamma marginals
    rows += [ii, n_mu + jj]
    cols += [pair * blk + 1, pair * blk + 1]
    # q marginals, one row family per coordinate
    off = n_mu + n_nu
    for k in range(d):
        rows += [off + k * n_mu + ii, off + d * n_mu + k * n_nu + jj]
        cols += [pair * blk + 2 + k, pair * blk + 2 + k]
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    nrows = off + d * (n_mu + n_nu)
    A = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(nrows, n_mu * n_nu * blk))
    b = np.concatenate([mu.weights, nu.weights,
                        (mu.points * mu.weights[:, None]).T.ravel() / scale,
                        (nu.points * nu.weights[:, None]).T.ravel() / scale])
    return A, b


def build(mu: DiscreteMeasure, nu: DiscreteMeasure, spec) -> tuple[ConicProgram, IndexMap]:
    """Translate ``(mu, nu)`` and an objective into a conic program."""
    check_pair(mu, nu)
    p = spec.p
    if not p > 1.0:
        raise ValueError("exponent must satisfy p > 1")
    # rescaling keeps r, gamma and q of comparable size, which the splitting
    # solver needs; objective values are unaffected
    L = _support_scale(mu, nu)
    imap = IndexMap(len(mu), len(nu), mu.dim, float(p), L)
    A, b = _constraints(mu, nu, L)
    c = np.zeros(imap.n_pairs * imap.block)
    if isinstance(spec, MotPenalty):
        if spec.cost.shape != (imap.n_mu, imap.n_nu):
            raise ValueError(f"cost matrix shape {spec.cost.shape} does not match "
                             f"({imap.n_mu}, {imap.n_nu})")
        c[imap.gamma.ravel()] = spec.cost.ravel()
        c[imap.r.ravel()] = L**2 / (2.0 * spec.epsilon)
    elif isinstance(spec, Dominance):
        c[imap.r.ravel()] = L**p
    else:
        raise TypeError(f"unknown objective {spec!r}")
    block = Power(1.0 / p, imap.block)
    cones = [(block, int(s)) for s in imap.r.ravel()]
    return ConicProgram(c, A, b, cones), imap


def universal_point(mu: DiscreteMeasure, nu: DiscreteMeasure, imap: IndexMap) -> np.ndarray:
    """Primal vector of ``gamma = mu x nu``, ``q = (x + y - b) gamma``.

    Always satisfies the equality rows; ``r`` is set to make the cone tight.
    The vector is in program units (see :class:`IndexMap`).
    """
    b = barycentre(mu)
    gamma = np.outer(mu.weights, nu.weights)
    zeta = mu.points[:, None, :] + nu.points[None, :, :] - b
    zeta = zeta / imap.scale
    x = np.zeros(imap.n_pairs * imap.block)
    x[imap.gamma] = gamma
    x[imap.q] = zeta * gamma[..., None]
    x[imap.r] = gamma * np.linalg.norm(zeta, axis=2) ** imap.p
    return x


@dataclass
class BiMartingalePlan:
    mu: DiscreteMeasure
    nu: DiscreteMeasure
    gamma: np.ndarray
    q: np.ndarray
    zeta: np.ndarray          # NaN off the support
    support: np.ndarray       # gamma > gamma_floor
    report: SolveReport | None = None
    c_value: float | None = None
    transport_cost: float | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.mu.dim

    def pairs(self):
        """Iterate ``(i, j, gamma_ij, zeta_ij)`` over the support."""
        for i, j in zip(*np.nonzero(self.support)):
            yield int(i), int(j), float(self.gamma[i, j]), self.zeta[i, j]

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        d = self.dim
        w.writerow(["i", "j", "gamma"] + [f"q_{k + 1}" for k in range(d)]
                   + [f"zeta_{k + 1}" for k in range(d)])
        for i in range(self.gamma.shape[0]):
            for j in range(self.gamma.shape[1]):
                zeta = ([f"{v:.12g}" for v in self.zeta[i, j]] if self.support[i, j]
                        else [""] * d)
                w.writerow([i, j, f"{self.gamma[i, j]:.12g}"]
                           + [f"{v:.12g}" for v in self.q[i, j]] + zeta)
        return out.getvalue()


def plan_from_arrays(mu, nu, gamma, q, gamma_floor: float = GAMMA_FLOOR,
                     report: SolveReport | None = None, cost=None,
                     tol: float | None = None) -> BiMartingalePlan:
    """Clean ``(gamma, q)``, derive ``zeta`` and validate the plan."""
    gamma = np.maximum(np.asarray(gamma, dtype=float), 0.0)
    q = np.array(q, dtype=float)
    support = gamma > gamma_floor
    dropped = float(gamma[~support].sum())
    gamma = np.where(support, gamma, 0.0)
    q[~support] = 0.0
    gamma = gamma / gamma.sum()
    zeta = np.full(q.shape, np.nan)
    zeta[support] = q[support] / gamma[support][:, None]

    row_res = np.max(np.abs(gamma.sum(axis=1) - mu.weights))
    col_res = np.max(np.abs(gamma.sum(axis=0) - nu.weights))
    q_row = np.max(np.abs(q.sum(axis=1) - mu.points * mu.weights[:, None]))
    q_col = np.max(np.abs(q.sum(axis=0) - nu.points * nu.weights[:, None]))
    scale = 1.0 + max(np.max(np.abs(mu.points)), np.max(np.abs(nu.points)))
    if tol is None:
        tol = Settings().tol_feas
    allowed = tol * scale + 2.0 * dropped * scale
    diagnostics = {
        "gamma_row_residual": float(row_res),
        "gamma_col_residual": float(col_res),
        "q_row_residual": float(q_row),
        "q_col_residual": float(q_col),
        "dropped_mass": dropped,
        "allowed_residual": float(allowed),
    }
    diagnostics["valid"] = bool(max(row_res, col_res, q_row, q_col) <= allowed
                                and abs(gamma.sum() - 1.0) <= tol)
    sq = np.sum(q**2, axis=2)
    c_value = float(np.sum(sq[support] / gamma[support]))
    transport = None if cost is None else float(np.sum(np.asarray(cost) * gamma))
    return BiMartingalePlan(mu, nu, gamma, q, zeta, support, report,
                            c_value=c_value, transport_cost=transport,
                            diagnostics=diagnostics)


def extract_plan(report: SolveReport, imap: IndexMap, mu, nu,
                 gamma_floor: float = GAMMA_FLOOR, cost=None,
                 tol: float | None = None) -> BiMartingalePlan:
    """Read ``(gamma, q, zeta)`` off an optimal solve."""
    if report.status != OPTIMAL:
        raise SolverFailure(report, "extraction")
    x = report.x
    return plan_from_arrays(mu, nu, x[imap.gamma], imap.scale * x[imap.q], gamma_floor,
                            report=report, cost=cost, tol=tol)


def solve_plan(mu, nu, spec, settings: Settings | None = None, warm_start=None,
               gamma_floor: float = GAMMA_FLOOR) -> BiMartingalePlan:
    """Build, solve and extract in one call; raises :class:`SolverFailure`."""
    program, imap = build(mu, nu, spec)
    report = solve(program, settings, warm_start=warm_start)
    if report.status != OPTIMAL:
        raise SolverFailure(report)
    cost = spec.cost if isinstance(spec, MotPenalty) else None
    tol = (settings or Settings()).tol_feas
    return extract_plan(report, imap, mu, nu, gamma_floor, cost=cost, tol=tol)
