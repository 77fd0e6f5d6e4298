"""Quantities derived from quadratic bi-martingale solves.

The central number is

    Z2(mu, nu) = C(mu, nu) - (m2(mu) + m2(nu)) / 2,

where ``C`` is the optimal value of the quadratic problem (the least second
moment of a common convex dominant). From it follow the convex-order index
``alpha = (m2(nu) - m2(mu)) / (2 Z2)`` and the distances to the two
dominance cones.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .conic import INFEASIBLE, OPTIMAL, ConicProgram, Nonnegative, Settings, solve
from .m2ot import (GAMMA_FLOOR, BiMartingalePlan, Quadratic, SolverFailure, check_pair,
                   plan_from_arrays, solve_plan)
from .measure import DiscreteMeasure, barycentre, moment, same_dim

STRASSEN_TOL = 1e-7
MERGE_FACTOR = 1e-6


def _same_measure(mu: DiscreteMeasure, nu: DiscreteMeasure) -> bool:
    a, b = mu.sorted(), nu.sorted()
    return (a.dim == b.dim and len(a) == len(b)
            and np.array_equal(a.points, b.points) and np.array_equal(a.weights, b.weights))


def _identity_plan(mu: DiscreteMeasure) -> BiMartingalePlan:
    gamma = np.diag(mu.weights)
    q = gamma[..., None] * mu.points[:, None, :]
    return plan_from_arrays(mu, mu, gamma, q)


def pushforward_rho(plan: BiMartingalePlan, merge_radius: float | None = None) -> DiscreteMeasure:
    """The measure ``zeta # gamma``, with atoms closer than ``merge_radius`` merged.

    The default radius is ``1e-6 * (1 + diameter)`` of the union of the two
    supports.
    """
    if merge_radius is None:
        pts = np.vstack([plan.mu.points, plan.nu.points])
        span = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
        merge_radius = MERGE_FACTOR * (1.0 + span)
    mask = plan.support
    return DiscreteMeasure(plan.zeta[mask], plan.gamma[mask], merge_radius=merge_radius)


def martingale_residual(plan: BiMartingalePlan) -> tuple[float, float]:
    """Violations of the two conditional-mean identities.

    ``res1 = sum_i | sum_j gamma_ij zeta_ij - mu_i x_i |`` and ``res2`` is
    the same with the roles of the marginals exchanged. Pairs off the
    support carry no mass and do not contribute.
    """
    gz = np.where(plan.support[..., None], plan.gamma[..., None] * np.nan_to_num(plan.zeta), 0.0)
    mu, nu = plan.mu, plan.nu
    res1 = np.linalg.norm(gz.sum(axis=1) - mu.weights[:, None] * mu.points, axis=1).sum()
    res2 = np.linalg.norm(gz.sum(axis=0) - nu.weights[:, None] * nu.points, axis=1).sum()
    return float(res1), float(res2)


@dataclass
class OrderDiagnostics:
    """Outcome of a quadratic solve.

    ``alpha`` is ``None`` (and ``alpha_defined`` false) when the two
    measures coincide, since the index is only meaningful for distinct
    measures.
    """

    z2: float
    c_value: float
    alpha: float | None
    forward_projection_distance: float
    backward_projection_distance: float
    m2_mu: float
    m2_nu: float
    residuals: dict = field(default_factory=dict)
    plan: BiMartingalePlan | None = field(default=None, repr=False)

    @property
    def alpha_defined(self) -> bool:
        return self.alpha is not None

    def to_dict(self) -> dict:
        return {
            "z2": self.z2,
            "c": self.c_value,
            "alpha": self.alpha,
            "proj_forward": self.forward_projection_distance,
            "proj_backward": self.backward_projection_distance,
            "residuals": dict(self.residuals),
        }

    def to_json(self, digits: int = 12) -> str:
        def fmt(v):
            if isinstance(v, dict):
                return {k: fmt(x) for k, x in v.items()}
            if isinstance(v, float):
                return float(f"{v:.{digits}g}")
            return v
        return json.dumps(fmt(self.to_dict()))


def diagnostics_from_value(c_value: float, m2_mu: float, m2_nu: float,
                           same: bool = False) -> OrderDiagnostics:
    """Fill the derived fields from ``C`` and the two second moments."""
    if same:
        return OrderDiagnostics(0.0, m2_mu, None, 0.0, 0.0, m2_mu, m2_nu)
    z2 = c_value - 0.5 * (m2_mu + m2_nu)
    gap = m2_nu - m2_mu
    alpha = gap / (2.0 * z2) if z2 > 0 else None
    return OrderDiagnostics(
        z2=z2,
        c_value=c_value,
        alpha=alpha,
        forward_projection_distance=0.5 * (z2 - 0.5 * gap),
        backward_projection_distance=0.5 * (z2 + 0.5 * gap),
        m2_mu=m2_mu,
        m2_nu=m2_nu,
    )


def z2(mu: DiscreteMeasure, nu: DiscreteMeasure, settings: Settings | None = None,
       gamma_floor: float = GAMMA_FLOOR) -> OrderDiagnostics:
    """Solve the quadratic problem and report ``Z2``, ``alpha`` and distances."""
    check_pair(mu, nu)
    m2_mu, m2_nu = moment(mu, 2), moment(nu, 2)
    if _same_measure(mu, nu):
        diag = diagnostics_from_value(m2_mu, m2_mu, m2_nu, same=True)
        diag.plan = _identity_plan(mu)
        diag.residuals = {"martingale_1": 0.0, "martingale_2": 0.0}
        return diag
    plan = solve_plan(mu, nu, Quadratic(), settings, gamma_floor=gamma_floor)
    diag = diagnostics_from_value(plan.report.objective_value, m2_mu, m2_nu)
    res1, res2 = martingale_residual(plan)
    diag.plan = plan
    diag.residuals = {
        "martingale_1": res1,
        "martingale_2": res2,
        "primal": plan.report.primal_residual,
        "dual": plan.report.dual_residual,
        "gap": plan.report.gap,
        "iterations": plan.report.iterations,
    }
    return diag


def zolotarev_project(mu: DiscreteMeasure, nu: DiscreteMeasure,
                      settings: Settings | None = None) -> DiscreteMeasure:
    """A common convex dominant of ``mu`` and ``nu`` of least second moment."""
    return pushforward_rho(z2(mu, nu, settings).plan)


def _transport_rows(n_mu, n_nu):
    pair = np.arange(n_mu * n_nu)
    ii, jj = np.divmod(pair, n_nu)
    rows = np.concatenate([ii, n_mu + jj])
    cols = np.concatenate([pair, pair])
    return sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n_mu + n_nu, pair.size))


def wasserstein2_squared(mu: DiscreteMeasure, nu: DiscreteMeasure,
                         settings: Settings | None = None) -> float:
    """Squared quadratic Wasserstein distance, by a linear program."""
    same_dim(mu, nu)
    if _same_measure(mu, nu):
        return 0.0
    n = len(mu) * len(nu)
    cost = np.sum((mu.points[:, None, :] - nu.points[None, :, :]) ** 2, axis=2).ravel()
    A = _transport_rows(len(mu), len(nu))
    b = np.concatenate([mu.weights, nu.weights])
    report = solve(ConicProgram(cost, A, b, [(Nonnegative(n), 0)]), settings)
    if report.status != OPTIMAL:
        raise SolverFailure(report, "transport LP")
    return max(report.objective_value, 0.0)


def wasserstein2(mu: DiscreteMeasure, nu: DiscreteMeasure,
                 settings: Settings | None = None) -> float:
    return math.sqrt(wasserstein2_squared(mu, nu, settings))


def strassen_feasible(mu: DiscreteMeasure, rho: DiscreteMeasure, tol: float = STRASSEN_TOL,
                      settings: Settings | None = None) -> bool:
    """Whether a martingale coupling from ``mu`` to ``rho`` exists.

    Solves the phase-1 program (zero objective) over couplings of ``mu``
    and ``rho`` whose conditional means from each ``x_i`` are ``x_i``, and
    reads feasibility off the final primal residual. A barycentre offset
    below ``tol`` is removed from ``rho`` first, since it only reflects
    rounding in how ``rho`` was produced.
    """
    same_dim(mu, rho)
    offset = barycentre(mu) - barycentre(rho)
    if np.max(np.abs(offset)) > tol:
        return False
    z = rho.points + offset
    n_mu, n_rho, d = len(mu), len(rho), mu.dim
    n = n_mu * n_rho
    pair = np.arange(n)
    ii, jj = np.divmod(pair, n_rho)
    marg = _transport_rows(n_mu, n_rho).tocoo()
    rows = [marg.row]
    cols = [marg.col]
    vals = [marg.data]
    for k in range(d):
        rows.append(n_mu + n_rho + k * n_mu + ii)
        cols.append(pair)
        vals.append(z[jj, k])
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n_mu + n_rho + d * n_mu, n))
    b = np.concatenate([mu.weights, rho.weights,
                        (mu.weights[:, None] * mu.points).T.ravel()])
    report = solve(ConicProgram(np.zeros(n), A, b, [(Nonnegative(n), 0)]), settings)
    if report.status == INFEASIBLE:
        return False
    return bool(report.primal_residual <= tol)
