"""Penalized approximation of martingale optimal transport.

For data ``(mu_n, nu_n, c)`` and a penalty ``epsilon_n`` the approximating
problem minimizes

    sum_ij c_ij gamma_ij + (1 / 2 epsilon_n) (sum_ij |q_ij|^2 / gamma_ij - C_n)

over bi-martingale pairs ``(gamma, q)``, where ``C_n`` is the quadratic
optimum of ``(mu_n, nu_n)``. The constant ``C_n`` does not change the
minimizer and only enters the reported penalty value. As ``n`` grows and
``epsilon_n`` decays slowly enough relative to the data perturbation, the
transport cost approaches the martingale transport optimum.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .analysis import martingale_residual
from .conic import OPTIMAL, ConicProgram, Nonnegative, Settings, solve
from .m2ot import MotPenalty, Quadratic, SolverFailure, build, check_pair, extract_plan, solve_plan
from .measure import DiscreteMeasure

EPSILON_FLOOR = 1e-12
DEFAULT_NS = (1, 2, 3, 5, 10, 20, 50, 100, 200, 500, 1000)
EXACT_MOT_MAX_PAIRS = 1000


def epsilon_schedule(gaps: Sequence[float], exponent: float = 0.5) -> list[float]:
    """``epsilon_n = max(gap_n, 1e-12) ** exponent``.

    With ``exponent`` in (0, 1) the ratio ``gap_n / epsilon_n`` equals
    ``gap_n ** (1 - exponent)`` and so vanishes whenever the gaps do.
    """
    if not 0.0 < exponent < 1.0:
        raise ValueError("exponent must lie in (0, 1)")
    gaps = np.asarray(gaps, dtype=float)
    if np.any(gaps < 0) or not np.all(np.isfinite(gaps)):
        raise ValueError("gaps must be finite and nonnegative")
    return [float(g) for g in np.maximum(gaps, EPSILON_FLOOR) ** exponent]


def power_schedule(ns: Sequence[int], eps0: float = 1.0, exponent: float = 0.5) -> list[float]:
    """Heuristic ``epsilon_n = eps0 * n ** -exponent`` for when gaps are unknown."""
    if eps0 <= 0:
        raise ValueError("eps0 must be positive")
    if not 0.0 < exponent < 1.0:
        raise ValueError("exponent must lie in (0, 1)")
    return [eps0 * float(n) ** -exponent for n in ns]


def instability_demo(n: int) -> tuple[DiscreteMeasure, DiscreteMeasure, np.ndarray]:
    """Two-point source and a rotated four-point target.

    ``mu`` puts mass 1/2 on ``x1 = (-1/2, 0)`` and ``x2 = (1/2, 0)``. With
    ``R`` the unit vector at angle ``pi / (2n)``, ``nu_n`` puts mass 1/4 on
    ``x1 - R, x2 - R, x1 + R, x2 + R``. The cost is ``|x - y|``.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    theta = math.pi / (2 * n)
    R = np.array([math.cos(theta), math.sin(theta)])
    x1 = np.array([-0.5, 0.0])
    x2 = np.array([0.5, 0.0])
    mu = DiscreteMeasure(np.array([x1, x2]), [0.5, 0.5])
    nu = DiscreteMeasure(np.array([x1 - R, x2 - R, x1 + R, x2 + R]), [0.25] * 4)
    cost = np.linalg.norm(mu.points[:, None, :] - nu.points[None, :, :], axis=2)
    return mu, nu, cost


def instability_gap(n: int) -> float:
    """Upper bound on the quadratic gap between ``nu_n`` and its limit.

    Both measures have standard deviation ``sqrt(5)/2`` and the transport
    distance between them is at most the rotation angle ``pi / (2n)``, so
    the metric sandwich bounds the gap by ``sqrt(5) * pi / (4n)``.
    """
    return math.sqrt(5.0) * math.pi / (4.0 * n)


def demo_schedule(ns: Sequence[int], exponent: float = 0.5) -> list[float]:
    return epsilon_schedule([instability_gap(n) for n in ns], exponent)


@dataclass
class StepRecord:
    n: int
    epsilon: float
    transport_cost: float
    penalty_value: float
    c_n: float
    res1: float
    res2: float
    iterations: int
    status: str


@dataclass
class ConvergenceReport:
    records: list = field(default_factory=list)
    status: str = OPTIMAL
    error: str | None = None
    # the last solve, kept for callers that want the plan itself
    last_plan: object = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def limit_estimate(self) -> float | None:
        return self.records[-1].transport_cost if self.records else None

    def to_csv(self, digits: int = 12) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["n", "epsilon", "cost", "penalty", "c_n", "res1", "res2",
                    "iterations", "status"])
        g = f"{{:.{digits}g}}".format
        for r in self.records:
            w.writerow([r.n, g(r.epsilon), g(r.transport_cost), g(r.penalty_value), g(r.c_n),
                        g(r.res1), g(r.res2), r.iterations, r.status])
        return out.getvalue()

    def to_svg(self, width: int = 480, height: int = 320) -> str:
        """Line plot of transport cost against ``log10 n``."""
        if not self.records:
            raise ValueError("nothing to plot")
        ns = np.log10([r.n for r in self.records])
        cs = np.array([r.transport_cost for r in self.records])
        pad = 40
        span_n = max(ns.max() - ns.min(), 1e-9)
        span_c = max(cs.max() - cs.min(), 1e-9)
        px = pad + (ns - ns.min()) / span_n * (width - 2 * pad)
        py = height - pad - (cs - cs.min()) / span_c * (height - 2 * pad)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
        dots = "".join(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="3"/>' for a, b in zip(px, py))
        return (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">'
            f'<rect width="100%" height="100%" fill="white"/>'
            f'<polyline points="{pts}" fill="none" stroke="black"/>{dots}'
            f'<text x="{pad}" y="{pad / 2:.0f}" font-size="12">transport cost vs log10 n '
            f'({cs.min():.4g} .. {cs.max():.4g})</text></svg>\n'
        )


DataFn = Callable[[int], tuple]


def run_sequence(data_fn: DataFn, ns: Sequence[int], schedule: Sequence[float],
                 warm_start: bool = False, settings: Settings | None = None) -> ConvergenceReport:
    """Solve the penalized problem for every ``n`` in ``ns``.

    Each step solves the quadratic problem for ``C_n`` and then the
    penalized problem with ``epsilon_n``. A failed solve ends the run; the
    records gathered so far are returned with ``status`` and ``error`` set.
    """
    ns = [int(n) for n in ns]
    if not ns:
        raise ValueError("at least one n is required")
    if len(schedule) != len(ns):
        raise ValueError("schedule and ns must have the same length")
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("ns must be strictly increasing")
    eps = [float(e) for e in schedule]
    if any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilon schedule must be positive and strictly decreasing")

    report = ConvergenceReport()
    warm = None
    for n, epsilon in zip(ns, eps):
        mu, nu, cost = data_fn(n)
        check_pair(mu, nu)
        try:
            c_n = solve_plan(mu, nu, Quadratic(), settings).report.objective_value
            program, imap = build(mu, nu, MotPenalty(cost, epsilon))
            guess = warm if warm is not None and warm[0].size == program.nvars else None
            sol = solve(program, settings, warm_start=guess)
            if sol.status != OPTIMAL:
                raise SolverFailure(sol)
        except SolverFailure as exc:
            report.status = exc.report.status
            report.error = f"n={n}: {exc}"
            return report
        plan = extract_plan(sol, imap, mu, nu, cost=cost)
        res1, res2 = martingale_residual(plan)
        transport = float(np.sum(np.asarray(cost) * plan.gamma))
        penalty = sol.objective_value - float(np.sum(cost * sol.x[imap.gamma])) \
            - c_n / (2.0 * epsilon)
        report.records.append(StepRecord(n, epsilon, transport, penalty, c_n, res1, res2,
                                         sol.iterations, sol.status))
        report.last_plan = plan
        if warm_start:
            warm = (sol.x, sol.y)
    return report


def exact_mot(mu: DiscreteMeasure, nu: DiscreteMeasure, cost,
              settings: Settings | None = None) -> tuple[float, np.ndarray]:
    """Martingale optimal transport value by a linear program.

    Minimizes ``sum c_ij gamma_ij`` over couplings with
    ``sum_j gamma_ij (y_j - x_i) = 0`` for every ``i``. Meant for small
    instances (at most 1000 pairs).
    """
    check_pair(mu, nu)
    cost = np.asarray(cost, dtype=float)
    n_mu, n_nu, d = len(mu), len(nu), mu.dim
    if cost.shape != (n_mu, n_nu):
        raise ValueError("cost matrix shape does not match the measures")
    n = n_mu * n_nu
    if n > EXACT_MOT_MAX_PAIRS:
        raise ValueError(f"{n} pairs exceeds the limit of {EXACT_MOT_MAX_PAIRS}")
    pair = np.arange(n)
    ii, jj = np.divmod(pair, n_nu)
    rows = [ii, n_mu + jj]
    cols = [pair, pair]
    vals = [np.ones(n), np.ones(n)]
    for k in range(d):
        rows.append(n_mu + n_nu + k * n_mu + ii)
        cols.append(pair)
        vals.append(nu.points[jj, k] - mu.points[ii, k])
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n_mu + n_nu + d * n_mu, n))
    b = np.concatenate([mu.weights, nu.weights, np.zeros(d * n_mu)])
    report = solve(ConicProgram(cost.ravel(), A, b, [(Nonnegative(n), 0)]), settings)
    if report.status != OPTIMAL:
        raise SolverFailure(report, "martingale transport LP")
    return report.objective_value, report.x.reshape(n_mu, n_nu)
