import numpy as np
import pytest

from bimartingale import m2ot
from bimartingale.cdf1d import lub_1d
from bimartingale.measure import DiscreteMeasure, moment
from bimartingale.oracle import MAX_VARIABLES, GridSpec, OracleError, grid_dominance_lp

from conftest import random_pair


def square(z):
    return np.sum(z**2, axis=1)


def test_dirac_at_origin():
    d0 = DiscreteMeasure.dirac([0.0, 0.0])
    rho, cost = grid_dominance_lp(d0, d0, lambda z: square(z) + 1.0,
                                  GridSpec((-1.0, -1.0), (1.0, 1.0), (3, 3)))
    assert cost == pytest.approx(1.0, abs=1e-9)
    assert rho.allclose(d0)


def test_cross_example_on_integer_grid(cross_pair):
    mu, nu = cross_pair
    rho, cost = grid_dominance_lp(mu, nu, square, GridSpec((-2, -2), (2, 2), (5, 5)))
    assert cost == pytest.approx(5.0, abs=1e-7)
    assert moment(rho, 2) == pytest.approx(5.0, abs=1e-7)


def test_one_dimensional_convergence():
    mu = DiscreteMeasure([[-1.0], [1.0]], [0.5, 0.5])
    nu = DiscreteMeasure([[-2.0], [0.0], [2.0]], [0.2, 0.6, 0.2])
    target = moment(lub_1d(mu, nu), 2)
    grid = GridSpec((-2.0,), (2.0,), (7,))
    errors = []
    for _ in range(4):
        _, cost = grid_dominance_lp(mu, nu, square, grid)
        h = 4.0 / (grid.counts[0] - 1)
        assert target - 1e-9 <= cost <= target + h**2 / 4 + 1e-9
        errors.append(cost - target)
        grid = grid.refined()
    assert errors[-1] <= errors[0]


def _instance(rng):
    mu, nu = random_pair(rng, 2, 3)
    plan = m2ot.solve_plan(mu, nu, m2ot.Dominance(2))
    rho_pts = plan.zeta[plan.support]
    # the box must hold the solver's dominant as well, so that its
    # interpolation onto the grid is a feasible grid plan
    pts = np.vstack([mu.points, nu.points, rho_pts])
    grid = GridSpec(tuple(pts.min(axis=0)), tuple(pts.max(axis=0)), (9, 9))
    return mu, nu, plan.report.objective_value, grid


def test_bounds_and_refinement(rng):
    for _ in range(3):
        mu, nu, solver_cost, grid = _instance(rng)
        costs = []
        for _ in range(2):
            _, cost = grid_dominance_lp(mu, nu, square, grid)
            h = (np.asarray(grid.upper) - np.asarray(grid.lower)) / (np.asarray(grid.counts) - 1)
            assert cost >= solver_cost - 1e-6
            assert cost <= solver_cost + np.sum(h**2) / 4 + 1e-6
            costs.append(cost)
            grid = grid.refined()
        assert costs[1] <= costs[0] + 1e-9


def test_grid_spec_validation():
    with pytest.raises(ValueError):
        GridSpec((0.0,), (1.0,), (1,))
    with pytest.raises(ValueError):
        GridSpec((0.0,), (0.0,), (3,))
    with pytest.raises(ValueError):
        GridSpec((0.0, 0.0), (1.0,), (3,))
    g = GridSpec((0.0,), (1.0,), (3,))
    assert g.refined().counts == (5,)
    assert np.allclose(g.points().ravel(), [0.0, 0.5, 1.0])


def test_oracle_errors(cross_pair):
    mu, nu = cross_pair
    with pytest.raises(OracleError):
        grid_dominance_lp(mu, nu, square, GridSpec((-1, -1), (1, 1), (3, 3)))
    with pytest.raises(OracleError):
        grid_dominance_lp(mu, nu, square, GridSpec((-2,), (2,), (5,)))
    side = int(np.sqrt(MAX_VARIABLES / 16)) + 2
    with pytest.raises(OracleError):
        grid_dominance_lp(mu, nu, square, GridSpec((-2, -2), (2, 2), (side, side)))
    with pytest.raises(OracleError):
        grid_dominance_lp(mu, nu, lambda z: np.ones(3), GridSpec((-2, -2), (2, 2), (5, 5)))
