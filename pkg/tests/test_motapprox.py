import math

import numpy as np
import pytest

from bimartingale.cdf1d import convex_order_1d
from bimartingale.conic import Settings
from bimartingale.measure import DiscreteMeasure, barycentre
from bimartingale.motapprox import (EPSILON_FLOOR, demo_schedule, epsilon_schedule, exact_mot,
                                    instability_demo, power_schedule, run_sequence)

ORDERED_MU = DiscreteMeasure([[-1.0], [1.0]], [0.5, 0.5])
ORDERED_NU = DiscreteMeasure([[-3.0], [0.0], [1.0]], [0.2, 0.2, 0.6])


def _ordered(_n):
    cost = np.abs(ORDERED_MU.points[:, None, 0] - ORDERED_NU.points[None, :, 0])
    return ORDERED_MU, ORDERED_NU, cost


def test_schedule_floor_and_rate():
    assert epsilon_schedule([0.0, 0.0]) == pytest.approx([1e-6, 1e-6])
    assert EPSILON_FLOOR == 1e-12
    gaps = [1e-2, 1e-4, 1e-8]
    for g, e in zip(gaps, epsilon_schedule(gaps)):
        assert g / e == pytest.approx(math.sqrt(g))


def test_demo_schedule_constant():
    for n, e in zip([1, 10, 1000], demo_schedule([1, 10, 1000])):
        assert e * math.sqrt(n) == pytest.approx(1.325, abs=5e-4)


def test_schedule_errors():
    for bad in (0.0, 1.0, 1.5):
        with pytest.raises(ValueError):
            epsilon_schedule([0.1], bad)
    with pytest.raises(ValueError):
        epsilon_schedule([-0.1])
    with pytest.raises(ValueError):
        power_schedule([1, 2], eps0=0.0)
    assert power_schedule([1, 4], eps0=2.0) == pytest.approx([2.0, 1.0])


def test_instability_data():
    mu, nu, cost = instability_demo(1)
    assert np.allclose(nu.points[0], [-0.5, -1.0])
    assert np.allclose(mu.points, [[-0.5, 0.0], [0.5, 0.0]])
    assert cost.shape == (2, 4)
    assert cost[0, 0] == pytest.approx(1.0)
    for n in (1, 2, 7, 100):
        assert np.allclose(barycentre(instability_demo(n)[1]), 0.0, atol=1e-15)
    limit = instability_demo(10**9)[1]
    assert np.allclose(np.sort(limit.points[:, 0]), [-1.5, -0.5, 0.5, 1.5], atol=1e-8)
    assert np.allclose(limit.points[:, 1], 0.0, atol=1e-8)
    with pytest.raises(ValueError):
        instability_demo(0)


def test_demo_costs_trend():
    ns = [3, 5, 20, 100]
    rep = run_sequence(instability_demo, ns, demo_schedule(ns))
    assert rep.ok
    costs = [r.transport_cost for r in rep.records]
    assert costs[:3] == pytest.approx([0.9223, 0.8209, 0.6928], abs=1e-3)
    assert all(b < a for a, b in zip(costs, costs[1:]))
    assert min(costs) >= 2 / 3 - 1e-2
    assert rep.limit_estimate == costs[-1]


def test_penalty_sandwich():
    ns = [2, 8]
    rep = run_sequence(instability_demo, ns, demo_schedule(ns))
    for n, r in zip(ns, rep.records):
        # penalty = (sum r - C_n) / (2 eps), and C_n minimizes sum r
        assert 2 * r.epsilon * r.penalty_value >= -1e-6
        assert r.transport_cost + r.penalty_value >= instability_demo(n)[2].min() - 1e-6


def test_constant_ordered_data_matches_exact_mot():
    assert convex_order_1d(ORDERED_MU, ORDERED_NU)
    exact, gamma = exact_mot(*_ordered(0))
    assert gamma.sum() == pytest.approx(1.0, abs=1e-7)
    rep = run_sequence(_ordered, [1, 2, 3], [1.0, 0.1, 0.01], warm_start=True)
    assert rep.ok
    for r in rep.records:
        assert r.transport_cost == pytest.approx(exact, abs=1e-6)
        assert r.res1 <= 1e-6 and r.res2 <= 1e-6


def test_run_sequence_validation():
    with pytest.raises(ValueError):
        run_sequence(_ordered, [], [])
    with pytest.raises(ValueError):
        run_sequence(_ordered, [1, 2], [0.1])
    with pytest.raises(ValueError):
        run_sequence(_ordered, [2, 1], [0.2, 0.1])
    with pytest.raises(ValueError):
        run_sequence(_ordered, [1, 2], [0.1, 0.2])
    with pytest.raises(ValueError):
        exact_mot(ORDERED_MU, ORDERED_NU, np.ones((3, 2)))


def test_failed_step_keeps_partial_report():
    rep = run_sequence(_ordered, [1, 2], [0.5, 0.1], settings=Settings(max_iter=5))
    assert not rep.ok
    assert rep.records == [] and rep.status == "MaxIterations"
    assert rep.error.startswith("n=1")


def test_report_formats():
    rep = run_sequence(_ordered, [1, 2], [0.5, 0.1])
    lines = rep.to_csv().splitlines()
    assert lines[0] == "n,epsilon,cost,penalty,c_n,res1,res2,iterations,status"
    assert len(lines) == 3 and lines[1].startswith("1,0.5,")
    svg = rep.to_svg()
    assert svg.startswith("<svg") and svg.count("<circle") == 2
