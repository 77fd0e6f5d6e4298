import numpy as np
import pytest
import scipy.sparse as sp

from bimartingale.conic import (INFEASIBLE, MAX_ITERATIONS, OPTIMAL, UNBOUNDED, ConicProgram,
                                Nonnegative, Power, SecondOrder, Settings, Zero, solve)


def test_shifted_nonnegative_variable():
    # minimize x  s.t.  x - s = 1, s >= 0
    prog = ConicProgram([1.0, 0.0], sp.csr_matrix([[1.0, -1.0]]), [1.0], [(Nonnegative(1), 1)])
    rep = solve(prog)
    assert rep.status == OPTIMAL
    assert rep.objective_value == pytest.approx(1.0, abs=1e-7)


def test_second_order_norm():
    # minimize t  s.t.  (t, 3, 4) in SOC
    A = sp.csr_matrix([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    prog = ConicProgram([1.0, 0.0, 0.0], A, [3.0, 4.0], [(SecondOrder(3), 0)])
    rep = solve(prog)
    assert rep.status == OPTIMAL
    assert rep.objective_value == pytest.approx(5.0, abs=1e-7)


def test_power_cone_bound():
    # minimize r  s.t.  (r, 1, 2) in Power(1/2): sqrt(r) >= 2
    A = sp.csr_matrix([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    prog = ConicProgram([1.0, 0.0, 0.0], A, [1.0, 2.0], [(Power(0.5, 3), 0)])
    rep = solve(prog)
    assert rep.status == OPTIMAL
    assert rep.objective_value == pytest.approx(4.0, abs=1e-6)


def _planted_lp(rng, m, n):
    """LP with a known primal-dual optimal pair built by construction."""
    A = sp.random(m, n, density=0.5, random_state=rng, data_rvs=rng.standard_normal).tocsr()
    x = rng.uniform(0.5, 2.0, n)
    z = rng.uniform(0.5, 2.0, n)
    basic = rng.random(n) < 0.5
    x[~basic] = 0.0
    z[basic] = 0.0
    y = rng.normal(size=m)
    c = A.T @ y + z
    b = A @ x
    return ConicProgram(c, A, b, [(Nonnegative(n), 0)]), float(c @ x)


def _planted_socp(rng, m, blocks):
    """Product of second-order cones with complementary planted x and z."""
    xs, zs, cones, start = [], [], [], 0
    for k in blocks:
        v = rng.normal(size=k - 1)
        xs.append(np.concatenate([[np.linalg.norm(v)], v]))
        lam = rng.uniform(0.5, 2.0)
        zs.append(np.concatenate([[lam * np.linalg.norm(v)], -lam * v]))
        cones.append((SecondOrder(k), start))
        start += k
    x, z = np.concatenate(xs), np.concatenate(zs)
    n = x.size
    A = sp.csr_matrix(rng.normal(size=(m, n)))
    y = rng.normal(size=m)
    c = A.T @ y + z
    return ConicProgram(c, A, A @ x, cones), float(c @ x)


@pytest.mark.parametrize("seed", range(5))
def test_planted_lp(seed):
    rng = np.random.default_rng(seed)
    prog, opt = _planted_lp(rng, 6, 14)
    st = Settings()
    rep = solve(prog, st)
    assert rep.status == OPTIMAL
    assert abs(rep.objective_value - opt) <= st.tol_gap * (1 + abs(opt)) * 10
    assert rep.objective_value == pytest.approx(float(prog.c @ rep.x), abs=1e-12)
    assert rep.primal_residual <= st.tol_feas and rep.dual_residual <= st.tol_feas


@pytest.mark.parametrize("seed", range(4))
def test_planted_socp(seed):
    rng = np.random.default_rng(100 + seed)
    prog, opt = _planted_socp(rng, 5, [3, 4, 3])
    st = Settings()
    rep = solve(prog, st)
    assert rep.status == OPTIMAL
    assert abs(rep.objective_value - opt) <= st.tol_gap * (1 + abs(opt)) * 10


def test_free_variables_and_zero_cone():
    # minimize x0 + x1 with x0 free, x1 = 2 via a zero cone on x2 = x1 - 2
    A = sp.csr_matrix([[1.0, 0.0, 0.0], [0.0, 1.0, -1.0]])
    prog = ConicProgram([1.0, 1.0, 0.0], A, [3.0, 2.0], [(Zero(1), 2)])
    rep = solve(prog)
    assert rep.status == OPTIMAL
    assert rep.objective_value == pytest.approx(5.0, abs=1e-7)


def test_infeasible_detected():
    # x >= 0 with x1 + x2 = -1
    prog = ConicProgram([1.0, 1.0], sp.csr_matrix([[1.0, 1.0]]), [-1.0], [(Nonnegative(2), 0)])
    rep = solve(prog)
    assert rep.status == INFEASIBLE


def test_unbounded_detected():
    # minimize -x1 with x1 - x2 = 0, x >= 0
    prog = ConicProgram([-1.0, 0.0], sp.csr_matrix([[1.0, -1.0]]), [0.0], [(Nonnegative(2), 0)])
    rep = solve(prog)
    assert rep.status == UNBOUNDED


def test_iteration_budget():
    rng = np.random.default_rng(7)
    prog, _ = _planted_lp(rng, 6, 14)
    rep = solve(prog, Settings(max_iter=3))
    assert rep.status == MAX_ITERATIONS
    assert rep.iterations == 3


def test_bit_reproducible():
    rng = np.random.default_rng(3)
    prog, _ = _planted_socp(rng, 4, [3, 3])
    a, b = solve(prog), solve(prog)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)
    assert a.iterations == b.iterations


def test_scaling_off_still_solves():
    rng = np.random.default_rng(11)
    prog, opt = _planted_lp(rng, 4, 8)
    rep = solve(prog, Settings(scaling=False))
    assert rep.status == OPTIMAL
    assert rep.objective_value == pytest.approx(opt, abs=1e-6)


def test_warm_start_from_solution_is_fast():
    rng = np.random.default_rng(5)
    prog, _ = _planted_lp(rng, 6, 14)
    cold = solve(prog)
    warm = solve(prog, warm_start=(cold.x, cold.y))
    assert warm.status == OPTIMAL
    assert warm.iterations <= cold.iterations


def test_dump_load_roundtrip(tmp_path):
    rng = np.random.default_rng(9)
    soc, _ = _planted_socp(rng, 3, [3, 4])
    prog = ConicProgram(np.concatenate([soc.c, [1.0, 2.0, 0.5]]),
                        sp.hstack([soc.A, sp.csr_matrix((3, 3))]), soc.b,
                        soc.cones + [(Power(0.4, 3), 7)])
    path = tmp_path / "prog.txt"
    prog.dump(path)
    text = path.read_text()
    again = ConicProgram.load(path)
    assert np.array_equal(again.c, prog.c) and np.array_equal(again.b, prog.b)
    assert (again.A != prog.A).nnz == 0
    assert [(blk.key, s) for blk, s in again.cones] == [(blk.key, s) for blk, s in prog.cones]
    again.dump(path)
    assert path.read_text() == text
    assert text.splitlines()[0] == f"{prog.nrows} {prog.nvars} {prog.A.nnz}"


def test_program_validation():
    A = sp.csr_matrix(np.ones((1, 3)))
    with pytest.raises(ValueError):
        ConicProgram(np.ones(2), A, [1.0])
    with pytest.raises(ValueError):
        ConicProgram(np.ones(3), A, [1.0, 2.0])
    with pytest.raises(ValueError):
        ConicProgram(np.ones(3), A, [1.0], [(Nonnegative(2), 0), (Nonnegative(2), 1)])
    with pytest.raises(ValueError):
        ConicProgram(np.ones(3), A, [1.0], [(Nonnegative(2), 2)])
