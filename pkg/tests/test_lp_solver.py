import numpy as np
import pytest

from georelay.lp_solver import (
    INFEASIBLE,
    OPTIMAL,
    UNBOUNDED,
    LinearProgram,
    MilpSpec,
    solve_lp,
    solve_milp,
)
from oracles import brute_force_knapsack_milp


def simple_lp(c, a_ub=None, b_ub=None, a_eq=None, b_eq=None, lower=None, upper=None):
    n = len(c)
    return LinearProgram(
        np.asarray(c, float),
        np.zeros((0, n)) if a_ub is None else np.asarray(a_ub, float),
        np.zeros(0) if b_ub is None else np.asarray(b_ub, float),
        np.zeros((0, n)) if a_eq is None else np.asarray(a_eq, float),
        np.zeros(0) if b_eq is None else np.asarray(b_eq, float),
        np.zeros(n) if lower is None else np.asarray(lower, float),
        np.full(n, 10.0) if upper is None else np.asarray(upper, float),
    )


def test_min_x_with_floor():
    lp = simple_lp([1.0], a_ub=[[-1.0]], b_ub=[-3.0])  # x >= 3
    res = solve_lp(lp)
    assert res.status == OPTIMAL
    assert res.x[0] == pytest.approx(3.0, abs=1e-9)


def test_bounds_only_snaps_to_cheaper_bound():
    lp = simple_lp([2.0, -1.0, 0.0], lower=[1.0, 1.0, 1.0], upper=[5.0, 5.0, 5.0])
    res = solve_lp(lp)
    assert np.allclose(res.x, [1.0, 5.0, 1.0])


def test_equality_row():
    lp = simple_lp([1.0, 2.0], a_eq=[[1.0, 1.0]], b_eq=[4.0])
    res = solve_lp(lp)
    assert res.status == OPTIMAL
    assert res.value == pytest.approx(4.0 + 0.0, abs=1e-8)
    assert res.x[0] == pytest.approx(4.0, abs=1e-8)


def test_infeasible_detected():
    lp = simple_lp([1.0], a_ub=[[1.0]], b_ub=[-1.0], lower=[0.0], upper=[5.0])  # x <= -1
    assert solve_lp(lp).status == INFEASIBLE


def test_random_lps_match_scipy():
    """50 random bounded LPs against an independent reference solver."""
    scipy_opt = pytest.importorskip("scipy.optimize")
    rng = np.random.default_rng(123)
    solved = 0
    for _ in range(50):
        n = int(rng.integers(3, 12))
        m = int(rng.integers(1, 8))
        a = rng.normal(size=(m, n))
        x0 = rng.uniform(0.2, 0.8, n)
        b = a @ x0 + rng.uniform(0.05, 1.0, m)  # strictly feasible at x0
        c = rng.normal(size=n)
        lower = np.zeros(n)
        upper = np.ones(n)
        lp = simple_lp(c, a_ub=a, b_ub=b, lower=lower, upper=upper)
        mine = solve_lp(lp)
        ref = scipy_opt.linprog(c, A_ub=a, b_ub=b, bounds=list(zip(lower, upper)), method="highs")
        assert mine.status == OPTIMAL and ref.status == 0
        scale = max(1.0, abs(ref.fun))
        assert abs(mine.value - ref.fun) <= 1e-6 * scale
        # returned point satisfies every row within tolerance on scaled data
        row_scale = np.maximum(np.max(np.abs(a), axis=1), 1e-12)
        assert np.all((a @ mine.x - b) / row_scale <= 1e-9)
        solved += 1
    assert solved == 50


def test_unbounded_detected():
    # min -s for a slack-like direction: x free upward via infinite upper? bounds
    # are finite by contract, so emulate with a >= row and a huge box instead
    lp = simple_lp([-1.0], a_ub=[[-1.0]], b_ub=[0.0], lower=[0.0], upper=[1e9])
    res = solve_lp(lp)
    # with finite bounds the problem is bounded; the optimum pegs the box
    assert res.status == OPTIMAL
    assert res.x[0] == pytest.approx(1e9)


def test_milp_integral_relaxation_short_circuits():
    lp = simple_lp([1.0, 1.0], a_ub=[[-1.0, 0.0]], b_ub=[-2.0], upper=[5.0, 5.0])
    spec = MilpSpec(lp, (0, 1))
    milp = solve_milp(spec)
    lp_res = solve_lp(lp)
    assert milp.value == pytest.approx(lp_res.value, abs=1e-9)
    assert np.allclose(milp.x, lp_res.x)


def test_milp_matches_enumeration_on_knapsack_toys():
    rng = np.random.default_rng(31)
    for _ in range(12):
        n = 5
        c = -rng.uniform(0.5, 3.0, n)  # maximize value <=> minimize negative
        a = rng.uniform(0.2, 2.0, (1, n))
        b = np.array([float(rng.uniform(2.0, 5.0))])
        upper = rng.integers(1, 4, n).astype(float)
        lp = simple_lp(c, a_ub=a, b_ub=b, upper=upper)
        spec = MilpSpec(lp, tuple(range(n)))
        mine = solve_milp(spec)
        ref_x, ref_val = brute_force_knapsack_milp(c, a, b, np.zeros(n), upper)
        assert mine.status == OPTIMAL
        assert mine.value == pytest.approx(ref_val, abs=1e-9)
        # LP relaxation never exceeds the integer optimum for minimization
        assert solve_lp(lp).value <= mine.value + 1e-9


def test_milp_infeasible():
    lp = simple_lp([1.0], a_ub=[[1.0]], b_ub=[-2.0], upper=[5.0])
    assert solve_milp(MilpSpec(lp, (0,))).status == INFEASIBLE


def test_milp_integer_bounds_validated():
    lp = simple_lp([1.0], upper=[2.5])
    with pytest.raises(ValueError):
        MilpSpec(lp, (0,))


def test_deterministic_bit_for_bit():
    rng = np.random.default_rng(77)
    a = rng.normal(size=(4, 6))
    b = a @ np.full(6, 0.5) + 0.3
    c = rng.normal(size=6)
    lp = simple_lp(c, a_ub=a, b_ub=b, upper=np.ones(6))
    r1 = solve_lp(lp)
    r2 = solve_lp(lp)
    assert r1.value == r2.value
    assert np.array_equal(r1.x, r2.x)
    spec = MilpSpec(simple_lp(c, a_ub=a, b_ub=b, upper=np.full(6, 3.0)), (0, 1, 2))
    m1 = solve_milp(spec)
    m2 = solve_milp(spec)
    assert m1.value == m2.value
    assert np.array_equal(m1.x, m2.x)


def test_degenerate_fixed_variables():
    lp = simple_lp([1.0, -2.0], a_eq=[[1.0, 1.0]], b_eq=[3.0], lower=[3.0, 0.0], upper=[3.0, 4.0])
    res = solve_lp(lp)
    assert res.status == OPTIMAL
    assert res.x[0] == 3.0
    assert res.x[1] == pytest.approx(0.0, abs=1e-9)
