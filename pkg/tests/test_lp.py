import numpy as np
import pytest
from scipy.optimize import linprog

from kfair.milp.lp import INFEASIBLE, OPTIMAL, LinearProgram, solve_lp

from conftest import bfs_optimum, random_standard_lp


def test_matches_bfs_enumeration():
    rng = np.random.default_rng(11)
    for _ in range(60):
        c, A, b = random_standard_lp(rng)
        ref = bfs_optimum(c, A, b)
        res = solve_lp(c, A_eq=A, b_eq=b, lower=np.zeros(len(c)), upper=np.full(len(c), 1e6))
        if ref is None:
            assert res.status == INFEASIBLE
        else:
            assert res.status == OPTIMAL
            assert res.fun == pytest.approx(ref, abs=1e-8)


def test_matches_highs_on_bounded_mixed_rows():
    rng = np.random.default_rng(5)
    for _ in range(200):
        n, m1, m2 = int(rng.integers(1, 12)), int(rng.integers(0, 8)), int(rng.integers(0, 3))
        x0 = rng.uniform(-1, 1, n)
        A = rng.normal(size=(m1, n))
        b = A @ x0 + rng.uniform(-0.5, 1, m1)
        Ae = rng.normal(size=(m2, n))
        be = Ae @ x0
        lo, hi = x0 - rng.uniform(0, 2, n), x0 + rng.uniform(0, 2, n)
        c = rng.normal(size=n)
        res = solve_lp(c, A, b, Ae, be, lo, hi)
        ref = linprog(c, A, b, Ae if m2 else None, be if m2 else None,
                      bounds=list(zip(lo, hi)), method="highs")
        assert (ref.status == 0) == (res.status == OPTIMAL)
        if ref.status == 0:
            assert res.fun == pytest.approx(ref.fun, abs=1e-7)
            assert np.all(A @ res.x <= b + 1e-7) and np.all(np.abs(Ae @ res.x - be) < 1e-7)


def test_warm_start_agrees_with_cold():
    rng = np.random.default_rng(2)
    n, m = 10, 6
    A = rng.normal(size=(m, n))
    b = A @ rng.uniform(0, 1, n) + 0.5
    c = rng.normal(size=n)
    prog = LinearProgram(c, A, b)
    lo, hi = np.zeros(n), np.ones(n)
    root = prog.solve(lo, hi)
    for j in range(n):
        hi2 = hi.copy()
        hi2[j] = 0.0
        warm = prog.solve(lo, hi2, warm=root.state)
        cold = prog.solve(lo, hi2)
        assert warm.status == cold.status == OPTIMAL
        assert warm.fun == pytest.approx(cold.fun, abs=1e-9)


def test_infeasible_bounds():
    res = solve_lp(np.ones(2), A_eq=np.array([[1.0, 1.0]]), b_eq=np.array([5.0]),
                   lower=np.zeros(2), upper=np.ones(2))
    assert res.status == INFEASIBLE
