import numpy as np
import pytest
from scipy.optimize import linprog as highs

from evoinc.simplex import linprog, lp_feasible


def test_interval_strict_slack_is_half():
    rep = lp_feasible([[1.0], [-1.0]], [1.0, 0.0], strict=True)
    assert rep.feasible and rep.strictly_feasible
    assert rep.slack == pytest.approx(0.5)


def test_empty_interval_is_infeasible():
    rep = lp_feasible([[1.0], [-1.0]], [0.0, -1.0])
    assert not rep.feasible and rep.point is None


def test_single_point_is_not_strictly_feasible():
    rep = lp_feasible([[-1.0], [1.0]], [0.0, 0.0], strict=True)
    assert rep.feasible and not rep.strictly_feasible
    assert rep.slack == pytest.approx(0.0, abs=1e-12)


def test_unbounded_slack_is_reported_as_infinite():
    rep = lp_feasible([[1.0, 0.0]], [1.0], strict=True)
    assert rep.strictly_feasible and rep.slack == np.inf
    assert rep.point[0] <= 1.0


def test_equalities_are_respected():
    rep = lp_feasible([[-1.0, 0.0], [0.0, -1.0]], [0.0, 0.0],
                      eq_normals=[[1.0, 1.0]], eq_offsets=[2.0])
    assert rep.feasible
    assert rep.point.sum() == pytest.approx(2.0) and np.all(rep.point >= -1e-12)


def test_inconsistent_dimensions_rejected():
    with pytest.raises(ValueError):
        linprog([1.0, 1.0], [[1.0]], [1.0])


def test_random_bounded_lps_match_highs():
    rng = np.random.default_rng(11)
    for _ in range(200):
        n, m = rng.integers(1, 5), rng.integers(1, 6)
        A = rng.integers(-3, 4, (m, n)).astype(float)
        b = rng.integers(-2, 6, m).astype(float)
        c = rng.integers(-3, 4, n).astype(float)
        # box keeps both solvers away from unbounded instances
        A = np.vstack([A, np.eye(n)])
        b = np.concatenate([b, 10 * np.ones(n)])
        ours = linprog(c, A, b)
        ref = highs(c, A_ub=A, b_ub=b, bounds=(0, None), method="highs")
        if ref.status == 2:
            assert ours.status == "infeasible"
        else:
            assert ours.status == "optimal"
            assert ours.fun == pytest.approx(ref.fun, abs=1e-8)
            assert np.all(A @ ours.x <= b + 1e-9) and np.all(ours.x >= -1e-12)


def test_unbounded_detected():
    res = linprog([-1.0], [[-1.0]], [0.0])
    assert res.status == "unbounded"
