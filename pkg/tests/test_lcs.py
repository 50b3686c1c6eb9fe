import numpy as np
import pytest

from evoinc import lcp
from evoinc.lcs import DomainViolation, LcsSystem, lcs_resolvent, step_lcp_data
from evoinc.passivity import random_passive_system
from evoinc.signals import Signal
from oracles import brute_lcp, cone_distance, integer_passive_system

D1 = [[0.0, 1.0], [-1.0, 0.0]]


def example1(v=None):
    return LcsSystem(0.0, [0.0, 1.0], [[0.0], [1.0]], D1, v=v)


def test_step_data_of_example1():
    q, Mh, Minv = step_lcp_data(example1(), 0.0, 0.1, [1.0])
    assert np.allclose(q, [0.0, 1.0]) and np.allclose(Mh, [[0.0, 1.0], [-1.0, 0.1]])
    assert np.allclose(Minv, [[1.0]])


def test_resolvent_inside_domain():
    r = lcs_resolvent(example1(), 0.0, 0.1, [1.0])
    assert np.allclose(r.z, [0.0, 0.0]) and np.allclose(r.x, [1.0])


def test_resolvent_from_outside_domain():
    # derived: brute_lcp([0, -1], [[0, 1], [-1, 0.1]]) == [(0, 10)], x+ = -1 + 0.1 * 10
    assert [z.tolist() for z in brute_lcp([0.0, -1.0], [[0.0, 1.0], [-1.0, 0.1]])] == [[0.0, 10.0]]
    r = lcs_resolvent(example1(), 0.0, 0.1, [-1.0])
    assert np.allclose(r.z, [0.0, 10.0]) and np.allclose(r.x, [0.0], atol=1e-12)


def test_decoupled_positive_definite_case():
    D = np.array([[2.0, 1.0], [-1.0, 1.0]])
    v = Signal.constant([-1.0, 0.5])
    sys_ = LcsSystem([[-1.0]], [[1.0, 2.0]], np.zeros((2, 1)), D, v=v)
    r = lcs_resolvent(sys_, 0.0, 0.2, [3.0])
    z = lcp.solve_lcp(lcp.LcpProblem(v(0.0), D)).z
    assert np.allclose(r.z, z)
    assert np.allclose(r.x, np.linalg.solve(np.eye(1) + 0.2 * np.eye(1), [3.0] + 0.2 * sys_.B @ z))


def test_singular_step_rejected():
    sys_ = LcsSystem([[2.0]], [[1.0]], [[1.0]], [[1.0]])
    with pytest.raises(ValueError):
        lcs_resolvent(sys_, 0.0, 0.5, [1.0])


def test_infeasible_step_is_domain_violation():
    # C = 0 and v outside Q_D^+ leaves no solution for any state
    sys_ = LcsSystem([[0.0]], [[0.0]], [[0.0]], [[0.0]], v=Signal.constant([-1.0]))
    with pytest.raises(DomainViolation):
        lcs_resolvent(sys_, 0.0, 0.1, [0.0])


def test_domain_halfspaces_of_example1():
    G, g, ok = example1().domain_halfspaces(0.0)
    assert ok and np.allclose(G, [[-1.0]]) and np.allclose(g, [0.0])


def test_steps_land_in_domain():
    rng = np.random.default_rng(21)
    for _ in range(150):
        n, m = (int(k) for k in rng.integers(1, 4, 2))
        sys_ = random_passive_system(rng, n, m, rank=int(rng.integers(1, n + m + 1)))
        h = 0.4 / max(1.0, np.linalg.norm(sys_.A, 2))
        r = lcs_resolvent(sys_, 0.0, h, 2 * rng.normal(size=n))
        # C x+ + v lies in the cone generated by e_i and -D e_i
        w = sys_.C @ r.x + sys_.v(0.0)
        assert cone_distance(w, np.hstack([np.eye(m), -sys_.D])) <= 1e-8


def test_new_state_ignores_multiplier_choice():
    rng = np.random.default_rng(22)
    multi = 0
    for _ in range(1500):
        sys_ = integer_passive_system(rng, int(rng.integers(1, 3)), int(rng.integers(2, 5)))
        xi = rng.integers(-1, 2, sys_.n).astype(float)
        try:
            r = lcs_resolvent(sys_, 0.0, 0.25, xi)
        except DomainViolation:
            continue
        q, Mh, Minv = step_lcp_data(sys_, 0.0, 0.25, xi)
        sols = brute_lcp(q, Mh)
        if len(sols) < 2:
            continue
        multi += 1
        for s in sols:
            assert np.linalg.norm(sys_.B @ (s - sols[0])) <= 1e-8
            assert np.linalg.norm(Minv @ (xi + 0.25 * sys_.B @ s) - r.x) <= 1e-8
    assert multi >= 20
