import numpy as np
import pytest
from hypothesis import given, strategies as st

from evoinc import lcp
from evoinc.lcp import (LcpProblem, NotPsdError, PivotLimitError, dual_cone_membership,
                        enumerate_lcp, least_norm_solution, qm_generators, solve_lcp)
from oracles import brute_lcp, cone_distance, hull_distance, random_psd_lcp

SKEW = [[0.0, 1.0], [-1.0, 0.0]]
TILT = [[0.0, 1.0], [-1.0, 0.1]]


def test_decoupled_problem():
    sol = solve_lcp(LcpProblem([-1.0, -1.0], np.eye(2)))
    assert sol.solved and np.allclose(sol.z, [1.0, 1.0])


def test_nonnegative_q_gives_zero():
    sol = solve_lcp(LcpProblem([0.0, 1.0], TILT))
    assert sol.solved and np.array_equal(sol.z, [0.0, 0.0]) and sol.pivots == 0


def test_tilted_skew_problem():
    # derived: brute_lcp([0, -1], TILT) == [(0, 10)]
    assert [z.tolist() for z in brute_lcp([0.0, -1.0], TILT)] == [[0.0, 10.0]]
    sol = solve_lcp(LcpProblem([0.0, -1.0], TILT))
    assert np.allclose(sol.z, [0.0, 10.0], atol=1e-12)
    assert np.allclose(sol.w, [10.0, 0.0], atol=1e-12)


def test_solution_invariants():
    p = LcpProblem([0.0, -1.0], TILT)
    sol = solve_lcp(p)
    assert np.all(sol.z >= -1e-9) and np.all(sol.w >= -1e-9)
    assert abs(sol.z @ sol.w) <= 1e-9 * (1 + np.linalg.norm(p.q))


def test_infeasible_problem():
    sol = solve_lcp(LcpProblem([0.0, -1.0], SKEW))
    assert sol.status == "infeasible" and sol.z is None


def test_non_psd_rejected():
    with pytest.raises(NotPsdError):
        solve_lcp(LcpProblem([-1.0, 0.0], [[-1.0, 0.0], [0.0, 1.0]]))


def test_pivot_cap_is_an_error():
    p = LcpProblem([-1.0, -2.0, -3.0], np.eye(3) + np.ones((3, 3)))
    with pytest.raises(PivotLimitError):
        solve_lcp(p, max_pivots=1)


def test_enumeration_examples():
    assert [s.z.tolist() for s in enumerate_lcp(LcpProblem([-1.0, -1.0], np.eye(2)))] == [[1.0, 1.0]]
    segs = sorted(s.z.tolist() for s in enumerate_lcp(LcpProblem([0.0, 1.0], SKEW)))
    assert segs == [[0.0, 0.0], [1.0, 0.0]]
    assert [s.z.tolist() for s in enumerate_lcp(LcpProblem([1.0, 1.0], np.eye(2)))] == [[0.0, 0.0]]


def test_enumeration_records_singular_patterns_and_size_cap():
    sols = enumerate_lcp(LcpProblem([0.0, 1.0], SKEW))
    assert (0,) in sols.singular
    with pytest.raises(ValueError):
        enumerate_lcp(LcpProblem(np.ones(13), np.eye(13)))


def test_least_norm_examples():
    assert np.allclose(least_norm_solution(LcpProblem([0.0, 1.0], SKEW)), [0.0, 0.0])
    assert np.allclose(least_norm_solution(LcpProblem([-1.0, -1.0], np.eye(2))), [1.0, 1.0])
    assert np.allclose(least_norm_solution(LcpProblem([1.0], [[2.0]])), [0.0])


def test_least_norm_on_infeasible_raises():
    with pytest.raises(lcp.InfeasibleLcpError):
        least_norm_solution(LcpProblem([0.0, -1.0], SKEW))


def test_cone_membership_examples():
    yes = dual_cone_membership([-1.0, 0.0], SKEW)
    assert yes.member and yes.verify([-1.0, 0.0], SKEW)
    no = dual_cone_membership([0.0, -1.0], SKEW)
    assert not no.member and no.kind == "separator" and no.verify([0.0, -1.0], SKEW)
    assert np.allclose(no.certificate, [0.0, 1.0])
    assert dual_cone_membership([2.0, 0.5], TILT).member


def test_qm_generators():
    assert np.allclose(qm_generators(SKEW), [[0.0, 1.0]])
    gens = qm_generators(np.zeros((4, 4)))
    assert sorted(map(tuple, gens)) == sorted(map(tuple, np.eye(4)))
    assert qm_generators(np.eye(3)).shape == (0, 3)


def test_dual_cone_halfspaces_agree_with_generators_of_dual():
    # the dual cone is generated by e_i and -M e_i; compare both descriptions
    rng = np.random.default_rng(8)
    for _ in range(100):
        m = int(rng.integers(1, 5))
        _, M = random_psd_lcp(rng, m)
        H = lcp.dual_cone_halfspaces(M)
        V = np.hstack([np.eye(m), -M])
        for _ in range(5):
            q = rng.integers(-3, 4, m).astype(float)
            in_h = bool(np.all(H @ q >= -1e-9)) if H.size else True
            in_v = cone_distance(q, V) <= 1e-8
            assert in_h == in_v == dual_cone_membership(q, M).member


def test_random_instances_against_brute_force():
    rng = np.random.default_rng(1)
    for _ in range(200):
        m = int(rng.integers(1, 6))
        q, M = random_psd_lcp(rng, m)
        p = LcpProblem(q, M)
        sol = solve_lcp(p)
        assert sol.solved
        assert sol.residual <= 1e-9 * (1 + np.linalg.norm(q))
        verts = brute_lcp(q, M)
        assert hull_distance(sol.z, verts) <= 1e-7
        zstar = least_norm_solution(p)
        assert p.residual(zstar) <= 1e-8 * (1 + np.linalg.norm(q))
        assert np.linalg.norm(zstar) <= min(np.linalg.norm(v) for v in verts) + 1e-7


def test_sum_of_symmetric_part_is_constant_on_solution_set():
    rng = np.random.default_rng(2)
    seen = 0
    for _ in range(300):
        q, M = random_psd_lcp(rng, int(rng.integers(2, 6)))
        sols = brute_lcp(q, M)
        if len(sols) < 2:
            continue
        seen += 1
        S = M + M.T
        for z in sols[1:]:
            assert np.linalg.norm(S @ (z - sols[0])) <= 1e-8
    assert seen > 10


def test_least_norm_growth_is_bounded_under_scaling():
    rng = np.random.default_rng(6)
    M = np.array([[1.0, 1.0, 0.0], [-1.0, 0.0, 1.0], [0.0, -1.0, 0.0]])
    ratios = {1.0: [], 10.0: [], 100.0: []}
    for _ in range(50):
        z0 = np.maximum(rng.normal(size=3), 0)
        w0 = np.maximum(rng.normal(size=3), 0)
        w0[z0 > 0] = 0
        q = w0 - M @ z0
        if np.linalg.norm(q) == 0:
            continue
        for s in ratios:
            z = least_norm_solution(LcpProblem(s * q, M))
            ratios[s].append(np.linalg.norm(z) / np.linalg.norm(s * q))
    peak = {s: max(r) for s, r in ratios.items()}
    assert peak[10.0] <= peak[1.0] * (1 + 1e-6) and peak[100.0] <= peak[1.0] * (1 + 1e-6)


@given(st.integers(0, 10_000), st.floats(0.01, 100))
def test_scaling(seed, lam):
    rng = np.random.default_rng(seed)
    q, M = random_psd_lcp(rng, int(rng.integers(1, 6)))
    z = solve_lcp(LcpProblem(q, M)).z
    p = LcpProblem(lam * q, M)
    assert p.residual(lam * z) <= 1e-9 * (1 + np.linalg.norm(lam * q))


@given(st.integers(0, 10_000))
def test_lemke_solution_is_enumerated_vertex(seed):
    rng = np.random.default_rng(seed)
    q, M = random_psd_lcp(rng, int(rng.integers(1, 5)))
    z = solve_lcp(LcpProblem(q, M)).z
    assert min(np.linalg.norm(z - s.z) for s in enumerate_lcp(LcpProblem(q, M))) <= 1e-9


def test_least_norm_on_thin_degenerate_solution_set():
    # SOL is one point cut out by three nearly dependent constraints
    q = np.array([-8.84052748e-05, 3.77432953e00])
    M = np.array([[0.0, 1.0], [-1.0, 0.0]])
    (only,) = brute_lcp(q, M)
    z = lcp.least_norm_solution(lcp.LcpProblem(q, M))
    assert np.allclose(z, only, atol=1e-12, rtol=0)
