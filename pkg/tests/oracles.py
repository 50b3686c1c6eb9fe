"""Independent reference computations used only by the tests."""
import itertools

import numpy as np
from scipy.optimize import nnls


def brute_lcp(q, M, tol=1e-9):
    """All complementary basic solutions by least-squares over every support."""
    q, M = np.asarray(q, float), np.asarray(M, float)
    m = q.size
    out = []
    for k in range(m + 1):
        for J in itertools.combinations(range(m), k):
            J = list(J)
            z = np.zeros(m)
            if J:
                sub, *_ = np.linalg.lstsq(M[np.ix_(J, J)], -q[J], rcond=None)
                z[J] = sub
            w = q + M @ z
            scale = 1.0 + np.abs(q).max(initial=0.0)
            if (np.all(z >= -tol * scale) and np.all(w >= -tol * scale)
                    and abs(z @ w) <= tol * scale and np.allclose(w[J], 0.0, atol=1e-8 * scale)):
                if not any(np.allclose(z, o, atol=1e-9) for o in out):
                    out.append(np.maximum(z, 0.0))
    return out


def hull_distance(z, points, weight=1e4):
    """Distance from ``z`` to the convex hull of ``points`` (nonnegative least squares)."""
    P = np.asarray(points, float).T
    A = np.vstack([P, weight * np.ones((1, P.shape[1]))])
    b = np.concatenate([np.asarray(z, float), [weight]])
    lam, _ = nnls(A, b, maxiter=2000)
    lam = lam / lam.sum()
    return float(np.linalg.norm(P @ lam - z))


def cone_distance(q, generators):
    """Distance from ``q`` to the cone spanned by the columns of ``generators``."""
    lam, res = nnls(np.asarray(generators, float), np.asarray(q, float), maxiter=2000)
    return float(res)


def random_psd_lcp(rng, m, lo=-2, hi=2):
    """``M = R R^T + S - S^T`` with integer entries and a solvable ``q``."""
    r = int(rng.integers(0, m + 1))
    R = rng.integers(lo, hi + 1, (m, r)).astype(float)
    S = rng.integers(lo, hi + 1, (m, m)).astype(float)
    M = R @ R.T + (S - S.T)
    z0 = np.maximum(rng.integers(lo, hi + 1, m), 0).astype(float)
    w0 = np.maximum(rng.integers(lo, hi + 1, m), 0).astype(float)
    w0[z0 > 0] = 0.0
    return w0 - M @ z0, M


def cvx_project(x, A, b):
    import cvxpy as cp
    y = cp.Variable(len(x))
    cp.Problem(cp.Minimize(cp.sum_squares(y - x)), [A @ y <= b]).solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
    return np.asarray(y.value)


def integer_passive_system(rng, n, m):
    """Passive (K = I) system with small integer data and rank-one dissipation.

    Integer data makes degenerate per-step LCPs, with several solutions, common.
    """
    from evoinc.lcs import LcsSystem
    from evoinc.signals import Signal
    R = rng.integers(-1, 2, (n + m, 1)).astype(float)
    N = R @ R.T
    S = rng.integers(-1, 2, (m, m)).astype(float)
    A = -0.5 * N[:n, :n]
    C = rng.integers(-1, 2, (m, n)).astype(float)
    B = C.T - N[:n, n:]
    D = 0.5 * N[n:, n:] + 0.5 * (S - S.T)
    v = Signal.constant(rng.integers(-1, 2, m).astype(float))
    return LcsSystem(A, B, C, D, v=v)
