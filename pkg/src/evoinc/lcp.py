"""Linear complementarity problems with positive semi-definite matrices.

``LCP(q, M)``: find ``z >= 0`` with ``w = q + M z >= 0`` and ``z^T w = 0``.

For psd ``M`` the problem is solvable exactly when it is feasible, exactly
when ``q`` lies in the dual cone of ``Q_M = SOL(0, M)``.  Lemke's method with
a lexicographic ratio test decides this and returns a complementary basic
solution; the brute-force pattern enumeration serves as an oracle for it.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .geometry import project_polyhedron
from .simplex import linprog, lp_feasible  # noqa: F401  (lp_feasible re-exported)

PSD_TOL = 1e-9


class NotPsdError(ValueError):
    pass


class PivotLimitError(RuntimeError):
    pass


class InfeasibleLcpError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LcpProblem:
    q: np.ndarray
    M: np.ndarray

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        M = np.atleast_2d(np.asarray(self.M, dtype=float))
        if q.ndim != 1 or M.shape != (q.size, q.size):
            raise ValueError(f"inconsistent LCP dimensions: q {q.shape}, M {M.shape}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "M", M)

    @property
    def size(self):
        return self.q.size

    def min_sym_eig(self) -> float:
        if self.size == 0:
            return 0.0
        return float(np.linalg.eigvalsh(0.5 * (self.M + self.M.T)).min())

    def is_psd(self, tol=PSD_TOL) -> bool:
        return self.min_sym_eig() >= -tol

    def residual(self, z) -> float:
        """``|z^T w|`` plus the negativity violations of ``z`` and ``w``."""
        z = np.asarray(z, dtype=float)
        w = self.q + self.M @ z
        return float(abs(z @ w) + np.sum(np.maximum(-z, 0.0)) + np.sum(np.maximum(-w, 0.0)))


@dataclass
class LcpSolution:
    z: np.ndarray | None
    w: np.ndarray | None
    residual: float
    pivots: int
    status: str                      # "solved", "infeasible" or "ray_termination"

    @property
    def solved(self):
        return self.status == "solved"


def _require_psd(p: LcpProblem, tol=PSD_TOL):
    if not p.is_psd(tol):
        raise NotPsdError(f"M is not positive semi-definite (min eig {p.min_sym_eig():.3e})")


def _lexmin_row(rows, T, col, binv_cols, prefer=None):
    """Lexicographic minimum ratio among candidate ``rows``.

    Ratio vectors are ``(b_i, Binv_i) / a_i``; ``prefer`` wins any tie in the
    first component.
    """
    a = T[rows, col]
    ratios = T[rows, -1] / a
    best = ratios.min()
    tie = np.abs(ratios - best) <= 1e-12 * (1.0 + abs(best))
    cand = rows[tie]
    if prefer is not None and prefer in cand:
        return prefer
    for j in binv_cols:
        if cand.size == 1:
            break
        r = T[cand, j] / T[cand, col]
        lo = r.min()
        cand = cand[np.abs(r - lo) <= 1e-12 * (1.0 + abs(lo))]
    return int(cand[0])


def _polish(p: LcpProblem, z, basic_z):
    """Re-solve the final complementary basis directly for a cleaner ``z``."""
    J = np.asarray(sorted(basic_z), dtype=int)
    if J.size == 0:
        return z
    MJ = p.M[np.ix_(J, J)]
    zc = np.zeros(p.size)
    try:
        zc[J] = np.linalg.solve(MJ, -p.q[J])
    except np.linalg.LinAlgError:
        return z
    if not np.all(np.isfinite(zc)):
        return z
    zc[np.abs(zc) < 1e-15 * (1.0 + np.abs(zc).max())] = 0.0
    return zc if p.residual(zc) <= p.residual(z) else z


def solve_lcp(p: LcpProblem, max_pivots=None, psd_tol=PSD_TOL, check_psd=True) -> LcpSolution:
    """Lemke's complementary pivoting with covering vector ``e = 1``.

    ``check_psd=False`` skips the eigenvalue test for callers that have
    already verified ``M``.
    """
    if check_psd:
        _require_psd(p, psd_tol)
    m = p.size
    q, M = p.q, p.M
    if m == 0 or np.all(q >= 0):
        z = np.zeros(m)
        return LcpSolution(z, q.copy(), p.residual(z), 0, "solved")
    cap = 50 * m if max_pivots is None else max_pivots

    # columns: w (0..m-1) | z (m..2m-1) | z0 (2m) | rhs
    T = np.hstack([np.eye(m), -M, -np.ones((m, 1)), q.reshape(-1, 1)])
    basis = np.arange(m)
    binv_cols = list(range(m))
    z0 = 2 * m

    def pivot(r, c):
        T[r] /= T[r, c]
        for i in range(m):
            if i != r and T[i, c] != 0.0:
                T[i] -= T[i, c] * T[r]
        leaving = basis[r]
        basis[r] = c
        return leaving

    qmin = q.min()
    r = int(np.flatnonzero(q == qmin)[-1])     # exact ties keep the first basis feasible
    leaving = pivot(r, z0)
    pivots = 1
    while True:
        entering = leaving + m if leaving < m else leaving - m
        col = T[:, entering]
        rows = np.flatnonzero(col > 1e-12)
        if rows.size == 0:
            return _ray(p, pivots)
        z0_row = int(np.flatnonzero(basis == z0)[0])
        r = _lexmin_row(rows, T, entering, binv_cols, prefer=z0_row)
        leaving = pivot(r, entering)
        pivots += 1
        if leaving == z0:
            break
        if pivots >= cap:
            raise PivotLimitError(f"Lemke exceeded {cap} pivots")

    z = np.zeros(m)
    for i, b in enumerate(basis):
        if m <= b < 2 * m:
            z[b - m] = T[i, -1]
    z = np.maximum(z, 0.0)
    z = _polish(p, z, [b - m for b in basis if m <= b < 2 * m])
    w = q + M @ z
    return LcpSolution(z, w, p.residual(z), pivots, "solved")


def _ray(p: LcpProblem, pivots):
    # for psd M a secondary ray means the LCP is infeasible; confirm by LP
    m = p.size
    A = np.vstack([-np.eye(m), -p.M])
    b = np.concatenate([np.zeros(m), p.q])
    status = "ray_termination" if lp_feasible(A, b).feasible else "infeasible"
    return LcpSolution(None, None, np.inf, pivots, status)


class EnumeratedSolutions(list):
    """List of vertex solutions; ``singular`` records skipped patterns."""

    def __init__(self, items=(), singular=()):
        super().__init__(items)
        self.singular = list(singular)


def enumerate_lcp(p: LcpProblem, tol=1e-9, max_size=12) -> EnumeratedSolutions:
    """All solutions obtained from nonsingular complementary support patterns."""
    m = p.size
    if m > max_size:
        raise ValueError(f"pattern enumeration limited to m <= {max_size}")
    found, singular = [], []
    scale = 1.0 + np.abs(p.q).max(initial=0.0)
    for k in range(m + 1):
        for J in itertools.combinations(range(m), k):
            J = list(J)
            z = np.zeros(m)
            if J:
                MJ = p.M[np.ix_(J, J)]
                if np.linalg.matrix_rank(MJ, tol=1e-10 * max(1.0, np.abs(MJ).max())) < k:
                    singular.append(tuple(J))
                    continue
                z[J] = np.linalg.solve(MJ, -p.q[J])
            w = p.q + p.M @ z
            if np.all(z >= -tol * scale) and np.all(w >= -tol * scale):
                z = np.maximum(z, 0.0)
                if not any(np.allclose(z, s.z, atol=1e-9, rtol=0) for s in found):
                    found.append(LcpSolution(z, p.q + p.M @ z, p.residual(z), 0, "solved"))
    return EnumeratedSolutions(found, singular)


def solution_polyhedron(p: LcpProblem, zbar):
    """``SOL(q, M)`` for psd ``M`` as ``(A, b, E, e)`` with ``A z <= b, E z = e``.

    Uses the characterisation ``z >= 0, q + M z >= 0, (M + M^T)(z - zbar) = 0,
    q^T (z - zbar) = 0`` for any one solution ``zbar``.
    """
    m = p.size
    S = p.M + p.M.T
    A = np.vstack([-np.eye(m), -p.M])
    b = np.concatenate([np.zeros(m), p.q])
    E = np.vstack([S, p.q.reshape(1, -1)])
    e = np.concatenate([S @ zbar, [p.q @ zbar]])
    keep = np.linalg.norm(E, axis=1) > 0
    return A, b, E[keep], e[keep]


def least_norm_solution(p: LcpProblem, tol=1e-9, psd_tol=PSD_TOL, lemke=None,
                        min_eig=None) -> np.ndarray:
    """The unique least-norm element of ``SOL(q, M)``.

    ``lemke`` (a solved :class:`LcpSolution`) and ``min_eig`` may be passed
    in when already known.
    """
    if lemke is None:
        sol = solve_lcp(p, psd_tol=psd_tol)
    else:
        sol = lemke
    if not sol.solved:
        raise InfeasibleLcpError("LCP(q, M) has no solution")
    if (p.min_sym_eig() if min_eig is None else min_eig) > 1e-10:
        return sol.z                      # positive definite: unique solution
    A, b, E, e = solution_polyhedron(p, sol.z)
    z = project_polyhedron(np.zeros(p.size), A, b, E, e, tol=tol, start=sol.z)
    z = np.maximum(z, 0.0)
    return z if p.residual(z) <= max(1e-9 * (1.0 + np.linalg.norm(p.q)), 10 * sol.residual) else sol.z


@dataclass
class ConeReport:
    member: bool
    certificate: np.ndarray
    kind: str                  # "solution" (z in SOL(q, M)) or "separator" (z in Q_M, q^T z < 0)
    value: float = field(default=np.nan)

    def verify(self, q, M, tol=1e-9) -> bool:
        q, M, z = np.asarray(q, float), np.asarray(M, float), self.certificate
        if self.kind == "solution":
            return bool(np.all(z >= -tol) and np.all(q + M @ z >= -tol)
                        and abs(z @ (q + M @ z)) <= tol * (1 + np.linalg.norm(q)))
        return bool(np.all(z >= -tol) and np.all(M @ z >= -tol)
                    and np.all(np.abs((M + M.T) @ z) <= tol) and q @ z < -tol)


def dual_cone_membership(q, M) -> ConeReport:
    """Decide ``q in Q_M^+`` with a certificate either way."""
    p = LcpProblem(q, M)
    sol = solve_lcp(p)
    if sol.solved:
        return ConeReport(True, sol.z, "solution", 0.0)
    m = p.size
    S = p.M + p.M.T
    # min q^T z over Q_M normalized by sum(z) = 1
    A_ub = -p.M
    b_ub = np.zeros(m)
    A_eq = np.vstack([S, np.ones((1, m))])
    b_eq = np.concatenate([np.zeros(m), [1.0]])
    res = linprog(p.q, A_ub, b_ub, A_eq, b_eq)
    if res.status != "optimal" or res.fun >= 0:
        raise RuntimeError("no separating element found for an unsolvable LCP")
    return ConeReport(False, res.x, "separator", res.fun)


def _kernel_basis(S, tol):
    vals, vecs = np.linalg.eigh(S)
    return vecs[:, np.abs(vals) <= tol * max(1.0, np.abs(vals).max(initial=0.0))]


def qm_generators(M, tol=1e-9) -> np.ndarray:
    """Unit extreme rays of ``Q_M = {z >= 0, M z >= 0, (M + M^T) z = 0}`` (rows)."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    m = M.shape[0]
    if m == 0:
        return np.zeros((0, 0))
    N = _kernel_basis(M + M.T, tol)
    k = N.shape[1]
    if k == 0:
        return np.zeros((0, m))
    G = np.vstack([N, M @ N])                       # cone is {y : G y >= 0}
    norms = np.linalg.norm(G, axis=1)
    G = G[norms > tol] / norms[norms > tol, None]
    uniq = []
    for g in G:
        if not any(np.allclose(g, u, atol=1e-10) for u in uniq):
            uniq.append(g)
    G = np.array(uniq).reshape(-1, k)

    rays = []

    def consider(d):
        if np.linalg.norm(d) < 1e-12:
            return
        for s in (1.0, -1.0):
            y = s * d / np.linalg.norm(d)
            if np.all(G @ y >= -1e-10):
                z = N @ y
                z[np.abs(z) < 1e-13] = 0.0
                z /= np.linalg.norm(z)
                if not any(np.allclose(z, r, atol=1e-8) for r in rays):
                    rays.append(z)

    if k == 1:
        consider(np.ones(1))
    else:
        for rows in itertools.combinations(range(G.shape[0]), k - 1):
            sub = G[list(rows)]
            if np.linalg.matrix_rank(sub, tol=1e-10) < k - 1:
                continue
            _, _, vt = np.linalg.svd(sub)
            consider(vt[-1])
    return np.array(rays).reshape(-1, m)


def dual_cone_halfspaces(M, tol=1e-9) -> np.ndarray:
    """Rows ``g`` with ``Q_M^+ = {q : g^T q >= 0 for every row}``."""
    return qm_generators(M, tol)
