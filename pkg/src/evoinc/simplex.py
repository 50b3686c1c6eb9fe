"""Small dense two-phase simplex method.

Used for feasibility questions of the form ``a_i^T x <= b_i``: nonemptiness
of polyhedral sets, relative-interior checks and cone certificates.  Problem
sizes are tiny (tens of rows), so a dense tableau with Bland's rule is enough.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_EPS = 1e-10


@dataclass
class LpResult:
    status: str              # "optimal", "infeasible" or "unbounded"
    x: np.ndarray | None
    fun: float


@dataclass
class FeasibilityReport:
    feasible: bool
    strictly_feasible: bool
    slack: float             # s*; +inf if the slack is unbounded
    point: np.ndarray | None


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]
    basis[row] = col


def _run(T, basis, ncols, max_iter):
    """Minimize over the tableau whose last row holds reduced costs.

    Returns False when the objective is unbounded below.
    """
    m = T.shape[0] - 1
    for _ in range(max_iter):
        cost = T[-1, :ncols]
        entering = np.flatnonzero(cost < -_EPS)
        if entering.size == 0:
            return True
        col = entering[0]                       # Bland: smallest index
        column = T[:m, col]
        positive = column > _EPS
        if not np.any(positive):
            return False
        ratios = np.full(m, np.inf)
        ratios[positive] = T[:m, -1][positive] / column[positive]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + _EPS * max(1.0, abs(best)))
        row = ties[np.argmin(basis[ties])]      # Bland: smallest basic index
        _pivot(T, basis, row, col)
    raise RuntimeError("simplex iteration limit reached")


def linprog(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, max_iter=5000) -> LpResult:
    """Minimize ``c^T y`` subject to ``A_ub y <= b_ub``, ``A_eq y = b_eq``, ``y >= 0``."""
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.atleast_1d(np.asarray(b_ub, dtype=float))
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.atleast_1d(np.asarray(b_eq, dtype=float))
    if A_ub.shape != (b_ub.size, n) or A_eq.shape != (b_eq.size, n):
        raise ValueError("inconsistent LP dimensions")

    m_ub, m_eq = b_ub.size, b_eq.size
    m = m_ub + m_eq
    # columns: y (n) | slacks (m_ub) | artificials (m) | rhs
    nslack = m_ub
    T = np.zeros((m + 1, n + nslack + m + 1))
    T[:m_ub, :n] = A_ub
    T[:m_ub, n:n + nslack] = np.eye(m_ub)
    T[:m_ub, -1] = b_ub
    T[m_ub:m, :n] = A_eq
    T[m_ub:m, -1] = b_eq
    neg = T[:m, -1] < 0
    T[:m][neg] *= -1.0

    basis = np.empty(m, dtype=int)
    art_cols = []
    for i in range(m):
        if i < m_ub and not neg[i]:
            basis[i] = n + i
        else:
            col = n + nslack + i
            T[i, col] = 1.0
            basis[i] = col
            art_cols.append(col)
    art_cols = np.array(art_cols, dtype=int)
    ncols = n + nslack + m

    if art_cols.size:
        T[-1, art_cols] = 1.0
        for i in range(m):
            if basis[i] in art_cols:
                T[-1] -= T[i]
        _run(T, basis, ncols, max_iter)
        if -T[-1, -1] > 1e-8 * max(1.0, np.abs(T[:m, -1]).max(initial=0.0)):
            return LpResult("infeasible", None, np.nan)
        # drive remaining artificials out of the basis
        for i in range(m):
            if basis[i] in art_cols:
                candidates = np.flatnonzero(np.abs(T[i, :n + nslack]) > _EPS)
                if candidates.size:
                    _pivot(T, basis, i, candidates[0])
        keep = np.array([basis[i] not in art_cols for i in range(m)] + [True])
        T = T[keep]
        basis = basis[keep[:-1]]
        T = np.delete(T, art_cols, axis=1)
        ncols = n + nslack

    T[-1] = 0.0
    T[-1, :n] = c
    for i, b in enumerate(basis):
        if T[-1, b] != 0.0:
            T[-1] -= T[-1, b] * T[i]
    if not _run(T, basis, ncols, max_iter):
        return LpResult("unbounded", None, -np.inf)
    y = np.zeros(ncols)
    y[basis] = T[:-1, -1]
    x = y[:n]
    return LpResult("optimal", x, float(c @ x))


def lp_feasible(normals, offsets, strict=False, eq_normals=None, eq_offsets=None,
                tol=1e-9) -> FeasibilityReport:
    """Feasibility of ``{x : a_i^T x <= b_i}`` (plus optional equalities).

    In strict mode the largest uniform slack ``s`` with ``a_i^T x + s <= b_i``
    is computed; the system is strictly feasible when ``s* > tol``.  An
    unbounded slack is reported as ``s* = inf``.
    """
    A = np.atleast_2d(np.asarray(normals, dtype=float))
    b = np.atleast_1d(np.asarray(offsets, dtype=float))
    if A.size == 0:
        A = A.reshape(0, A.shape[-1] if A.ndim == 2 else 0)
    n = A.shape[1]
    E = np.zeros((0, n)) if eq_normals is None else np.atleast_2d(np.asarray(eq_normals, dtype=float))
    e = np.zeros(0) if eq_offsets is None else np.atleast_1d(np.asarray(eq_offsets, dtype=float))

    # free x is split as x+ - x-
    A_ub = np.hstack([A, -A])
    A_eq = np.hstack([E, -E])
    if not strict:
        res = linprog(np.zeros(2 * n), A_ub, b, A_eq, e)
        if res.status == "infeasible":
            return FeasibilityReport(False, False, -np.inf, None)
        x = res.x[:n] - res.x[n:]
        return FeasibilityReport(True, False, np.nan, x)

    ones = np.ones((b.size, 1))
    A_ub = np.hstack([A_ub, ones, -ones])
    A_eq = np.hstack([A_eq, np.zeros((e.size, 2))])
    c = np.zeros(2 * n + 2)
    c[-2], c[-1] = -1.0, 1.0
    res = linprog(c, A_ub, b, A_eq, e)
    if res.status == "infeasible":
        return FeasibilityReport(False, False, -np.inf, None)
    if res.status == "unbounded":
        # cap the slack at 1 to get a strictly interior witness
        cap = np.zeros((1, 2 * n + 2))
        cap[0, -2], cap[0, -1] = 1.0, -1.0
        res = linprog(c, np.vstack([A_ub, cap]), np.r_[b, 1.0], A_eq, e)
        return FeasibilityReport(True, True, np.inf, res.x[:n] - res.x[n:2 * n])
    x = res.x[:n] - res.x[n:2 * n]
    s = float(res.x[-2] - res.x[-1])
    return FeasibilityReport(s >= -tol, s > tol, s, x)
