"""Closed convex sets with projections, distances and Hausdorff distance.

Boxes, balls and single halfspaces project in closed form.  General
intersections of halfspaces are projected with cyclic Dykstra iterations
followed by an exact active-set polish (the KKT system of the identified
active constraints), so the returned point is exact up to rounding whenever
the active set is found.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .signals import Signal
from .simplex import linprog, lp_feasible


class ProjectionError(RuntimeError):
    """Dykstra iterations did not converge; carries the best iterate."""

    def __init__(self, message, point, residual):
        super().__init__(message)
        self.point = point
        self.residual = residual


def _vec(x, n=None):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1:
        raise ValueError("expected a vector")
    if n is not None and x.size != n:
        raise ValueError(f"dimension mismatch: expected {n}, got {x.size}")
    return x


class ConvexSet:
    """Base class; subclasses implement :meth:`project`."""

    dim: int

    def project(self, x) -> np.ndarray:
        raise NotImplementedError

    def distance(self, x) -> float:
        x = _vec(x, self.dim)
        return float(np.linalg.norm(x - self.project(x)))

    def contains(self, x, tol=1e-9) -> bool:
        return self.distance(x) <= tol

    @property
    def bounded(self) -> bool:
        return False

    def translate(self, shift) -> "ConvexSet":
        return Translate(self, _vec(shift, self.dim))


@dataclass(frozen=True, eq=False)
class Box(ConvexSet):
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo, up = _vec(self.lower), _vec(self.upper)
        if lo.shape != up.shape:
            raise ValueError("box bounds must have equal length")
        if np.any(lo > up):
            raise ValueError("box requires lower <= upper componentwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)

    @property
    def dim(self):
        return self.lower.size

    @property
    def bounded(self):
        return bool(np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper)))

    def project(self, x):
        return np.clip(_vec(x, self.dim), self.lower, self.upper)


@dataclass(frozen=True, eq=False)
class Ball(ConvexSet):
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center))
        if self.radius < 0:
            raise ValueError("ball radius must be nonnegative")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self):
        return self.center.size

    @property
    def bounded(self):
        return True

    def project(self, x):
        d = _vec(x, self.dim) - self.center
        r = np.linalg.norm(d)
        if r <= self.radius:
            return self.center + d
        return self.center + d * (self.radius / r)


@dataclass(frozen=True, eq=False)
class Halfspaces(ConvexSet):
    """``{x : a_i^T x <= b_i}``, optionally with equalities ``E x = e``."""

    normals: np.ndarray
    offsets: np.ndarray
    eq_normals: np.ndarray | None = None
    eq_offsets: np.ndarray | None = None
    tol: float = 1e-10
    max_sweeps: int = 10_000
    check_nonempty: bool = field(default=True, repr=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.normals, dtype=float))
        b = np.atleast_1d(np.asarray(self.offsets, dtype=float))
        if A.shape[0] != b.size:
            raise ValueError("one offset per normal row required")
        if np.any(np.linalg.norm(A, axis=1) == 0):
            raise ValueError("halfspace normals must be nonzero")
        n = A.shape[1]
        E = np.zeros((0, n)) if self.eq_normals is None else np.atleast_2d(np.asarray(self.eq_normals, dtype=float))
        e = np.zeros(0) if self.eq_offsets is None else np.atleast_1d(np.asarray(self.eq_offsets, dtype=float))
        if E.shape != (e.size, n):
            raise ValueError("equality data has inconsistent dimensions")
        object.__setattr__(self, "normals", A)
        object.__setattr__(self, "offsets", b)
        object.__setattr__(self, "eq_normals", E)
        object.__setattr__(self, "eq_offsets", e)
        if self.check_nonempty and not lp_feasible(A, b, eq_normals=E, eq_offsets=e).feasible:
            raise ValueError("halfspace intersection is empty")

    @property
    def dim(self):
        return self.normals.shape[1]

    @property
    def bounded(self):
        # bounded iff no nonzero recession direction d with A d <= 0, E d = 0
        n = self.dim
        for sign in (1.0, -1.0):
            for j in range(n):
                A = np.vstack([self.normals, -np.eye(n)[j:j + 1] * sign])
                b = np.concatenate([np.zeros(self.offsets.size), [-1.0]])
                if lp_feasible(A, b, eq_normals=self.eq_normals,
                               eq_offsets=np.zeros(self.eq_offsets.size)).feasible:
                    return False
        return True

    def interval(self):
        """Endpoints ``(lo, hi)`` of a one-dimensional halfspace set."""
        if self.dim != 1:
            raise ValueError("not a one-dimensional set")
        a, b = self.normals[:, 0], self.offsets
        lo = np.max(b[a < 0] / a[a < 0], initial=-np.inf)
        hi = np.min(b[a > 0] / a[a > 0], initial=np.inf)
        for ei, ci in zip(self.eq_normals[:, 0], self.eq_offsets):
            lo = hi = ci / ei
        return float(lo), float(hi)

    def project(self, x):
        x = _vec(x, self.dim)
        if self.normals.shape[0] == 1 and self.eq_offsets.size == 0:
            a, b = self.normals[0], self.offsets[0]
            viol = a @ x - b
            return x - max(viol, 0.0) / (a @ a) * a
        return project_polyhedron(x, self.normals, self.offsets, self.eq_normals,
                                  self.eq_offsets, tol=self.tol, max_sweeps=self.max_sweeps)


@dataclass(frozen=True, eq=False)
class Translate(ConvexSet):
    base: ConvexSet
    shift: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "shift", _vec(self.shift, self.base.dim))

    @property
    def dim(self):
        return self.base.dim

    @property
    def bounded(self):
        return self.base.bounded

    def project(self, x):
        return self.base.project(_vec(x, self.dim) - self.shift) + self.shift


def _polish(x, A, b, E, e, y, tol):
    """Exact projection of ``x`` given the constraints active at ``y``."""
    slack = A @ y - b if A.size else np.zeros(0)
    scale = 1.0 + np.abs(b) + np.linalg.norm(A, axis=1) * np.linalg.norm(y) if A.size else 1.0
    active = np.flatnonzero(slack >= -1e-7 * scale)
    G = np.vstack([A[active], E])
    g = np.concatenate([b[active], e])
    if G.shape[0] == 0:
        p, mult = x.copy(), np.zeros(0)
    else:
        mult, *_ = np.linalg.lstsq(G @ G.T, G @ x - g, rcond=None)
        p = x - G.T @ mult
    ok_mult = np.all(mult[:active.size] >= -1e-9 * (1.0 + np.abs(mult).max(initial=0.0)))
    feas = (np.all(A @ p - b <= tol * (1.0 + np.abs(b))) if A.size else True) and \
        (np.all(np.abs(E @ p - e) <= tol * (1.0 + np.abs(e))) if E.size else True)
    return p if (ok_mult and feas) else None


def _no_descent(grad, AW, E) -> bool:
    """True if no direction ``d`` with ``AW d <= 0``, ``E d = 0`` has ``grad^T d < 0``."""
    n = grad.size
    c = np.concatenate([grad, -grad])
    box = np.eye(2 * n)
    A_ub = np.vstack([np.hstack([AW, -AW]), box]) if AW.size else box
    b_ub = np.concatenate([np.zeros(AW.shape[0]), np.ones(2 * n)])
    A_eq = np.hstack([E, -E]) if E.size else None
    b_eq = np.zeros(E.shape[0]) if E.size else None
    res = linprog(c, A_ub, b_ub, A_eq, b_eq)
    return res.status == "optimal" and res.fun >= -1e-12 * (1.0 + np.linalg.norm(grad))


def _active_set(x, A, b, E, e, y, tol, max_iter=200):
    """Primal active-set projection of ``x`` started from a feasible ``y``.

    Returns None on degeneracy trouble or when ``y`` is infeasible, so the
    caller can fall back to Dykstra.
    """
    scale = 1.0 + np.abs(b)
    if A.size and np.any(A @ y - b > 1e-9 * scale):
        return None
    if E.size and np.any(np.abs(E @ y - e) > 1e-9 * (1.0 + np.abs(e))):
        return None
    work = set(np.flatnonzero(A @ y - b >= -1e-10 * scale)) if A.size else set()
    k = A.shape[0]
    for _ in range(max_iter):
        W = sorted(work)
        G = np.vstack([A[W], E])
        if G.shape[0]:
            g = np.concatenate([b[W], e])
            mult, *_ = np.linalg.lstsq(G @ G.T, G @ x - g, rcond=None)
            p = x - G.T @ mult
            if np.linalg.norm(G @ p - g) > 1e-9 * (1.0 + np.linalg.norm(g)):
                return None
        else:
            mult, p = np.zeros(0), x.copy()
        d = p - y
        if np.linalg.norm(d) <= 1e-13 * (1.0 + np.linalg.norm(y)):
            mu = mult[:len(W)]
            if mu.size == 0 or mu.min() >= -1e-10 * (1.0 + np.abs(mu).max()):
                return p
            # dependent working rows: multipliers are not unique, ask an LP instead
            if np.linalg.matrix_rank(G) < G.shape[0] and _no_descent(p - x, A[W], E):
                return p
            work.discard(W[int(np.argmin(mu))])
            continue
        step, block = 1.0, None
        if k:
            Ad = A @ d
            for i in np.flatnonzero(Ad > 1e-14):
                if i in work:
                    continue
                a = (b[i] - A[i] @ y) / Ad[i]
                if a < step:
                    step, block = max(a, 0.0), i
        y = y + step * d
        if block is not None:
            work.add(int(block))
    return None


def project_polyhedron(x, A, b, E=None, e=None, tol=1e-10, max_sweeps=10_000,
                       polish_every=20, start=None):
    """Project ``x`` onto ``{y : A y <= b, E y = e}`` by cyclic Dykstra.

    The equality block is handled as one affine projection per sweep.  Every
    ``polish_every`` sweeps the active set at the current iterate is used to
    solve the projection KKT system exactly; the polished point is returned
    as soon as it is feasible with nonnegative multipliers.  ``start`` is an
    optional feasible point; a primal active-set method is run from it
    first and Dykstra is the fallback.
    """
    x = _vec(x)
    A = np.atleast_2d(np.asarray(A, dtype=float)).reshape(-1, x.size)
    b = np.atleast_1d(np.asarray(b, dtype=float))
    E = np.zeros((0, x.size)) if E is None else np.atleast_2d(np.asarray(E, dtype=float)).reshape(-1, x.size)
    e = np.zeros(0) if e is None else np.atleast_1d(np.asarray(e, dtype=float))

    if E.shape[0]:
        E_pinv = np.linalg.pinv(E)

        def proj_affine(z):
            return z - E_pinv @ (E @ z - e)
    sq = np.einsum("ij,ij->i", A, A)
    if start is not None:
        p = _active_set(x, A, b, E, e, _vec(start, x.size), tol)
        if p is not None:
            return p

    y = x.copy()
    incr = np.zeros((A.shape[0] + 1, x.size))
    for sweep in range(1, max_sweeps + 1):
        y_old = y.copy()
        for i in range(A.shape[0]):
            z = y + incr[i]
            viol = A[i] @ z - b[i]
            y_new = z - (viol / sq[i]) * A[i] if viol > 0 else z
            incr[i] = z - y_new
            y = y_new
        if E.shape[0]:
            z = y + incr[-1]
            y_new = proj_affine(z)
            incr[-1] = z - y_new
            y = y_new
        change = np.linalg.norm(y - y_old)
        if sweep % polish_every == 0 or change <= tol:
            p = _polish(x, A, b, E, e, y, max(tol, 1e-9))
            if p is not None:
                return p
        if change <= tol:
            return y
    resid = max(np.max(A @ y - b, initial=0.0), np.max(np.abs(E @ y - e), initial=0.0))
    raise ProjectionError("Dykstra projection did not converge", y, resid)


def project_point(set_: ConvexSet, x) -> np.ndarray:
    return set_.project(x)


def distance(set_: ConvexSet, x) -> float:
    return set_.distance(x)


def _unwrap(s: ConvexSet):
    shift = np.zeros(s.dim)
    while isinstance(s, Translate):
        shift = shift + s.shift
        s = s.base
    if isinstance(s, Halfspaces) and s.dim == 1:
        lo, hi = s.interval()
        if np.isfinite(lo) and np.isfinite(hi):
            s = Box([lo], [hi])
    if isinstance(s, Box):
        return Box(s.lower + shift, s.upper + shift)
    if isinstance(s, Ball):
        return Ball(s.center + shift, s.radius)
    return s


def excess(a: ConvexSet, b: ConvexSet) -> float:
    """One-sided ``sup_{z in a} dist(z, b)``."""
    a, b = _unwrap(a), _unwrap(b)
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    if isinstance(a, Box) and isinstance(b, Box):
        if not a.bounded:
            raise ValueError("unbounded box")
        per_axis = np.maximum.reduce([np.zeros(a.dim), b.lower - a.lower, a.upper - b.upper])
        return float(np.linalg.norm(per_axis))
    if isinstance(a, Ball) and isinstance(b, Ball):
        return max(0.0, float(np.linalg.norm(a.center - b.center)) + a.radius - b.radius)
    raise TypeError(f"excess not supported for {type(a).__name__} vs {type(b).__name__}")


def hausdorff_distance(a: ConvexSet, b: ConvexSet) -> float:
    """Hausdorff distance between two boxes, two balls or two 1-D intervals."""
    ua, ub = _unwrap(a), _unwrap(b)
    for s in (ua, ub):
        if not isinstance(s, (Box, Ball)) or not s.bounded:
            raise TypeError("hausdorff_distance needs bounded boxes, balls or intervals")
    if type(ua) is not type(ub):
        raise TypeError("mixed set variants are not supported")
    return max(excess(ua, ub), excess(ub, ua))


@dataclass(frozen=True, eq=False)
class MovingSet:
    """``S(t) = base`` shifted along a piecewise-linear path.

    For boxes the bounds can additionally move independently through
    ``lower_offset`` and ``upper_offset``.
    """

    base: ConvexSet
    shift: Signal | None = None
    lower_offset: Signal | None = None
    upper_offset: Signal | None = None

    def __post_init__(self):
        for sig in (self.shift, self.lower_offset, self.upper_offset):
            if sig is not None and sig.dim != self.base.dim:
                raise ValueError("moving-set signal dimension mismatch")
        if (self.lower_offset or self.upper_offset) and not isinstance(self.base, Box):
            raise ValueError("bound offsets are only defined for boxes")

    @property
    def dim(self):
        return self.base.dim

    def at(self, t: float) -> ConvexSet:
        s = self.base
        if isinstance(s, Box) and (self.lower_offset or self.upper_offset):
            lo = s.lower + (self.lower_offset(t) if self.lower_offset else 0.0)
            up = s.upper + (self.upper_offset(t) if self.upper_offset else 0.0)
            s = Box(lo, up)
        if self.shift is not None:
            s = Translate(s, self.shift(t))
        return s

    @property
    def is_static(self):
        return all(sig is None or sig.is_constant
                   for sig in (self.shift, self.lower_offset, self.upper_offset))
