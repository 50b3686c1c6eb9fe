"""Time-dependent maximal monotone operators.

Every family is defined through its resolvent ``J_lam = (I + lam F(t, .))^{-1}``;
values, Yosida approximations and graph membership are derived from it.
Three families are provided:

* :class:`NormalConeMoving` -- ``F(t, x) = N_{S(t)}(x)`` (sweeping process),
* :class:`ScalarGraphDiag` -- componentwise maximal monotone graphs on R,
* :class:`LcsRelation` -- ``H(t, x) = -A x + B (P + D)^{-1}(C x + v(t))`` of a
  passive linear complementarity system.  Build it with
  :func:`evoinc.passivity.build_lcs_operator`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import lcp
from .geometry import Halfspaces, MovingSet, project_polyhedron
from .lcs import LcsSystem, lcs_resolvent
from .signals import Signal


class DomainError(ValueError):
    """The point is outside the domain of the operator."""


def _vec(x, n):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (n,):
        raise ValueError(f"dimension mismatch: expected {n}, got {x.shape}")
    return x


# ---------------------------------------------------------------------------
# scalar graphs


class ScalarGraph:
    """Maximal monotone graph on the real line with a closed-form resolvent."""

    def resolvent(self, lam: float, x: float) -> float:
        raise NotImplementedError

    def values(self, x: float):
        """Value interval ``(lo, hi)`` at ``x``; ``None`` outside the domain."""
        raise NotImplementedError

    def domain(self):
        return -np.inf, np.inf

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class AbsSubdiff(ScalarGraph):
    """Subdifferential of ``|x|``."""

    def resolvent(self, lam, x):
        return float(np.sign(x) * max(abs(x) - lam, 0.0))

    def values(self, x):
        return (-1.0, 1.0) if x == 0 else (float(np.sign(x)),) * 2

    def to_dict(self):
        return {"type": "abs"}


@dataclass(frozen=True)
class Relay(ScalarGraph):
    """``a`` for ``x < 0``, ``[a, b]`` at 0, ``b`` for ``x > 0``."""

    a: float = -1.0
    b: float = 1.0

    def __post_init__(self):
        if self.a > self.b:
            raise ValueError("relay levels need a <= b")

    def resolvent(self, lam, x):
        if x - lam * self.b > 0:
            return float(x - lam * self.b)
        if x - lam * self.a < 0:
            return float(x - lam * self.a)
        return 0.0

    def values(self, x):
        if x > 0:
            return (self.b, self.b)
        if x < 0:
            return (self.a, self.a)
        return (self.a, self.b)

    def to_dict(self):
        return {"type": "relay", "a": self.a, "b": self.b}


@dataclass(frozen=True)
class SatInverse(ScalarGraph):
    """Inverse of the saturation ``y -> clip(y, -level, level)``."""

    level: float = 1.0

    def __post_init__(self):
        if self.level <= 0:
            raise ValueError("saturation level must be positive")

    def resolvent(self, lam, x):
        return float(np.clip(x / (1.0 + lam), -self.level, self.level))

    def values(self, x):
        L = self.level
        if abs(x) > L:
            return None
        if x == L:
            return (L, np.inf)
        if x == -L:
            return (-np.inf, -L)
        return (float(x), float(x))

    def domain(self):
        return -self.level, self.level

    def to_dict(self):
        return {"type": "sat_inv", "level": self.level}


@dataclass(frozen=True)
class IntervalCone(ScalarGraph):
    """Normal cone of ``[lower, upper]``."""

    lower: float = 0.0
    upper: float = 1.0

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError("interval needs lower <= upper")

    def resolvent(self, lam, x):
        return float(np.clip(x, self.lower, self.upper))

    def values(self, x):
        if x < self.lower or x > self.upper:
            return None
        lo = -np.inf if x == self.lower else 0.0
        hi = np.inf if x == self.upper else 0.0
        return (lo, hi)

    def domain(self):
        return self.lower, self.upper

    def to_dict(self):
        return {"type": "interval", "lower": self.lower, "upper": self.upper}


@dataclass(frozen=True)
class LinearSlope(ScalarGraph):
    """``F(x) = c x`` with ``c >= 0``."""

    c: float = 1.0

    def __post_init__(self):
        if self.c < 0:
            raise ValueError("slope must be nonnegative")

    def resolvent(self, lam, x):
        return float(x / (1.0 + lam * self.c))

    def values(self, x):
        return (self.c * x, self.c * x)

    def to_dict(self):
        return {"type": "linear", "slope": self.c}


def graph_from_dict(d: dict) -> ScalarGraph:
    kind = d.get("type")
    if kind == "abs":
        return AbsSubdiff()
    if kind == "relay":
        return Relay(float(d.get("a", -1.0)), float(d.get("b", 1.0)))
    if kind == "sat_inv":
        return SatInverse(float(d.get("level", 1.0)))
    if kind == "interval":
        return IntervalCone(float(d["lower"]), float(d["upper"]))
    if kind == "linear":
        return LinearSlope(float(d.get("slope", 1.0)))
    raise ValueError(f"unknown scalar graph type {kind!r}")


# ---------------------------------------------------------------------------
# operator families


class OperatorFamily:
    dim: int

    def resolvent(self, t, lam, x) -> np.ndarray:
        raise NotImplementedError

    def graph_residual(self, t, x, y) -> float:
        """Zero iff ``y in F(t, x)``; resolvent consistency ``|J_1(x + y) - x|``."""
        x, y = _vec(x, self.dim), _vec(y, self.dim)
        return float(np.linalg.norm(self.resolvent(t, 1.0, x + y) - x))

    def minimal_section(self, t, x) -> np.ndarray:
        raise NotImplementedError

    def domain_project(self, t, x) -> np.ndarray:
        raise NotImplementedError

    def domain_distance(self, t, x) -> float:
        x = _vec(x, self.dim)
        return float(np.linalg.norm(x - self.domain_project(t, x)))

    @property
    def is_static(self) -> bool:
        return True


@dataclass(frozen=True, eq=False)
class NormalConeMoving(OperatorFamily):
    moving_set: MovingSet

    @property
    def dim(self):
        return self.moving_set.dim

    @property
    def is_static(self):
        return self.moving_set.is_static

    def resolvent(self, t, lam, x):
        if lam <= 0:
            raise ValueError("lambda must be positive")
        return self.moving_set.at(t).project(_vec(x, self.dim))

    def minimal_section(self, t, x):
        x = _vec(x, self.dim)
        if not self.moving_set.at(t).contains(x, tol=1e-9):
            raise DomainError("x is outside S(t)")
        return np.zeros(self.dim)

    def domain_project(self, t, x):
        return self.moving_set.at(t).project(_vec(x, self.dim))


@dataclass(frozen=True, eq=False)
class ScalarGraphDiag(OperatorFamily):
    graphs: tuple

    def __post_init__(self):
        object.__setattr__(self, "graphs", tuple(self.graphs))

    @property
    def dim(self):
        return len(self.graphs)

    def resolvent(self, t, lam, x):
        if lam <= 0:
            raise ValueError("lambda must be positive")
        x = _vec(x, self.dim)
        return np.array([g.resolvent(lam, xi) for g, xi in zip(self.graphs, x)])

    def graph_residual(self, t, x, y):
        x, y = _vec(x, self.dim), _vec(y, self.dim)
        parts = []
        for g, xi, yi in zip(self.graphs, x, y):
            vals = g.values(xi)
            if vals is None:
                parts.append(abs(g.resolvent(1.0, xi + yi) - xi))
            else:
                parts.append(max(vals[0] - yi, yi - vals[1], 0.0))
        return float(np.linalg.norm(parts))

    def minimal_section(self, t, x):
        x = _vec(x, self.dim)
        out = np.empty(self.dim)
        for i, (g, xi) in enumerate(zip(self.graphs, x)):
            vals = g.values(xi)
            if vals is None:
                raise DomainError(f"component {i} outside the graph domain")
            out[i] = min(max(0.0, vals[0]), vals[1])
        return out

    def domain_project(self, t, x):
        x = _vec(x, self.dim)
        lo, hi = np.array([g.domain() for g in self.graphs]).T
        return np.clip(x, lo, hi)


@dataclass(frozen=True, eq=False)
class LcsRelation(OperatorFamily):
    """``H(t, .)`` of a passive LCS; the hypothesis report must be passing."""

    system: LcsSystem
    report: object = field(repr=False)
    least_norm_multipliers: bool = True

    def __post_init__(self):
        if self.report is None or not getattr(self.report, "overall", False):
            raise ValueError("LcsRelation requires a passing hypothesis report; "
                             "use passivity.build_lcs_operator")

    @property
    def dim(self):
        return self.system.n

    @property
    def is_static(self):
        return self.system.v.is_constant

    def step(self, t, lam, x, least_norm=None):
        ln = self.least_norm_multipliers if least_norm is None else least_norm
        return lcs_resolvent(self.system, t, lam, _vec(x, self.dim), least_norm=ln)

    def resolvent(self, t, lam, x):
        return self.step(t, lam, x, least_norm=False).x

    def minimal_section(self, t, x):
        x = _vec(x, self.dim)
        if self.domain_distance(t, x) > 1e-9:
            raise DomainError("C x + v(t) is outside Q_D^+")
        sysm = self.system
        q = sysm.C @ x + sysm.v(t)
        z = lcp.least_norm_solution(lcp.LcpProblem(q, sysm.D))
        return -sysm.A @ x - sysm.B @ z

    def domain_set(self, t):
        G, g, consistent = self.system.domain_halfspaces(t)
        if not consistent:
            raise DomainError(f"domain of H(t, .) is empty at t = {t:g}")
        return G, g

    def domain_project(self, t, x):
        x = _vec(x, self.dim)
        G, g = self.domain_set(t)
        if G.shape[0] == 0 or np.all(G @ x <= g):
            return x
        return project_polyhedron(x, G, g)

    def domain_distance(self, t, x):
        x = _vec(x, self.dim)
        G, g = self.domain_set(t)
        if G.shape[0] == 0:
            return 0.0
        if np.all(G @ x <= g):
            return 0.0
        return float(np.linalg.norm(x - project_polyhedron(x, G, g)))

    def domain_halfspaces(self, t) -> Halfspaces | None:
        G, g = self.domain_set(t)
        return Halfspaces(G, g) if G.shape[0] else None


# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AffineMap:
    """``f(x) = G x + g`` with Lipschitz constant ``||G||_2``."""

    G: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.G, dtype=float))
        g = np.atleast_1d(np.asarray(self.g, dtype=float))
        if G.shape != (g.size, g.size):
            raise ValueError("affine map must be square with matching offset")
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "g", g)

    @property
    def lipschitz(self) -> float:
        return float(np.linalg.norm(self.G, 2))

    def __call__(self, x):
        return self.G @ x + self.g


@dataclass(frozen=True, eq=False)
class OperatorSpec:
    """A maximal monotone family plus optional Lipschitz term and input."""

    family: OperatorFamily
    lipschitz_f: AffineMap | None = None
    input_u: Signal | None = None

    def __post_init__(self):
        n = self.family.dim
        if self.lipschitz_f is not None and self.lipschitz_f.g.size != n:
            raise ValueError("lipschitz_f dimension mismatch")
        if self.input_u is not None and self.input_u.dim != n:
            raise ValueError("input_u dimension mismatch")

    @property
    def dim(self):
        return self.family.dim

    @property
    def lipschitz(self) -> float:
        return 0.0 if self.lipschitz_f is None else self.lipschitz_f.lipschitz

    @property
    def monotone_only(self) -> bool:
        return self.lipschitz_f is None and self.input_u is None


def _family(op) -> OperatorFamily:
    return op.family if isinstance(op, OperatorSpec) else op


def resolvent(op, t, lam, x) -> np.ndarray:
    return _family(op).resolvent(t, lam, x)


def yosida(op, t, lam, x) -> np.ndarray:
    """``F_lam(x) = (x - J_lam(x)) / lam``."""
    x = np.asarray(x, dtype=float)
    return (x - resolvent(op, t, lam, x)) / lam


def minimal_section(op, t, x) -> np.ndarray:
    return _family(op).minimal_section(t, x)


def domain_project(op, t, x) -> np.ndarray:
    return _family(op).domain_project(t, x)


def domain_distance(op, t, x) -> float:
    return _family(op).domain_distance(t, x)


def graph_residual(op, t, x, y) -> float:
    return _family(op).graph_residual(t, x, y)


@dataclass(frozen=True)
class GraphSample:
    """Pairs ``(x, y)`` of one graph; use :meth:`from_operator` to validate."""

    pairs: tuple

    def __post_init__(self):
        pairs = tuple((np.atleast_1d(np.asarray(x, dtype=float)),
                       np.atleast_1d(np.asarray(y, dtype=float))) for x, y in self.pairs)
        if not pairs:
            raise ValueError("graph sample is empty")
        object.__setattr__(self, "pairs", pairs)

    @classmethod
    def from_operator(cls, op, t, pairs, tol=1e-9) -> "GraphSample":
        sample = cls(pairs)
        for x, y in sample.pairs:
            r = graph_residual(op, t, x, y)
            if r > tol:
                raise ValueError(f"pair ({x}, {y}) is not in graph F(t, .): residual {r:.3e}")
        return sample

    @classmethod
    def from_resolvents(cls, op, t, points, lam=1.0) -> "GraphSample":
        """Pairs ``(J_lam(p), F_lam(p))``, which always lie in the graph."""
        pairs = []
        for p in points:
            j = resolvent(op, t, lam, p)
            pairs.append((j, (np.asarray(p, dtype=float) - j) / lam))
        return cls(pairs)


def dis_lower_bound(g1: GraphSample, g2: GraphSample) -> float:
    """Sampled lower bound on the pseudo-distance ``dis(F1, F2)``.

    Maximum of ``<y1 - y2, x2 - x1> / (1 + |y1| + |y2|)`` over sampled pairs.
    """
    best = -np.inf
    for x1, y1 in g1.pairs:
        for x2, y2 in g2.pairs:
            if x1.shape != x2.shape:
                raise ValueError("samples have different dimensions")
            val = (y1 - y2) @ (x2 - x1) / (1.0 + np.linalg.norm(y1) + np.linalg.norm(y2))
            best = max(best, float(val))
    return best
