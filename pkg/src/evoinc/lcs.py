"""Linear complementarity systems and their implicit step.

    x' = A x + B z + u,   w = C x + D z + v(t),   0 <= z  _|_  w >= 0

One backward-Euler step of length ``h`` from ``xi`` reduces to
``LCP(q, M_h)`` with ``M_h = D + h C (I - h A)^{-1} B`` and
``q = C (I - h A)^{-1} xi + v(t)``; the new state is
``(I - h A)^{-1} (xi + h B z)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import lcp
from .geometry import ProjectionError
from .signals import Signal


class DomainViolation(ValueError):
    """The per-step LCP is infeasible: the input lies outside the reachable domain."""


@dataclass(frozen=True, eq=False)
class LcsSystem:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    v: Signal | None = None
    u: Signal | None = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = A.shape[0]
        B = np.asarray(self.B, dtype=float).reshape(n, -1)
        m = B.shape[1]
        C = np.asarray(self.C, dtype=float).reshape(m, n)
        D = np.asarray(self.D, dtype=float).reshape(m, m)
        if A.shape != (n, n):
            raise ValueError("A must be square")
        v = self.v if self.v is not None else Signal.constant(np.zeros(m))
        if v.dim != m:
            raise ValueError(f"v must be {m}-dimensional")
        if self.u is not None and self.u.dim != n:
            raise ValueError(f"u must be {n}-dimensional")
        for name, val in zip("ABCD", (A, B, C, D)):
            object.__setattr__(self, name, val)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "_step_cache", {})

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.D.shape[0]

    @cached_property
    def d_min_eig(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.D + self.D.T)).min()) if self.m else 0.0

    @property
    def d_psd(self) -> bool:
        return self.d_min_eig >= -lcp.PSD_TOL

    @cached_property
    def qd_generators(self) -> np.ndarray:
        """Extreme rays ``g`` of ``Q_D``; ``Q_D^+ = {q : g^T q >= 0}``."""
        return lcp.qm_generators(self.D)

    @cached_property
    def _domain_normals(self):
        gens = self.qd_generators
        G = -gens @ self.C
        norms = np.linalg.norm(G, axis=1)
        zero = norms <= 1e-12 * (1.0 + np.abs(self.C).max(initial=0.0))
        return gens, G, zero

    def step_matrices(self, h) -> "StepMatrices":
        """Per-step data for step ``h``, cached (the guard on ``I - hA`` included)."""
        h = float(h)
        mats = self._step_cache.get(h)
        if mats is None:
            mats = StepMatrices.build(self, h)
            if len(self._step_cache) >= 64:
                self._step_cache.clear()
            self._step_cache[h] = mats
        return mats

    def domain_halfspaces(self, t):
        """``dom H(t, .) = {x : G x <= g}`` as ``(G, g, consistent)``.

        Rows whose normal vanishes are dropped; ``consistent`` is False when
        such a row is violated (empty domain).
        """
        gens, G, zero = self._domain_normals
        if gens.shape[0] == 0:
            return np.zeros((0, self.n)), np.zeros(0), True
        g = gens @ self.v(t)
        consistent = bool(np.all(g[zero] >= -1e-12))
        return G[~zero], g[~zero], consistent


@dataclass
class LcsStep:
    x: np.ndarray
    z: np.ndarray
    solution: lcp.LcpSolution
    q: np.ndarray
    M: np.ndarray


@dataclass(frozen=True, eq=False)
class StepMatrices:
    h: float
    Minv: np.ndarray          # (I - h A)^{-1}
    CMinv: np.ndarray         # C (I - h A)^{-1}
    Mh: np.ndarray
    min_eig: float            # of the symmetric part of M_h
    psd_tol: float

    @classmethod
    def build(cls, system: LcsSystem, h: float) -> "StepMatrices":
        I_hA = np.eye(system.n) - h * system.A
        if np.linalg.cond(I_hA) > 1e12:
            raise ValueError(f"I - hA is singular for h = {h}")
        Minv = np.linalg.inv(I_hA)
        CMinv = system.C @ Minv
        Mh = system.D + h * CMinv @ system.B
        min_eig = float(np.linalg.eigvalsh(0.5 * (Mh + Mh.T)).min()) if system.m else 0.0
        # M_h is psd for passive systems only up to rounding
        psd_tol = lcp.PSD_TOL * max(1.0, np.abs(Mh).max(initial=0.0))
        if min_eig < -psd_tol:
            raise lcp.NotPsdError(f"M_h is not positive semi-definite (min eig {min_eig:.3e})")
        return cls(h, Minv, CMinv, Mh, min_eig, psd_tol)


def step_lcp_data(system: LcsSystem, t, h, xi):
    """``(q, M_h, (I - h A)^{-1})`` for one implicit step."""
    mats = system.step_matrices(h)
    q = mats.CMinv @ np.asarray(xi, dtype=float) + system.v(t)
    return q, mats.Mh, mats.Minv


def lcs_resolvent(system: LcsSystem, t, h, xi, least_norm=True) -> LcsStep:
    """Resolvent ``(I + h H(t, .))^{-1}(xi)`` of the complementarity relation.

    ``x`` is built from the complementary basic solution returned by Lemke;
    the reported multiplier ``z`` is the least-norm solution when requested.
    Any solution gives the same ``x`` for passive systems.
    """
    if h <= 0:
        raise ValueError("step must be positive")
    xi = np.asarray(xi, dtype=float).reshape(system.n)
    mats = system.step_matrices(h)
    q = mats.CMinv @ xi + system.v(t)
    prob = lcp.LcpProblem(q, mats.Mh)
    sol = lcp.solve_lcp(prob, check_psd=False)
    if not sol.solved:
        raise DomainViolation(f"per-step LCP infeasible at t = {t:g} ({sol.status})")
    x = mats.Minv @ (xi + h * system.B @ sol.z)
    z = sol.z
    if least_norm and system.m and mats.min_eig <= 1e-10:
        try:
            z = lcp.least_norm_solution(prob, lemke=sol, min_eig=mats.min_eig)
        except ProjectionError:         # keep the Lemke multiplier
            z = sol.z
    return LcsStep(x, z, sol, q, mats.Mh)
