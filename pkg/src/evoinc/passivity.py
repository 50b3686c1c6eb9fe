"""Passivity-based hypothesis checks for linear complementarity systems.

The storage function is fixed to ``x -> |x|^2 / 2`` (``K = I``).  A system
that passes the gate becomes an :class:`~evoinc.operators.LcsRelation`
through :func:`build_lcs_operator`; everything else is refused with the
report attached.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import lcp
from .geometry import project_polyhedron
from .lcs import LcsSystem
from .operators import LcsRelation, OperatorSpec
from .simplex import lp_feasible

KYP_TOL = 1e-9
KERNEL_TOL = 1e-8
MAX_FACET_SIZE = 12


class HypothesisError(ValueError):
    """The system fails the hypothesis gate; ``report`` says why."""

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


def _grid_times(grid) -> np.ndarray:
    times = getattr(grid, "times", grid)
    return np.atleast_1d(np.asarray(times, dtype=float))


def kyp_block(A, B, C, D) -> np.ndarray:
    A, B, C, D = (np.atleast_2d(np.asarray(X, dtype=float)) for X in (A, B, C, D))
    B = B.reshape(A.shape[0], -1)
    C = C.reshape(B.shape[1], A.shape[0])
    return np.block([[A + A.T, B - C.T], [B.T - C, -(D + D.T)]])


def kyp_check_identity(A, B, C, D):
    """Passivity with identity storage: ``(holds, max eigenvalue of the block)``."""
    W = kyp_block(A, B, C, D)
    margin = float(np.linalg.eigvalsh(0.5 * (W + W.T)).max())
    return margin <= KYP_TOL, margin


def kernel_condition(system: LcsSystem):
    """``(B - C^T) ker(D + D^T) = {0}``: ``(holds, worst |(B - C^T) k|)``."""
    if system.m == 0:
        return True, 0.0
    N = lcp._kernel_basis(system.D + system.D.T, 1e-9)
    if N.shape[1] == 0:
        return True, 0.0
    res = float(np.linalg.norm((system.B - system.C.T) @ N, axis=0).max())
    return res <= KERNEL_TOL, res


@dataclass(frozen=True)
class RelIntCheck:
    t: float
    holds: bool
    slack: float                  # normalized strict slack; inf when unconstrained
    point: np.ndarray | None      # x with C x + v(t) in the interior of Q_D^+


def check_rel_int(system: LcsSystem, t: float) -> RelIntCheck:
    """Is ``im C`` meeting the relative interior of ``Q_D^+ - v(t)``?

    ``Q_D`` is pointed, so ``Q_D^+`` is full-dimensional and its relative
    interior is ``{q : g^T q > 0}`` over the extreme rays ``g`` of ``Q_D``.
    The test is a strict-feasibility LP in ``x`` with unit-norm rows.
    """
    if system.m > MAX_FACET_SIZE:
        raise ValueError(f"facet enumeration limited to m <= {MAX_FACET_SIZE}")
    if system.m and not system.d_psd:
        raise lcp.NotPsdError("D is not positive semi-definite")
    gens = system.qd_generators
    v = system.v(t)
    if gens.shape[0] == 0:
        return RelIntCheck(float(t), True, np.inf, np.zeros(system.n))
    G = -gens @ system.C
    g = gens @ v
    norms = np.linalg.norm(G, axis=1)
    flat = norms <= 1e-12 * (1.0 + np.abs(system.C).max())
    # rows independent of x must hold strictly on their own
    if np.any(g[flat] <= 1e-12):
        return RelIntCheck(float(t), False, float(g[flat].min()), None)
    if not np.any(~flat):
        return RelIntCheck(float(t), True, float(g[flat].min()), np.zeros(system.n))
    rep = lp_feasible(G[~flat] / norms[~flat, None], g[~flat] / norms[~flat], strict=True)
    return RelIntCheck(float(t), bool(rep.strictly_feasible), float(rep.slack), rep.point)


@dataclass(frozen=True)
class MotionReport:
    """Sampled motion of ``W(t) = im C ∩ (Q_D^+ - v(t))``.

    ``increments[i]`` is the largest observed distance from a sample of
    ``W(times[i])`` to ``W(times[i+1])``; ``v_variation[i]`` is the matching
    ``∫|v'|``.  ``beta_hat`` is the largest ratio of the two (0 when the
    signal does not move).  Sampled lower bounds only.
    """

    times: np.ndarray
    increments: np.ndarray
    v_variation: np.ndarray
    beta_hat: float
    samples: int
    seed: int

    @property
    def max_increment(self) -> float:
        return float(self.increments.max(initial=0.0))


def _motion_set(system, basis, t):
    """``{y : C-image point U y lies in Q_D^+ - v(t)}`` as ``(G, g)``."""
    gens = system.qd_generators
    return -gens @ basis, gens @ system.v(t)


def _inside(G, g, y):
    return G.shape[0] == 0 or bool(np.all(G @ y <= g + 1e-12 * (1.0 + np.abs(g))))


def check_domain_motion(system: LcsSystem, grid, samples=32, radius=10.0,
                        seed=0) -> MotionReport:
    times = _grid_times(grid)
    rng = np.random.default_rng(seed)
    u, sv, _ = np.linalg.svd(system.C) if system.m else (np.zeros((0, 0)), np.zeros(0), None)
    rank = int(np.sum(sv > 1e-12 * max(1.0, sv.max(initial=0.0))))
    U = u[:, :rank]
    incs = np.zeros(max(times.size - 1, 0))
    var = np.zeros_like(incs)
    for i, (s, t) in enumerate(zip(times[:-1], times[1:])):
        var[i] = system.v.variation(s, t)
        if rank == 0 or system.qd_generators.shape[0] == 0:
            continue
        Gs, gs = _motion_set(system, U, s)
        Gt, gt = _motion_set(system, U, t)
        if lp_feasible(Gs, gs).feasible is False or lp_feasible(Gt, gt).feasible is False:
            incs[i] = np.inf
            continue
        pts = [np.zeros(rank)] + list(rng.uniform(-radius, radius, (samples, rank)))
        worst = 0.0
        for p in pts:
            y = p if _inside(Gs, gs, p) else project_polyhedron(p, Gs, gs)
            if _inside(Gt, gt, y):
                continue
            worst = max(worst, float(np.linalg.norm(y - project_polyhedron(y, Gt, gt))))
        incs[i] = worst
    moving = var > 0
    beta = float(np.max(incs[moving] / var[moving])) if np.any(moving) else 0.0
    return MotionReport(times, incs, var, beta, samples, seed)


@dataclass
class HypothesisReport:
    passive_identity: bool
    lmi_margin: float
    d_psd: bool
    d_min_eig: float
    kernel_condition: bool
    kernel_residual: float
    rel_int: list = field(default_factory=list)           # RelIntCheck per grid time
    domain_motion: MotionReport | None = None
    witnesses: dict = field(default_factory=dict)

    @property
    def rel_int_ok(self) -> bool:
        return all(c.holds for c in self.rel_int)

    @property
    def overall(self) -> bool:
        return (self.passive_identity and self.d_psd and self.kernel_condition
                and self.rel_int_ok)

    def summary(self) -> str:
        lines = [
            f"passive_identity: {self.passive_identity} (margin {self.lmi_margin:.3e})",
            f"d_psd: {self.d_psd} (min eig {self.d_min_eig:.3e})",
            f"kernel_condition: {self.kernel_condition} (residual {self.kernel_residual:.3e})",
        ]
        if self.rel_int:
            bad = [c.t for c in self.rel_int if not c.holds]
            lines.append(f"rel_int: {self.rel_int_ok} ({len(self.rel_int)} times"
                         + (f", fails at t = {bad[0]:g}" if bad else "") + ")")
        else:
            lines.append("rel_int: not checked")
        if self.domain_motion is not None:
            dm = self.domain_motion
            lines.append(f"domain_motion: max increment {dm.max_increment:.3e}, "
                         f"beta_hat {dm.beta_hat:.3e} (samples {dm.samples}, seed {dm.seed})")
        for key, val in self.witnesses.items():
            lines.append(f"witness {key}: {val}")
        lines.append(f"overall: {self.overall}")
        return "\n".join(lines)


def hypothesis_report(system: LcsSystem, grid=None, motion=True, seed=0) -> HypothesisReport:
    """Run every check; rel-int and motion only on a grid and only if ``D`` is psd."""
    passive, margin = kyp_check_identity(system.A, system.B, system.C, system.D)
    kernel_ok, kernel_res = kernel_condition(system)
    rep = HypothesisReport(passive, margin, system.d_psd, system.d_min_eig, kernel_ok, kernel_res)
    if not passive:
        W = kyp_block(system.A, system.B, system.C, system.D)
        vals, vecs = np.linalg.eigh(0.5 * (W + W.T))
        rep.witnesses["passive_identity"] = f"eigenvector {np.round(vecs[:, -1], 12).tolist()}"
    if not system.d_psd:
        rep.witnesses["d_psd"] = f"min eigenvalue of (D + D^T)/2 is {system.d_min_eig:.6g}"
    if not kernel_ok:
        rep.witnesses["kernel_condition"] = f"|(B - C^T) k| = {kernel_res:.6g}"
    if grid is not None and system.d_psd:
        times = _grid_times(grid)
        rep.rel_int = [check_rel_int(system, t) for t in times]
        bad = [c for c in rep.rel_int if not c.holds]
        if bad:
            rep.witnesses["rel_int"] = f"t = {bad[0].t:g}, slack {bad[0].slack:.6g}"
        if motion:
            rep.domain_motion = check_domain_motion(system, times, seed=seed)
    return rep


def build_lcs_operator(system: LcsSystem, grid) -> OperatorSpec:
    """Gate the system on passivity and the relative-interior condition."""
    report = hypothesis_report(system, grid)
    if not report.overall:
        raise HypothesisError("LCS hypotheses fail:\n" + report.summary(), report)
    return OperatorSpec(LcsRelation(system, report), input_u=system.u)


def random_passive_system(rng, n, m, rank=None, scale=1.0) -> LcsSystem:
    """Random ``(A, B, C, D)`` passive with ``K = I``.

    The dissipation block is ``-N`` for a random psd ``N = R R^T`` of the given
    rank; antisymmetric parts of ``A`` and ``D`` and the matrix ``C`` are free.
    """
    rank = n + m if rank is None else rank
    R = rng.uniform(-scale, scale, (n + m, rank))
    N = R @ R.T
    W = -N
    S_A = rng.uniform(-scale, scale, (n, n))
    S_D = rng.uniform(-scale, scale, (m, m))
    A = 0.5 * W[:n, :n] + 0.5 * (S_A - S_A.T)
    C = rng.uniform(-scale, scale, (m, n))
    B = C.T + W[:n, n:]
    D = 0.5 * N[n:, n:] + 0.5 * (S_D - S_D.T)
    return LcsSystem(A, B, C, D)
