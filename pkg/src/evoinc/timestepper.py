"""Implicit resolvent time stepping (catching-up scheme).

    x_{k+1} = J_{h_{k+1}}(t_{k+1}, x_k + h_{k+1} f(x_k) + h_{k+1} u(t_k))

with ``J_h(t, .) = (I + h F(t, .))^{-1}``.  In ``picard`` mode ``f`` is
evaluated at the new state and the step is iterated to a fixed point.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .lcs import lcs_resolvent  # noqa: F401  (re-exported)
from .operators import (DomainError, LcsRelation, OperatorSpec, domain_distance,
                        domain_project, resolvent)
from .signals import Signal

DOMAIN_TOL = 1e-8
MODES = ("semi_implicit", "picard")
INTERPOLATIONS = ("linear_t", "psi_weighted")


class StepError(RuntimeError):
    def __init__(self, message, index):
        super().__init__(f"step {index}: {message}")
        self.index = index


class PicardError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Partition:
    times: np.ndarray

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.times, dtype=float))
        if t.ndim != 1 or t.size < 2:
            raise ValueError("a partition needs at least two times")
        if np.any(np.diff(t) <= 0):
            raise ValueError("partition times must be strictly increasing")
        object.__setattr__(self, "times", t)

    @classmethod
    def uniform(cls, T, h, t0=0.0) -> "Partition":
        """``K = ceil(T / h)`` steps; the last one is shortened to end at ``t0 + T``."""
        if h <= 0 or T <= 0:
            raise ValueError("T and h must be positive")
        K = max(1, math.ceil(T / h - 1e-9))
        t = t0 + np.arange(K + 1) * h
        t[-1] = t0 + T
        if K > 1 and t[-1] - t[-2] <= 1e-12 * max(1.0, abs(T)):
            t = np.delete(t, -2)
        return cls(t)

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.times)

    @property
    def size(self) -> int:
        return self.times.size - 1

    @property
    def granularity(self) -> float:
        return float(self.steps.max())

    @property
    def horizon(self) -> float:
        return float(self.times[-1] - self.times[0])


@dataclass(frozen=True)
class SolverConfig:
    h: float | None = None
    partition: Partition | None = None
    mode: str = "semi_implicit"
    picard_tol: float = 1e-10
    picard_max: int = 100
    project_x0: bool = False
    interpolation: str = "linear_t"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.interpolation not in INTERPOLATIONS:
            raise ValueError(f"interpolation must be one of {INTERPOLATIONS}")
        if self.h is not None and self.h <= 0:
            raise ValueError("h must be positive")
        if self.picard_tol <= 0 or self.picard_max < 1:
            raise ValueError("picard tolerances must be positive")
        if self.h is None and self.partition is None:
            raise ValueError("give a step h or an explicit partition")

    def grid(self, T, t0=0.0) -> Partition:
        if self.partition is not None:
            return self.partition
        return Partition.uniform(T, self.h, t0)


@dataclass
class Trajectory:
    partition: Partition
    states: np.ndarray                     # (K+1, n)
    multipliers: np.ndarray | None = None  # (K+1, m); row 0 is nan
    diagnostics: list = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return self.partition.times

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self, path_or_file) -> None:
        n = self.states.shape[1]
        header = ["t"] + [f"x_{i + 1}" for i in range(n)]
        if self.multipliers is not None:
            header += [f"z_{i + 1}" for i in range(self.multipliers.shape[1])]
        own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            w = csv.writer(fh)
            w.writerow(header)
            for k, t in enumerate(self.times):
                row = [t, *self.states[k]]
                if self.multipliers is not None:
                    row += list(self.multipliers[k])
                w.writerow([repr(float(x)) for x in row])
        finally:
            if own:
                fh.close()


def _spec(op) -> OperatorSpec:
    return op if isinstance(op, OperatorSpec) else OperatorSpec(op)


def _advance(spec: OperatorSpec, x, t0, t1, cfg: SolverConfig):
    """One step: ``(x_next, z or None, picard iterations, lcp pivots)``."""
    h = t1 - t0
    if h <= 0:
        raise ValueError("step must be positive")
    fam = spec.family
    base = np.array(x, dtype=float)
    if spec.input_u is not None:
        base = base + h * spec.input_u(t0)
    f = spec.lipschitz_f

    def J(xi):
        if isinstance(fam, LcsRelation):
            r = fam.step(t1, h, xi)
            return r.x, r.z, r.solution.pivots
        return resolvent(fam, t1, h, xi), None, 0

    if f is None or cfg.mode == "semi_implicit":
        xi = base if f is None else base + h * f(x)
        xn, z, piv = J(xi)
        return xn, z, 0, piv

    L = spec.lipschitz
    if h * L >= 0.5:
        raise PicardError(f"picard mode needs h L < 0.5 (h L = {h * L:.3g})")
    xi_prev = np.array(x, dtype=float)
    for it in range(1, cfg.picard_max + 1):
        xn, z, piv = J(base + h * f(xi_prev))
        if np.linalg.norm(xn - xi_prev) <= cfg.picard_tol * (1.0 + np.linalg.norm(xn)):
            return xn, z, it, piv
        xi_prev = xn
    raise PicardError(f"picard iteration did not converge in {cfg.picard_max} iterations")


def step(op, x_k, t_k, t_next, cfg: SolverConfig) -> np.ndarray:
    return _advance(_spec(op), np.atleast_1d(np.asarray(x_k, dtype=float)), t_k, t_next, cfg)[0]


def lcs_step_guard(spec: OperatorSpec, h: float) -> float | None:
    """Largest recommended step ``0.5 / ||A||`` for LCS operators (None otherwise)."""
    fam = spec.family
    if not isinstance(fam, LcsRelation):
        return None
    nA = float(np.linalg.norm(fam.system.A, 2))
    return math.inf if nA == 0 else 0.5 / nA


def solve(op, x0, T, cfg: SolverConfig, t0=0.0) -> Trajectory:
    spec = _spec(op)
    grid = cfg.grid(T, t0)
    x = np.atleast_1d(np.asarray(x0, dtype=float))
    if x.shape != (spec.dim,):
        raise ValueError(f"x0 must have dimension {spec.dim}")
    guard = lcs_step_guard(spec, grid.granularity)
    if guard is not None and grid.granularity >= guard:
        warnings.warn(f"step {grid.granularity:g} exceeds the LCS guard 0.5/||A|| = {guard:g}",
                      RuntimeWarning, stacklevel=2)

    times = grid.times
    d0 = domain_distance(spec, times[0], x)
    if d0 > DOMAIN_TOL:
        if not cfg.project_x0:
            raise DomainError(f"x0 is at distance {d0:.3e} from the domain at t = {times[0]:g}")
        x = domain_project(spec, times[0], x)

    K = grid.size
    states = np.empty((K + 1, spec.dim))
    states[0] = x
    zs = None
    diags = []
    for k in range(K):
        try:
            x, z, its, piv = _advance(spec, x, times[k], times[k + 1], cfg)
        except (ValueError, RuntimeError) as exc:
            raise StepError(str(exc), k + 1) from exc
        dist = domain_distance(spec, times[k + 1], x)
        if dist > DOMAIN_TOL:
            raise StepError(f"iterate left the domain (distance {dist:.3e})", k + 1)
        states[k + 1] = x
        if z is not None:
            if zs is None:
                zs = np.full((K + 1, z.size), np.nan)
            zs[k + 1] = z
        diags.append({"picard_iterations": its, "lcp_pivots": piv})
    return Trajectory(grid, states, zs, diags)


# ---------------------------------------------------------------------------
# certificates


def _as_signal(phi) -> Signal:
    if isinstance(phi, Signal):
        return phi
    if phi is None:
        return Signal.constant(0.0)
    if np.isscalar(phi):
        return Signal.constant(float(phi))
    return Signal.from_knots(phi)


@dataclass(frozen=True, eq=False)
class BoundCertificate:
    x0_norm: float
    phi: Signal
    sigma: float
    T: float
    alpha: float
    r_alpha: float
    beta: float
    gamma: float
    r_gamma: float
    psi: Signal

    def psi_at(self, t) -> float:
        return float(self.psi(t)[0])


def bound_certificate(x0_norm, phi, sigma, T) -> BoundCertificate:
    """Constants bounding every discrete solution on ``[0, T]``.

    ``phi`` is nondecreasing and piecewise linear (``Signal``, knot list or
    constant); ``sigma`` is a constant growth bound on the minimal section.
    """
    phi = _as_signal(phi)
    if phi.dim != 1:
        raise ValueError("phi must be scalar")
    if np.any(np.diff(phi.values[:, 0]) < 0):
        raise ValueError("phi must be nondecreasing")
    if sigma < 0 or T <= 0 or x0_norm < 0:
        raise ValueError("need sigma >= 0, T > 0, |x0| >= 0")
    dphi = float(phi(T)[0] - phi(0.0)[0])
    alpha = x0_norm + dphi
    beta = alpha + dphi + (1.0 + alpha) * sigma * T
    gamma = beta + dphi
    knots = np.unique(np.concatenate([[0.0, T], phi.times[(phi.times > 0) & (phi.times < T)]]))
    psi_vals = knots + 2.0 * np.array([phi(t)[0] for t in knots]) + (1.0 + gamma) * sigma * knots
    psi = Signal(knots, psi_vals[:, None])
    return BoundCertificate(float(x0_norm), phi, float(sigma), float(T), alpha, alpha + 1.0,
                            beta, gamma, gamma + 1.0, psi)


@dataclass(frozen=True)
class CertificateReport:
    norm_violations: list
    increment_violations: list
    max_norm: float
    beta: float
    worst_increment_slack: float       # min over k of psi-jump minus increment

    @property
    def ok(self) -> bool:
        return not self.norm_violations and not self.increment_violations

    @property
    def first_violation(self) -> int | None:
        both = self.norm_violations + self.increment_violations
        return min(both) if both else None


def certify_run(traj: Trajectory, cert: BoundCertificate, tol=1e-9) -> CertificateReport:
    norms = np.linalg.norm(traj.states, axis=1)
    bad_norm = [int(k) for k in np.flatnonzero(norms > cert.beta + tol)]
    inc = np.linalg.norm(np.diff(traj.states, axis=0), axis=1)
    psi = np.array([cert.psi_at(t) for t in traj.times])
    slack = np.diff(psi) - inc
    bad_inc = [int(k) + 1 for k in np.flatnonzero(slack < -tol)]
    return CertificateReport(bad_norm, bad_inc, float(norms.max()), cert.beta,
                             float(slack.min(initial=np.inf)))


def interpolate(traj: Trajectory, t, cert: BoundCertificate | None = None,
                mode: str | None = None) -> np.ndarray:
    """Interpolant ``x_Delta(t)``; weights are linear in ``psi`` (``psi(t) = t`` by default)."""
    if mode is None:
        mode = "psi_weighted" if cert is not None else "linear_t"
    if mode not in INTERPOLATIONS:
        raise ValueError(f"mode must be one of {INTERPOLATIONS}")
    if mode == "psi_weighted" and cert is None:
        raise ValueError("psi_weighted interpolation needs a certificate")
    times = traj.times
    if not times[0] - 1e-12 <= t <= times[-1] + 1e-12:
        raise ValueError(f"t = {t} outside [{times[0]}, {times[-1]}]")
    k = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, times.size - 2))
    if t == times[k]:
        return traj.states[k].copy()
    psi = cert.psi_at if mode == "psi_weighted" else float
    a, b, c = psi(times[k]), psi(t), psi(times[k + 1])
    w = (b - a) / (c - a)
    return (1.0 - w) * traj.states[k] + w * traj.states[k + 1]


# ---------------------------------------------------------------------------
# refinement


@dataclass(frozen=True)
class ConvergenceReport:
    steps: list                 # h_l
    errors: list                # e_l between levels l and l+1
    orders: list                # log2(e_l / e_{l+1}); nan when undefined
    cauchy_monotone: bool
    exact_errors: list | None = None

    def lines(self) -> list:
        out = [f"level {i}: h = {h:.6g}" + (f", e = {self.errors[i]:.6e}" if i < len(self.errors) else "")
               + (f", order = {self.orders[i]:.4f}" if i < len(self.orders) else "")
               + (f", exact error = {self.exact_errors[i]:.6e}" if self.exact_errors else "")
               for i, h in enumerate(self.steps)]
        out.append(f"cauchy_monotone: {self.cauchy_monotone}")
        return out


def _order(a, b):
    if a > 0 and b > 0:
        return math.log2(a / b)
    return math.nan


def refine_study(op, x0, T, h0, levels, cfg: SolverConfig | None = None,
                 exact=None) -> ConvergenceReport:
    """Solve at ``h0, h0/2, ...`` and compare successive levels.

    ``e_l`` is the largest gap between the level-``l`` interpolant and the
    level-``l+1`` iterates, taken over the finer grid.  With ``exact`` (a
    callable ``t -> x``) the grid error of every level is reported too.
    """
    if levels < 2:
        raise ValueError("levels must be at least 2")
    base = cfg or SolverConfig(h=h0)
    runs, hs = [], []
    for level in range(levels):
        h = h0 / 2 ** level
        c = SolverConfig(h=h, mode=base.mode, picard_tol=base.picard_tol,
                         picard_max=base.picard_max, project_x0=base.project_x0)
        runs.append(solve(op, x0, T, c))
        hs.append(h)
    errors = []
    for coarse, fine in zip(runs[:-1], runs[1:]):
        e = max(float(np.linalg.norm(interpolate(coarse, t, mode="linear_t") - x))
                for t, x in zip(fine.times, fine.states))
        errors.append(e)
    orders = [_order(a, b) for a, b in zip(errors[:-1], errors[1:])]
    cauchy = all(b <= a + 1e-14 for a, b in zip(errors[:-1], errors[1:]))
    exact_errors = None
    if exact is not None:
        exact_errors = [max(float(np.linalg.norm(np.atleast_1d(exact(t)) - x))
                            for t, x in zip(r.times, r.states)) for r in runs]
    return ConvergenceReport(hs, errors, orders, cauchy, exact_errors)
