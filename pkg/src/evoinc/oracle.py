"""Independent references and randomized probes.

Closed forms for the built-in scenarios, fine-step reference runs, a
contraction probe and falsification probes for the standing assumptions
(A1)-(A4).  Every probe takes an explicit seed and records it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .operators import (DomainError, LcsRelation, OperatorSpec, domain_distance,
                        domain_project, graph_residual, minimal_section, resolvent)
from .signals import Signal
from .timestepper import SolverConfig, Trajectory, solve


def _example1_closed_form(scenario):
    # x > 0 forces the pattern z = (x, -v_1), so x' = -v_1(t)
    v = scenario.signal_v
    x0 = float(scenario.x0[0])
    return lambda t: np.array([x0 - float(v.integral(0.0, t)[0])])


def _sweeping_closed_form(scenario):
    x0 = float(scenario.x0[0])
    return lambda t: np.array([max(x0, t)])


def _gradient_closed_form(scenario):
    x0 = np.asarray(scenario.x0, dtype=float)
    return lambda t: math.exp(-t) * x0


CLOSED_FORMS = {
    "example1_ramp": _example1_closed_form,
    "example1_paper_v": _example1_closed_form,
    "sweeping_interval": _sweeping_closed_form,
    "gradient_flow": _gradient_closed_form,
}


def closed_form(scenario):
    """Exact solution ``t -> x(t)`` for library scenarios, else None."""
    make = CLOSED_FORMS.get(scenario.name)
    return None if make is None else make(scenario)


@dataclass
class ReferenceRun:
    scenario: str
    h_ref: float
    trajectory: Trajectory
    exact: object = None          # callable t -> x, when known

    def agreement(self) -> float | None:
        """Largest grid gap between the fine run and the closed form."""
        if self.exact is None:
            return None
        return max(float(np.linalg.norm(self.exact(t) - x))
                   for t, x in zip(self.trajectory.times, self.trajectory.states))


def _states_only(spec: OperatorSpec) -> OperatorSpec:
    """Skip the least-norm multiplier selection of LCS operators."""
    if not isinstance(spec.family, LcsRelation):
        return spec
    fam = LcsRelation(spec.family.system, spec.family.report, least_norm_multipliers=False)
    return OperatorSpec(fam, spec.lipschitz_f, spec.input_u)


def reference_solution(scenario, h_ref, mode="semi_implicit") -> ReferenceRun:
    spec = _states_only(scenario.operator_spec())
    traj = solve(spec, scenario.x0, scenario.horizon, SolverConfig(h=h_ref, mode=mode))
    return ReferenceRun(scenario.name, h_ref, traj, closed_form(scenario))


def _write_kv(path, values: dict) -> None:
    """One ``key=value`` line per entry; floats in full precision."""
    with open(path, "w") as fh:
        for k, v in values.items():
            fh.write(f"{k}={float(v)!r}\n" if isinstance(v, float) else f"{k}={v}\n")


def read_kv(path) -> dict:
    """Inverse of the report writers; values come back as strings."""
    with open(path) as fh:
        return dict(line.rstrip("\n").split("=", 1) for line in fh if "=" in line)


def _sample_domain_points(spec, t, count, rng, radius):
    n = spec.dim
    pts = rng.uniform(-radius, radius, (count, n))
    return [domain_project(spec, t, p) for p in pts]


@dataclass
class ContractionReport:
    seed: int
    pairs: int
    max_growth: float             # max_k |x_k - y_k| - |x_{k-1} - y_{k-1}|
    max_ratio: float              # max_k |x_k - y_k| / |x_{k-1} - y_{k-1}|
    bound: float                  # (1 - hL)^{-1}; 1 for monotone-only
    lipschitz: float

    @property
    def ok(self) -> bool:
        if self.lipschitz == 0:
            return self.max_growth <= 1e-9
        return self.max_ratio <= self.bound + 1e-9

    def key_values(self) -> dict:
        return {"seed": self.seed, "pairs": self.pairs, "max_growth": self.max_growth,
                "max_ratio": self.max_ratio, "bound": self.bound,
                "lipschitz": self.lipschitz, "ok": self.ok}

    def write_kv(self, path) -> None:
        _write_kv(path, self.key_values())


def contraction_probe(op, pairs, cfg: SolverConfig, T=1.0, seed=0,
                      radius=3.0) -> ContractionReport:
    """Run ``pairs`` random trajectory pairs on one partition and track their distance."""
    spec = _states_only(op if isinstance(op, OperatorSpec) else OperatorSpec(op))
    rng = np.random.default_rng(seed)
    grid = cfg.grid(T)
    run_cfg = SolverConfig(partition=grid, mode=cfg.mode, picard_tol=cfg.picard_tol,
                           picard_max=cfg.picard_max)
    L = spec.lipschitz
    growth, ratio = -np.inf, 0.0
    for _ in range(pairs):
        x0, y0 = _sample_domain_points(spec, grid.times[0], 2, rng, radius)
        xs = solve(spec, x0, T, run_cfg).states
        ys = solve(spec, y0, T, run_cfg).states
        d = np.linalg.norm(xs - ys, axis=1)
        growth = max(growth, float(np.max(np.diff(d))))
        prev = d[:-1]
        ok = prev > 1e-12
        if np.any(ok):
            ratio = max(ratio, float(np.max(d[1:][ok] / prev[ok])))
    hmax = grid.granularity
    bound = 1.0 if L == 0 else 1.0 / (1.0 - hmax * L)
    return ContractionReport(seed, pairs, growth, ratio, bound, L)


@dataclass
class ProbeResult:
    name: str
    holds: bool | None             # None: nothing declared to compare against
    worst: float
    detail: str = ""

    def line(self) -> str:
        verdict = {True: "holds", False: "VIOLATED", None: "no declaration"}[self.holds]
        return f"{self.name}: {verdict} (worst {self.worst:.6g}){' ' + self.detail if self.detail else ''}"


@dataclass
class AssumptionReport:
    seed: int
    samples: int
    results: dict = field(default_factory=dict)

    @property
    def falsified(self) -> bool:
        return any(r.holds is False for r in self.results.values())

    def lines(self) -> list:
        return [f"seed: {self.seed}", f"samples: {self.samples}"] + \
            [r.line() for r in self.results.values()]

    def key_values(self) -> dict:
        out = {"seed": self.seed, "samples": self.samples, "falsified": self.falsified}
        for key, r in self.results.items():
            out[f"{key}.holds"] = r.holds
            out[f"{key}.worst"] = r.worst
        return out

    def write_kv(self, path) -> None:
        _write_kv(path, self.key_values())


def _probe_a1(spec, times, samples, rng, radius):
    worst = np.inf
    for _ in range(samples):
        t = float(rng.choice(times))
        lam = float(10.0 ** rng.uniform(-2, 1))
        p1, p2 = rng.uniform(-radius, radius, (2, spec.dim))
        j1, j2 = resolvent(spec, t, lam, p1), resolvent(spec, t, lam, p2)
        y1, y2 = (p1 - j1) / lam, (p2 - j2) / lam
        worst = min(worst, float((j1 - j2) @ (y1 - y2)))
    return ProbeResult("A1 monotonicity", worst >= -1e-9, worst, "min <x1-x2, y1-y2>")


def _probe_a2(spec, times, samples, rng, radius, phi):
    worst_excess, worst_inc = -np.inf, 0.0
    for s, t in zip(times[:-1], times[1:]):
        allowed = None if phi is None else float(phi(t)[0] - phi(s)[0])
        for z in _sample_domain_points(spec, s, samples, rng, radius):
            inc = domain_distance(spec, t, z)
            worst_inc = max(worst_inc, inc)
            if allowed is not None:
                worst_excess = max(worst_excess, inc - allowed)
    if phi is None:
        return ProbeResult("A2 domain motion", None, worst_inc, "max dist(z, dom F(t)) over z in dom F(s)")
    return ProbeResult("A2 domain motion", bool(worst_excess <= 1e-9), worst_inc,
                       f"largest excess over phi(t) - phi(s): {worst_excess:.3e}")


def _probe_a3(spec, times, samples, rng, radius, sigma):
    worst_ratio = 0.0
    for _ in range(samples):
        t = float(rng.choice(times))
        x = _sample_domain_points(spec, t, 1, rng, radius)[0]
        try:
            y = minimal_section(spec, t, x)
        except DomainError:
            continue
        worst_ratio = max(worst_ratio, float(np.linalg.norm(y) / (1.0 + np.linalg.norm(x))))
    if sigma is None:
        return ProbeResult("A3 minimal section growth", None, worst_ratio, "max |F0(t,x)| / (1 + |x|)")
    return ProbeResult("A3 minimal section growth", worst_ratio <= sigma + 1e-9, worst_ratio,
                       f"declared sigma {sigma:g}")


def _probe_a4(spec, times, samples, rng, radius):
    worst = 0.0
    span = float(times[-1] - times[0]) or 1.0
    for _ in range(samples):
        t = float(rng.uniform(times[0], times[-1]))
        p = rng.uniform(-radius, radius, spec.dim)
        side = 1.0 if t + span * 1e-3 <= times[-1] else -1.0
        seq = []
        for ell in range(1, 31):
            t_l = t + side * span * 2.0 ** (-ell)
            x_l = resolvent(spec, t_l, 1.0, p)
            seq.append((x_l, p - x_l))
        (xa, ya), (xb, yb) = seq[-2], seq[-1]
        if np.linalg.norm(xa - xb) + np.linalg.norm(ya - yb) > 1e-6:
            continue                      # not a convergent sample
        worst = max(worst, graph_residual(spec, t, xb, yb))
    return ProbeResult("A4 outer semicontinuity", worst <= 1e-6, worst,
                       "graph residual of limit pairs")


def assumption_probe(op, grid, samples=64, seed=0, phi=None, sigma=None, which=None,
                     radius=5.0) -> AssumptionReport:
    """Falsification probes for (A1)-(A4); a passing probe proves nothing."""
    spec = op if isinstance(op, OperatorSpec) else OperatorSpec(op)
    times = np.atleast_1d(np.asarray(getattr(grid, "times", grid), dtype=float))
    phi = None if phi is None else (phi if isinstance(phi, Signal) else Signal.from_knots(phi))
    which = {"a1", "a2", "a3", "a4"} if which is None else {w.lower() for w in which}
    rng = np.random.default_rng(seed)
    rep = AssumptionReport(seed, samples)
    if "a1" in which:
        rep.results["a1"] = _probe_a1(spec, times, samples, rng, radius)
    if "a2" in which:
        rep.results["a2"] = _probe_a2(spec, times, samples, rng, radius, phi)
    if "a3" in which:
        rep.results["a3"] = _probe_a3(spec, times, samples, rng, radius, sigma)
    if "a4" in which:
        rep.results["a4"] = _probe_a4(spec, times, samples, rng, radius)
    return rep


def is_lcs(op) -> bool:
    spec = op if isinstance(op, OperatorSpec) else OperatorSpec(op)
    return isinstance(spec.family, LcsRelation)
