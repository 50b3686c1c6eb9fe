"""Scenario files, the built-in library and the ``evoinc`` command line.

A scenario is a JSON object with exactly the keys ``name``, ``horizon``,
``x0``, ``operator``, ``lipschitz_f``, ``input_u``, ``signal_v``, ``phi`` and
``sigma``.  Signals are knot lists ``[[t, [v_1, ...]], ...]``; a single knot
is a constant.  Operator kinds:

* ``sweeping_box``: ``lower``, ``upper`` and optional knot lists ``shift``,
  ``lower_offset``, ``upper_offset``;
* ``scalar_graph_diag``: ``graphs``, a list of ``{"type": ...}`` objects
  (``abs``, ``relay``, ``sat_inv``, ``interval``, ``linear``);
* ``lcs``: matrices ``A``, ``B``, ``C``, ``D`` (``v`` comes from ``signal_v``).

Exit codes: 0 success, 2 validation error, 3 hypothesis failure,
4 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
import warnings
from dataclasses import dataclass
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np

from . import lcp, oracle
from .geometry import Box, MovingSet, ProjectionError
from .lcs import DomainViolation, LcsSystem
from .operators import (AffineMap, DomainError, NormalConeMoving, OperatorSpec,
                        ScalarGraphDiag, graph_from_dict)
from .passivity import HypothesisError, build_lcs_operator, hypothesis_report
from .signals import Signal
from .timestepper import (PicardError, SolverConfig, StepError, bound_certificate,
                          certify_run, refine_study, solve)

KEYS = ("name", "horizon", "x0", "operator", "lipschitz_f", "input_u", "signal_v",
        "phi", "sigma")
REQUIRED = ("name", "horizon", "x0", "operator")
OPERATOR_KEYS = {
    "sweeping_box": ({"kind", "lower", "upper"}, {"shift", "lower_offset", "upper_offset"}),
    "scalar_graph_diag": ({"kind", "graphs"}, set()),
    "lcs": ({"kind", "A", "B", "C", "D"}, set()),
}
BUILTINS = ("example1_ramp", "example1_paper_v", "sweeping_interval", "gradient_flow",
            "relay_feedback", "diode_bridge")

EXIT_OK, EXIT_VALIDATION, EXIT_HYPOTHESIS, EXIT_NUMERICAL = 0, 2, 3, 4


class ScenarioError(ValueError):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


# ---------------------------------------------------------------------------
# parsing helpers


def _number(value, path) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(path, "expected a number")
    if not math.isfinite(value):
        raise ScenarioError(path, "expected a finite number")
    return float(value)


def _vector(value, path) -> np.ndarray:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        value = [value]
    if not isinstance(value, list) or not value:
        raise ScenarioError(path, "expected a nonempty list of numbers")
    return np.array([_number(v, f"{path}[{i}]") for i, v in enumerate(value)])


def _matrix(value, path) -> np.ndarray:
    if not isinstance(value, list) or not value or not all(isinstance(r, list) for r in value):
        raise ScenarioError(path, "expected a nonempty list of rows")
    rows = [_vector(r, f"{path}[{i}]") for i, r in enumerate(value)]
    if len({r.size for r in rows}) != 1:
        raise ScenarioError(path, "rows have different lengths")
    return np.vstack(rows)


def _signal(value, path, dim=None) -> Signal:
    if not isinstance(value, list) or not value:
        raise ScenarioError(path, "expected a knot list [[t, value], ...]")
    knots = []
    for i, k in enumerate(value):
        if not isinstance(k, list) or len(k) != 2:
            raise ScenarioError(f"{path}[{i}]", "a knot is [t, value]")
        knots.append((_number(k[0], f"{path}[{i}][0]"), _vector(k[1], f"{path}[{i}][1]")))
    if len({v.size for _, v in knots}) != 1:
        raise ScenarioError(path, "knot values have different lengths")
    try:
        sig = Signal.from_knots(knots)
    except ValueError as exc:
        raise ScenarioError(path, str(exc)) from None
    if dim is not None and sig.dim != dim:
        raise ScenarioError(path, f"expected dimension {dim}, got {sig.dim}")
    return sig


def _knots(sig: Signal | None):
    if sig is None:
        return None
    return [[float(t), [float(x) for x in v]] for t, v in zip(sig.times, sig.values)]


def _rows(M: np.ndarray):
    return [[float(x) for x in row] for row in M]


# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    horizon: float
    x0: np.ndarray
    operator: dict              # canonical operator description
    lipschitz_f: AffineMap | None = None
    input_u: Signal | None = None
    signal_v: Signal | None = None
    phi: Signal | None = None
    sigma: float | None = None

    @property
    def kind(self) -> str:
        return self.operator["kind"]

    @property
    def dim(self) -> int:
        return self.x0.size

    def to_dict(self) -> dict:
        f = self.lipschitz_f
        return {
            "name": self.name,
            "horizon": self.horizon,
            "x0": [float(x) for x in self.x0],
            "operator": self.operator,
            "lipschitz_f": None if f is None else {"G": _rows(f.G), "g": [float(x) for x in f.g]},
            "input_u": _knots(self.input_u),
            "signal_v": _knots(self.signal_v),
            "phi": _knots(self.phi),
            "sigma": self.sigma,
        }

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    __hash__ = None

    def lcs_system(self) -> LcsSystem:
        if self.kind != "lcs":
            raise ScenarioError("operator.kind", "not an LCS scenario")
        op = self.operator
        return LcsSystem(np.array(op["A"]), np.array(op["B"]), np.array(op["C"]),
                         np.array(op["D"]), v=self.signal_v, u=self.input_u)

    def gate_times(self) -> np.ndarray:
        """Times at which the relative-interior condition is checked.

        ``v`` is piecewise linear, so strict feasibility at the ends of every
        linear piece carries over to the whole piece.
        """
        t = [0.0, self.horizon]
        if self.signal_v is not None:
            t += [k for k in self.signal_v.times if 0.0 < k < self.horizon]
        return np.unique(np.array(t))

    @cached_property
    def _spec(self) -> OperatorSpec:
        op = self.operator
        if self.kind == "lcs":
            spec = build_lcs_operator(self.lcs_system(), self.gate_times())
            return OperatorSpec(spec.family, self.lipschitz_f, self.input_u)
        if self.kind == "sweeping_box":
            sig = {k: None if op.get(k) is None else _signal(op[k], f"operator.{k}")
                   for k in ("shift", "lower_offset", "upper_offset")}
            fam = NormalConeMoving(MovingSet(Box(op["lower"], op["upper"]), **sig))
        else:
            fam = ScalarGraphDiag([graph_from_dict(g) for g in op["graphs"]])
        return OperatorSpec(fam, self.lipschitz_f, self.input_u)

    def operator_spec(self) -> OperatorSpec:
        """The operator, behind the hypothesis gate for LCS scenarios."""
        return self._spec


def _parse_operator(op, n_hint=None):
    if not isinstance(op, dict):
        raise ScenarioError("operator", "expected an object")
    kind = op.get("kind")
    if kind not in OPERATOR_KEYS:
        raise ScenarioError("operator.kind", f"expected one of {sorted(OPERATOR_KEYS)}")
    required, optional = OPERATOR_KEYS[kind]
    for k in sorted(required - set(op)):
        raise ScenarioError(f"operator.{k}", "missing key")
    for k in sorted(set(op) - required - optional):
        raise ScenarioError(f"operator.{k}", "unknown key")
    out = {"kind": kind}
    if kind == "sweeping_box":
        lo, up = _vector(op["lower"], "operator.lower"), _vector(op["upper"], "operator.upper")
        if lo.size != up.size:
            raise ScenarioError("operator.upper", "bounds have different lengths")
        if np.any(lo > up):
            raise ScenarioError("operator.upper", "need lower <= upper")
        out["lower"], out["upper"] = lo.tolist(), up.tolist()
        for k in ("shift", "lower_offset", "upper_offset"):
            val = op.get(k)
            out[k] = None if val is None else _knots(_signal(val, f"operator.{k}", lo.size))
        return out, lo.size, None
    if kind == "scalar_graph_diag":
        graphs = op["graphs"]
        if not isinstance(graphs, list) or not graphs:
            raise ScenarioError("operator.graphs", "expected a nonempty list")
        canon = []
        for i, g in enumerate(graphs):
            if not isinstance(g, dict):
                raise ScenarioError(f"operator.graphs[{i}]", "expected an object")
            try:
                canon.append(graph_from_dict(g).to_dict())
            except (ValueError, KeyError, TypeError) as exc:
                raise ScenarioError(f"operator.graphs[{i}]", str(exc)) from None
        out["graphs"] = canon
        return out, len(canon), None
    A = _matrix(op["A"], "operator.A")
    n = A.shape[0]
    if A.shape != (n, n):
        raise ScenarioError("operator.A", "must be square")
    B = _matrix(op["B"], "operator.B")
    if B.shape[0] != n:
        raise ScenarioError("operator.B", f"must have {n} rows")
    m = B.shape[1]
    C = _matrix(op["C"], "operator.C")
    if C.shape != (m, n):
        raise ScenarioError("operator.C", f"must be {m}x{n}")
    D = _matrix(op["D"], "operator.D")
    if D.shape != (m, m):
        raise ScenarioError("operator.D", f"must be {m}x{m}")
    out.update(A=_rows(A), B=_rows(B), C=_rows(C), D=_rows(D))
    return out, n, m


def scenario_from_dict(data, h=None, gate=True) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("$", "a scenario is a JSON object")
    for k in REQUIRED:
        if k not in data:
            raise ScenarioError(k, "missing key")
    for k in data:
        if k not in KEYS:
            raise ScenarioError(k, "unknown key")
    name = data["name"]
    if not isinstance(name, str) or not name:
        raise ScenarioError("name", "expected a nonempty string")
    horizon = _number(data["horizon"], "horizon")
    if horizon <= 0:
        raise ScenarioError("horizon", "must be positive")
    x0 = _vector(data["x0"], "x0")
    operator, n, m = _parse_operator(data["operator"])
    if x0.size != n:
        raise ScenarioError("x0", f"expected dimension {n}, got {x0.size}")

    f = None
    if data.get("lipschitz_f") is not None:
        lf = data["lipschitz_f"]
        if not isinstance(lf, dict) or set(lf) != {"G", "g"}:
            raise ScenarioError("lipschitz_f", "expected an object with keys G and g")
        G, g = _matrix(lf["G"], "lipschitz_f.G"), _vector(lf["g"], "lipschitz_f.g")
        if G.shape != (n, n) or g.size != n:
            raise ScenarioError("lipschitz_f", f"expected an {n}x{n} map")
        f = AffineMap(G, g)
    u = None if data.get("input_u") is None else _signal(data["input_u"], "input_u", n)
    v = None
    if data.get("signal_v") is not None:
        if m is None:
            raise ScenarioError("signal_v", "only LCS operators take signal_v")
        v = _signal(data["signal_v"], "signal_v", m)
    phi = None if data.get("phi") is None else _signal(data["phi"], "phi", 1)
    if phi is not None and np.any(np.diff(phi.values[:, 0]) < 0):
        raise ScenarioError("phi", "must be nondecreasing")
    sigma = None
    if data.get("sigma") is not None:
        sigma = _number(data["sigma"], "sigma")
        if sigma < 0:
            raise ScenarioError("sigma", "must be nonnegative")

    sc = Scenario(name, horizon, x0, operator, f, u, v, phi, sigma)
    if m is not None and h is not None:
        nA = float(np.linalg.norm(np.array(operator["A"]), 2))
        if nA > 0 and h >= 0.5 / nA:
            warnings.warn(f"h = {h:g} is not below 0.5/||A|| = {0.5 / nA:g}", RuntimeWarning,
                          stacklevel=3)
    if gate:
        sc.operator_spec()
    return sc


def parse_scenario(text, h=None, gate=True) -> Scenario:
    """Parse and validate a JSON scenario; LCS operators pass the hypothesis gate."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError("$", f"invalid JSON: {exc}") from None
    return scenario_from_dict(data, h=h, gate=gate)


def serialize_scenario(sc: Scenario) -> str:
    return json.dumps(sc.to_dict(), indent=2)


def builtin_text(name) -> str:
    if name not in BUILTINS:
        raise ScenarioError("name", f"unknown built-in scenario {name!r}")
    return resources.files("evoinc").joinpath("scenarios", f"{name}.json").read_text()


def load_scenario(ref, h=None, gate=True) -> Scenario:
    """Load by built-in name or file path."""
    path = Path(ref)
    if path.is_file():
        return parse_scenario(path.read_text(), h=h, gate=gate)
    if ref in BUILTINS:
        return parse_scenario(builtin_text(ref), h=h, gate=gate)
    raise ScenarioError("$", f"no scenario file or built-in named {ref!r}")


# ---------------------------------------------------------------------------
# commands


def _fmt(x) -> str:
    return "[" + ", ".join(f"{v:.12g}" for v in np.atleast_1d(x)) + "]"


def _config(args, h):
    return SolverConfig(h=h, mode=args.mode, project_x0=getattr(args, "project_x0", False))


def cmd_solve(args) -> int:
    sc = load_scenario(args.scenario, h=args.h)
    h = args.h or sc.horizon / 1000
    start = time.perf_counter()
    traj = solve(sc.operator_spec(), sc.x0, sc.horizon, _config(args, h))
    elapsed = time.perf_counter() - start
    print(f"scenario: {sc.name}")
    print(f"h: {h:g}")
    print(f"steps: {traj.partition.size}")
    print(f"x(T): {_fmt(traj.final)}")
    exact = oracle.closed_form(sc)
    if exact is not None:
        err = max(float(np.linalg.norm(exact(t) - x)) for t, x in zip(traj.times, traj.states))
        print(f"closed_form_error: {err:.6e}")
    print(f"runtime_s: {elapsed:.3f}")
    if args.out:
        traj.to_csv(args.out)
        print(f"wrote: {args.out}")
    return EXIT_OK


def cmd_refine(args) -> int:
    sc = load_scenario(args.scenario, h=args.h0)
    if args.levels < 2:
        raise ScenarioError("--levels", "need at least 2 levels")
    rep = refine_study(sc.operator_spec(), sc.x0, sc.horizon, args.h0, args.levels,
                       cfg=_config(args, args.h0), exact=oracle.closed_form(sc))
    print(f"scenario: {sc.name}")
    for line in rep.lines():
        print(line)
    return EXIT_OK


def cmd_lcp(args) -> int:
    try:
        data = json.loads(Path(args.problem).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError("$", f"invalid JSON: {exc}") from None
    if not isinstance(data, dict) or set(data) != {"q", "M"}:
        raise ScenarioError("$", "an LCP file has exactly the keys q and M")
    q = _vector(data["q"], "q")
    raw = data["M"]
    if isinstance(raw, list) and raw and not isinstance(raw[0], list):
        M = _vector(raw, "M")
        if M.size != q.size ** 2:
            raise ScenarioError("M", f"row-major M needs {q.size ** 2} entries")
        M = M.reshape(q.size, q.size)
    else:
        M = _matrix(raw, "M")
    if M.shape != (q.size, q.size):
        raise ScenarioError("M", f"expected a {q.size}x{q.size} matrix")
    prob = lcp.LcpProblem(q, M)
    if not prob.is_psd():
        raise ScenarioError("M", "matrix is not positive semi-definite")
    sol = lcp.solve_lcp(prob)
    print(f"status: {sol.status}")
    print(f"pivots: {sol.pivots}")
    if not sol.solved:
        rep = lcp.dual_cone_membership(q, M)
        print(f"separator: {_fmt(rep.certificate)} (q^T d = {rep.value:.6g})")
        return EXIT_NUMERICAL
    print(f"z: {_fmt(sol.z)}")
    print(f"w: {_fmt(sol.w)}")
    print(f"residual: {sol.residual:.3e}")
    print(f"least_norm_z: {_fmt(lcp.least_norm_solution(prob))}")
    return EXIT_OK


def cmd_passivity(args) -> int:
    sc = load_scenario(args.scenario, gate=False)
    rep = hypothesis_report(sc.lcs_system(), sc.gate_times())
    print(f"scenario: {sc.name}")
    print(rep.summary())
    return EXIT_OK if rep.overall else EXIT_HYPOTHESIS


def cmd_probe(args) -> int:
    sc = load_scenario(args.scenario)
    grid = np.linspace(0.0, sc.horizon, args.grid + 1)
    rep = oracle.assumption_probe(sc.operator_spec(), grid, samples=args.samples, seed=args.seed,
                                  phi=sc.phi, sigma=sc.sigma, which=[args.assumption])
    print(f"scenario: {sc.name}")
    for line in rep.lines():
        print(line)
    return EXIT_HYPOTHESIS if rep.falsified else EXIT_OK


def cmd_certify(args) -> int:
    sc = load_scenario(args.scenario, h=args.h)
    if sc.phi is None or sc.sigma is None:
        raise ScenarioError("phi", "certify needs declared phi and sigma")
    cert = bound_certificate(float(np.linalg.norm(sc.x0)), sc.phi, sc.sigma, sc.horizon)
    traj = solve(sc.operator_spec(), sc.x0, sc.horizon, _config(args, args.h))
    rep = certify_run(traj, cert)
    print(f"scenario: {sc.name}")
    print(f"alpha: {cert.alpha:.12g}  r_alpha: {cert.r_alpha:.12g}")
    print(f"beta: {cert.beta:.12g}")
    print(f"gamma: {cert.gamma:.12g}  r_gamma: {cert.r_gamma:.12g}")
    print("psi_knots: " + ", ".join(f"({t:g}, {p:.12g})"
                                    for t, p in zip(cert.psi.times, cert.psi.values[:, 0])))
    print(f"max_norm: {rep.max_norm:.12g}")
    print(f"norm_violations: {len(rep.norm_violations)}")
    print(f"increment_violations: {len(rep.increment_violations)}")
    if not rep.ok:
        print(f"first_violation: {rep.first_violation}")
        return EXIT_HYPOTHESIS
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="evoinc", description="Time stepping for evolution inclusions.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="integrate a scenario")
    s.add_argument("scenario")
    s.add_argument("--h", type=float)
    s.add_argument("--mode", choices=("semi_implicit", "picard"), default="semi_implicit")
    s.add_argument("--project-x0", action="store_true")
    s.add_argument("--out")
    s.set_defaults(run=cmd_solve)

    s = sub.add_parser("refine", help="granularity refinement study")
    s.add_argument("scenario")
    s.add_argument("--h0", type=float, required=True)
    s.add_argument("--levels", type=int, default=4)
    s.add_argument("--mode", choices=("semi_implicit", "picard"), default="semi_implicit")
    s.set_defaults(run=cmd_refine)

    s = sub.add_parser("lcp", help="solve an LCP file {q, M}")
    s.add_argument("problem")
    s.set_defaults(run=cmd_lcp)

    s = sub.add_parser("passivity", help="hypothesis report of an LCS scenario")
    s.add_argument("scenario")
    s.set_defaults(run=cmd_passivity)

    s = sub.add_parser("probe", help="falsification probe for one assumption")
    s.add_argument("scenario")
    s.add_argument("--assumption", choices=("a1", "a2", "a3", "a4"), required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--samples", type=int, default=64)
    s.add_argument("--grid", type=int, default=20, help="number of grid intervals")
    s.set_defaults(run=cmd_probe)

    s = sub.add_parser("certify", help="check a run against its bound certificate")
    s.add_argument("scenario")
    s.add_argument("--h", type=float, required=True)
    s.add_argument("--mode", choices=("semi_implicit", "picard"), default="semi_implicit")
    s.set_defaults(run=cmd_certify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    for name in ("h", "h0"):
        val = getattr(args, name, None)
        if val is not None and not val > 0:
            print(f"error: --{name} must be positive", file=sys.stderr)
            return EXIT_VALIDATION
    try:
        return args.run(args)
    except HypothesisError as exc:
        print(f"hypothesis failure: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (StepError, PicardError, DomainViolation, ProjectionError, lcp.PivotLimitError,
            lcp.InfeasibleLcpError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ScenarioError, DomainError, ValueError, OSError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
