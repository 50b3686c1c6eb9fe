import copy
import json
import subprocess
import sys

import numpy as np
import pytest

from evoinc.passivity import HypothesisError
from evoinc.scenario_cli import (BUILTINS, KEYS, ScenarioError, builtin_text, load_scenario,
                                 main, parse_scenario, scenario_from_dict, serialize_scenario)


def builtin(name):
    return json.loads(builtin_text(name))


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def field(out, key):
    for line in out.splitlines():
        if line.startswith(key + ":"):
            return line.split(":", 1)[1].strip()
    raise KeyError(key)


# -- parsing -----------------------------------------------------------------

@pytest.mark.parametrize("name", BUILTINS)
def test_builtins_round_trip_and_pass_gate(name):
    sc = load_scenario(name)
    assert set(json.loads(serialize_scenario(sc))) == set(KEYS)
    assert parse_scenario(serialize_scenario(sc)) == sc
    sc.operator_spec()


def test_example1_has_expected_matrices():
    sc = load_scenario("example1_ramp")
    sys_ = sc.lcs_system()
    assert (sys_.n, sys_.m) == (1, 2)
    assert np.array_equal(sys_.A, [[0.0]]) and np.array_equal(sys_.B, [[0.0, 1.0]])
    assert np.array_equal(sys_.C, sys_.B.T)
    assert np.array_equal(sys_.D, [[0.0, 1.0], [-1.0, 0.0]])
    assert np.allclose(sc.signal_v(0.5), [-0.5, 0.0])


def test_gate_times_include_signal_knots():
    assert np.allclose(load_scenario("example1_paper_v").gate_times(), [0, 0.25, 0.75, 1])


@pytest.mark.parametrize("mutate, path", [
    (lambda d: d.pop("x0"), "x0"),
    (lambda d: d.update(extra=1), "extra"),
    (lambda d: d.update(horizon=-1.0), "horizon"),
    (lambda d: d.update(horizon="1"), "horizon"),
    (lambda d: d.update(x0=[1.0, 2.0]), "x0"),
    (lambda d: d["operator"].update(kind="cone"), "operator.kind"),
    (lambda d: d["operator"].pop("D"), "operator.D"),
    (lambda d: d["operator"].update(C=[[1.0, 0.0]]), "operator.C"),
    (lambda d: d.update(signal_v=[[0.0, [1.0]]]), "signal_v"),
    (lambda d: d.update(phi=[[0.0, [1.0]], [1.0, [0.0]]]), "phi"),
    (lambda d: d.update(sigma=-1.0), "sigma"),
    (lambda d: d.update(lipschitz_f={"G": [[1.0]]}), "lipschitz_f"),
    (lambda d: d.update(input_u=[[1.0, [0.0]], [0.0, [1.0]]]), "input_u"),
])
def test_schema_errors_name_the_key(mutate, path):
    data = copy.deepcopy(builtin("example1_ramp"))
    mutate(data)
    with pytest.raises(ScenarioError) as err:
        scenario_from_dict(data)
    assert err.value.path == path


def test_graph_errors_name_the_index():
    data = builtin("relay_feedback")
    data["operator"]["graphs"][1] = {"type": "relay", "a": 1.0, "b": -1.0}
    with pytest.raises(ScenarioError, match=r"operator\.graphs\[1\]"):
        scenario_from_dict(data)


def test_invalid_json():
    with pytest.raises(ScenarioError, match="invalid JSON"):
        parse_scenario("{")


def test_gate_failure_carries_report():
    data = builtin("example1_ramp")
    data["operator"]["D"] = [[0.0, 1.0], [-1.0, -1.0]]
    with pytest.raises(HypothesisError) as err:
        scenario_from_dict(data)
    assert not err.value.report.d_psd
    scenario_from_dict(data, gate=False)


def test_step_guard_warning():
    data = builtin("diode_bridge")
    with pytest.warns(RuntimeWarning, match="0.5/"):
        scenario_from_dict(data, h=0.6)


# -- commands ------------------------------------------------------------------

def test_solve_example1(capsys, tmp_path):
    out_csv = tmp_path / "traj.csv"
    code, out, _ = run(capsys, "solve", "example1_ramp", "--h", "0.01", "--out", str(out_csv))
    assert code == 0
    assert abs(float(field(out, "x(T)").strip("[]")) - 1.5) <= 5e-3
    assert float(field(out, "closed_form_error")) == pytest.approx(0.005, rel=1e-6)
    rows = out_csv.read_text().splitlines()
    assert rows[0] == "t,x_1,z_1,z_2" and len(rows) == 102


def test_solve_default_step_and_scenario_file(capsys, tmp_path):
    path = tmp_path / "g.json"
    path.write_text(builtin_text("gradient_flow"))
    code, out, _ = run(capsys, "solve", str(path))
    assert code == 0 and field(out, "steps") == "1000"


def test_solve_outside_domain_and_projection(capsys, tmp_path):
    data = builtin("sweeping_interval")
    data["x0"] = [5.0]
    path = tmp_path / "s.json"
    path.write_text(json.dumps(data))
    code, _, err = run(capsys, "solve", str(path), "--h", "0.1")
    assert code == 2 and "distance" in err
    code, out, _ = run(capsys, "solve", str(path), "--h", "0.1", "--project-x0")
    assert code == 0


def test_solve_picard_mode(capsys):
    code, out, _ = run(capsys, "solve", "relay_feedback", "--h", "0.01", "--mode", "picard")
    assert code == 0


def test_solve_numerical_failure(capsys):
    # hL >= 0.5 in picard mode
    code, _, err = run(capsys, "solve", "relay_feedback", "--h", "0.5", "--mode", "picard")
    assert code == 4 and "numerical failure" in err


def test_validation_exit_codes(capsys):
    assert run(capsys, "solve", "no_such_scenario")[0] == 2
    assert run(capsys, "solve", "gradient_flow", "--h", "-1")[0] == 2
    assert run(capsys, "certify", "relay_feedback", "--h", "0.1")[0] == 2
    assert run(capsys, "passivity", "gradient_flow")[0] == 2
    assert run(capsys, "refine", "gradient_flow", "--h0", "0.1", "--levels", "1")[0] == 2


def test_hypothesis_exit_code(capsys, tmp_path):
    data = builtin("example1_ramp")
    data["operator"]["D"] = [[0.0, 1.0], [-1.0, -1.0]]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(data))
    code, _, err = run(capsys, "solve", str(path))
    assert code == 3 and "d_psd: False" in err
    code, out, _ = run(capsys, "passivity", str(path))
    assert code == 3 and "overall: False" in out


def test_refine_sweeping(capsys):
    # the kink at t = 1 must fall between grid points, else every level is exact
    code, out, _ = run(capsys, "refine", "sweeping_interval", "--h0", "0.3", "--levels", "4")
    assert code == 0
    orders = [float(line.split("order = ")[1].split(",")[0]) for line in out.splitlines()
              if "order = " in line]
    assert len(orders) == 2 and all(0.7 <= o <= 1.3 for o in orders)


def test_lcp_command(capsys, tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps({"q": [-1.0, 1.0], "M": [[2.0, 0.0], [0.0, 1.0]]}))
    code, out, _ = run(capsys, "lcp", str(path))
    assert code == 0 and field(out, "status") == "solved"
    assert field(out, "z") == "[0.5, 0]"
    path.write_text(json.dumps({"q": [-1.0, 1.0], "M": [2.0, 0.0, 0.0, 1.0]}))
    assert run(capsys, "lcp", str(path))[0] == 0


@pytest.mark.parametrize("problem, code", [
    ({"q": [-1.0], "M": [[0.0]]}, 4),
    ({"q": [1.0, 1.0], "M": [[0.0, 1.0], [0.0, -1.0]]}, 2),
    ({"q": [1.0], "M": [[1.0]], "x": 1}, 2),
    ({"q": [1.0, 0.0], "M": [1.0, 0.0, 0.0]}, 2),
])
def test_lcp_command_failures(capsys, tmp_path, problem, code):
    path = tmp_path / "p.json"
    path.write_text(json.dumps(problem))
    got, out, _ = run(capsys, "lcp", str(path))
    assert got == code
    if code == 4:
        assert field(out, "status") == "infeasible" and "separator" in out


def test_passivity_command(capsys):
    code, out, _ = run(capsys, "passivity", "diode_bridge")
    assert code == 0 and "overall: True" in out and "domain_motion" in out


def test_probe_command(capsys):
    code, out, _ = run(capsys, "probe", "sweeping_interval", "--assumption", "a2", "--seed", "3")
    assert code == 0 and field(out, "seed") == "3" and "A2 domain motion: holds" in out
    again = run(capsys, "probe", "sweeping_interval", "--assumption", "a2", "--seed", "3")[1]
    assert again == out


def test_probe_falsified_exit(capsys, tmp_path):
    data = builtin("gradient_flow")
    data["sigma"] = 0.1
    path = tmp_path / "g.json"
    path.write_text(json.dumps(data))
    code, out, _ = run(capsys, "probe", str(path), "--assumption", "a3")
    assert code == 3 and "VIOLATED" in out


def test_certify_command(capsys, tmp_path):
    code, out, _ = run(capsys, "certify", "sweeping_interval", "--h", "0.01")
    assert code == 0
    assert field(out, "norm_violations") == "0" and field(out, "increment_violations") == "0"
    # alpha = |x0| + 2, beta = alpha + 2
    assert field(out, "beta") == "5"
    data = builtin("sweeping_interval")
    data["phi"] = [[0.0, [0.0]], [2.0, [0.1]]]
    path = tmp_path / "s.json"
    path.write_text(json.dumps(data))
    code, out, _ = run(capsys, "certify", str(path), "--h", "0.01")
    assert code == 3 and "first_violation" in out


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "evoinc.scenario_cli", "solve", "gradient_flow",
                           "--h", "0.1"], capture_output=True, text=True)
    assert proc.returncode == 0 and "x(T)" in proc.stdout
