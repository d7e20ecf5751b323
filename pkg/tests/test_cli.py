import json
import subprocess
import sys

import pytest

from et14.cli import bundled_path, main
from et14.state import MultiplierState


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def summary(out_dir):
    data = json.loads((out_dir / "summary.json").read_text())
    data.pop("timestamp")
    return data


def test_verify_bundled_passes(tmp_path, capsys):
    code, _, err = run(["verify", "--samples", "8", "--out", str(tmp_path)], capsys)
    assert code == 0, err
    s = summary(tmp_path)
    assert s["pass"] and s["command"] == "verify"
    names = {c["name"] for c in s["checks"]}
    assert {"galilean_h", "galilean_phi", "compatibility", "x_space_system", "solved_form_x1",
            "solved_form_x2", "lambda_derivatives", "compatibility_witness"} <= names
    assert "PASS" in err and (tmp_path / "rows.jsonl").exists()


def test_verify_eta_to_stdout(capsys):
    code, out, _ = run(["verify", "--form", "eta", "--samples", "5"], capsys)
    assert code == 0
    assert json.loads(out)["pass"] is True


def test_tampered_closure_fails(tmp_path, capsys):
    code, _, err = run(["verify", "--closure", str(bundled_path("tampered_q1.json")), "--samples", "5",
                        "--out", str(tmp_path)], capsys)
    assert code == 1
    assert "galilean_h" in err
    failed = [c for c in summary(tmp_path)["checks"] if not c["pass"]]
    assert any(c["name"] == "galilean_h" for c in failed)


def test_usage_errors(tmp_path, capsys):
    code, _, err = run(["verify", "--samples", "0"], capsys)
    assert code == 2 and "empty sample set" in err
    assert run(["verify", "--closure", str(tmp_path / "missing.json")], capsys)[0] == 2
    with pytest.raises(SystemExit) as exc:
        main(["verify", "--format", "xml"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
    assert run(["verify", "--workers", "0"], capsys)[0] == 2


def test_non_symmetric_state_is_rejected(tmp_path, capsys):
    state = MultiplierState.from_vector([0.1] * 14).to_json()
    state["lambda_ij"] = [[1, 2, 0], [0, 1, 0], [0, 0, 1]]
    path = tmp_path / "state.json"
    path.write_text(json.dumps(state))
    code, _, err = run(["verify", "--state", str(path)], capsys)
    assert code == 2 and "symmetric" in err


def test_single_state_file(tmp_path, capsys):
    path = tmp_path / "state.json"
    path.write_text(json.dumps(MultiplierState.from_vector([0.3, 0.1, -0.2, 0.4, 0.5, -0.3, 0.2, 0.1,
                                                            0.05, -0.15, 0.6, 0.2, -0.4, 0.8]).to_json()))
    code, _, _ = run(["verify", "--state", str(path), "--out", str(tmp_path / "o")], capsys)
    assert code == 0


def test_convexity_commands(tmp_path, capsys):
    code, _, err = run(["convexity", "--out", str(tmp_path / "a")], capsys)
    assert code == 0, err
    code, _, err = run(["convexity", "--reproduce-form5-failure", "--out", str(tmp_path / "b")], capsys)
    assert code == 0, err
    checks = summary(tmp_path / "b")["checks"]
    assert all(c["pass"] for c in checks if c["name"] == "x_form_failure")
    code, _, err = run(["convexity", "--scan-K", "count=3", "degree=2", "--out", str(tmp_path / "c")], capsys)
    assert code == 0, err
    assert run(["convexity", "--scan-K", "count=x"], capsys)[0] == 2
    assert run(["convexity", "--scan-K", "count=0"], capsys)[0] == 2


def test_reduce_and_subsystem(tmp_path, capsys):
    code, _, err = run(["reduce", "--samples", "20", "--seed", "3", "--out", str(tmp_path / "r")], capsys)
    assert code == 0, err
    code, _, err = run(["subsystem", "--samples", "10", "--out", str(tmp_path / "s")], capsys)
    assert code == 0, err
    facts = {c["name"]: c for c in summary(tmp_path / "s")["checks"]}
    assert facts["restricted_eta5_bracket"]["pass"] and facts["restricted_h_vanishes"]["pass"]


def test_csv_rows(tmp_path, capsys):
    code, _, _ = run(["verify", "--samples", "3", "--format", "csv", "--out", str(tmp_path)], capsys)
    assert code == 0
    text = (tmp_path / "rows.csv").read_text()
    assert text.splitlines()[0].startswith("check,")


def test_outputs_are_deterministic_across_workers(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["verify", "--samples", "6", "--seed", "5", "--out", str(a)], capsys)[0] == 0
    assert run(["verify", "--samples", "6", "--seed", "5", "--workers", "2", "--out", str(b)], capsys)[0] == 0
    assert summary(a) == summary(b)
    assert (a / "rows.jsonl").read_bytes() == (b / "rows.jsonl").read_bytes()


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "et14.cli", "subsystem", "--samples", "3"],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["command"] == "subsystem"
