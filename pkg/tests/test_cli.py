import json
import subprocess
import sys

import numpy as np
import pytest

from hybrid_cqed import PRESET_NAMES
from hybrid_cqed.cli import G2_COLUMNS, RESPONSE_COLUMNS, STEADY_COLUMNS, emit_csv, run


def _read(path):
    text = open(path, encoding="utf-8").read()
    lines = text.splitlines()
    manifest = {}
    for ln in lines:
        if ln.startswith("# "):
            key, _, value = ln[2:].partition(": ")
            manifest[key] = value
    body = [ln for ln in lines if not ln.startswith("#")]
    return manifest, body


def test_presets_lists_all(capsys):
    assert run(["presets"]) == 0
    out = capsys.readouterr().out
    for name in PRESET_NAMES:
        assert name in out
    assert len(out.strip().splitlines()) == len(PRESET_NAMES)


def test_steady_row(tmp_path):
    out = tmp_path / "s.csv"
    assert run(["steady", "--preset", "fig2", "--variant", "iii", "--out", str(out)]) == 0
    manifest, body = _read(out)
    assert body[0] == ",".join([*STEADY_COLUMNS, "flag"])
    assert len(body) == 2
    assert json.loads(manifest["config"])["system"]["g_qubit"] == pytest.approx(2 * np.pi * 41.7e6)


def test_response_fig2_rows_and_determinism(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["response", "--preset", "fig2", "--variant", "iii", "--method", "both"]
    assert run([*argv, "--out", str(a)]) == 0
    assert run([*argv, "--out", str(b)]) == 0
    ma, body_a = _read(a)
    _, body_b = _read(b)
    assert body_a[0] == ",".join([*RESPONSE_COLUMNS, "flag"])
    assert len(body_a) == 2002
    assert body_a == body_b
    dev = np.array([float(r.split(",")[8]) for r in body_a[1:]])
    assert np.all(dev <= 1e-9)
    assert ma["subcommand"] == "response"


def test_manifest_rerun(tmp_path):
    first = tmp_path / "first.csv"
    argv = ["response", "--preset", "fig3", "--variant", "ii", "--grid", "35e6,30e6,51"]
    assert run([*argv, "--out", str(first)]) == 0
    manifest, body = _read(first)
    cfg = tmp_path / "run.yaml"
    cfg.write_text(manifest["config"], encoding="utf-8")
    second = tmp_path / "second.csv"
    assert run(["--config", str(cfg), "response", "--grid", "35e6,30e6,51", "--out", str(second)]) == 0
    assert _read(second)[1] == body


def test_g2_csv(tmp_path):
    out = tmp_path / "g.csv"
    assert run(["g2", "--preset", "fig6", "--tau", "2e-6,200", "--out", str(out)]) == 0
    _, body = _read(out)
    assert body[0] == ",".join([*G2_COLUMNS, "flag"])
    assert len(body) == 201
    g2 = np.array([float(r.split(",")[1]) for r in body[1:]])
    assert np.all(np.isfinite(g2))


def test_g2_log_tau_and_temperature(tmp_path):
    out = tmp_path / "g.csv"
    assert run(["g2", "--preset", "fig5", "--variant", "i", "--tau", "1e-5,11,log", "--temperature", "0.1", "--out", str(out)]) == 0
    manifest, body = _read(out)
    tau = [float(r.split(",")[0]) for r in body[1:]]
    assert tau[0] == 0 and tau[-1] == pytest.approx(1e-5) and len(tau) == 11
    assert json.loads(manifest["config"])["drive"]["temperature"] == 0.1


def test_emit_header_only(tmp_path):
    out = tmp_path / "e.csv"
    emit_csv([], ("a", "b"), str(out), {"tool": "x"})
    assert open(out).read() == "# tool: x\na,b,flag\n"


def test_emit_nan_flag(tmp_path):
    out = tmp_path / "n.csv"
    emit_csv([(1.0, float("nan")), (0.1, 2)], ("a", "b"), str(out), flags=["SingularSystemError: x, y", ""])
    lines = open(out).read().splitlines()
    assert lines[1] == "1,nan,SingularSystemError: x; y"
    assert lines[2] == "0.10000000000000001,2,"


def test_emit_schema_mismatch(tmp_path):
    with pytest.raises(ValueError):
        emit_csv([(1.0,)], ("a", "b"), str(tmp_path / "x.csv"))


def test_exit_codes(tmp_path, capsys):
    assert run([]) == 2
    assert run(["steady"]) == 2  # neither --preset nor --config
    assert run(["steady", "--preset", "fig9"]) == 2
    assert run(["response", "--preset", "fig2", "--grid", "1,2"]) == 2
    assert run(["g2", "--preset", "fig2", "--tau", "-1,5"]) == 2
    assert run(["response", "--preset", "fig2", "--method", "nope"]) == 2
    err = capsys.readouterr().err
    assert "usage" in err
    # unwritable output is a runtime error
    assert run(["steady", "--preset", "fig2", "--out", str(tmp_path / "missing" / "x.csv")]) == 1
    assert "cannot write" in capsys.readouterr().err


def test_physics_error_exit(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text(
        "angular: false\n"
        "system: {omega_cavity: 5.0e9, omega_qubit: 4.0e9, omega_mech: 8.5e6, gamma_cavity: 0.5e6,\n"
        "         gamma_qubit: 1.0e6, gamma_mech: 0.0, mass: 2.0e-15, chi: 2.8e-14, g_qubit: 0.0}\n"
        "drive: {omega_drive: 4.99e9, big_omega: 3.1e6}\n",
        encoding="utf-8",
    )
    # gamma_m = 0 with the grid point exactly at omega_m: flagged NaN row, not a crash
    out = tmp_path / "r.csv"
    assert run(["--config", str(cfg), "response", "--grid", "8.5e6,1e4,3", "--out", str(out)]) == 0
    _, body = _read(out)
    mid = body[2].split(",")
    assert mid[2] == "nan" and mid[-1].startswith("DegenerateParameterError")


def test_chi_flags(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["--chi-literal", "steady", "--preset", "fig2", "--out", str(a)]) == 0
    assert run(["--chi-two-pi", "steady", "--preset", "fig2", "--out", str(b)]) == 0
    ca = json.loads(_read(a)[0]["config"])["system"]["chi"]
    cb = json.loads(_read(b)[0]["config"])["system"]["chi"]
    assert cb == pytest.approx(2 * np.pi * ca)


def test_console_script_entry():
    res = subprocess.run([sys.executable, "-m", "hybrid_cqed.cli", "presets"], capture_output=True, text=True)
    assert res.returncode == 0 and "fig6" in res.stdout
