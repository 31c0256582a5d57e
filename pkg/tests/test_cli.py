import json
import subprocess
import sys

import pytest

from branching_mera.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, main, pauli_operator
from branching_mera.errors import InvalidInputError


def run(capsys, *argv):
    rc = main(list(argv))
    out = capsys.readouterr()
    return rc, out.out, out.err


def test_verify_passes(capsys):
    rc, out, _ = run(capsys, "verify")
    assert rc == EXIT_OK
    assert out.strip().endswith("checks passed") and "FAIL" not in out


def test_verify_failure_exit_code(capsys, monkeypatch):
    import branching_mera.verify as verify
    monkeypatch.setattr(verify, "CHECKS", [("broken", lambda: (False, "forced"))])
    rc, out, _ = run(capsys, "verify")
    assert rc == EXIT_NUMERICAL and "FAIL broken" in out


def test_entropy_scan_deterministic(tmp_path, capsys):
    args = ["entropy-scan", "--T", "6", "--seed", "3", "--seeds", "2", "--offsets", "2",
            "--workers", "1"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(capsys, *args, "--out", str(a))[0] == EXIT_OK
    assert run(capsys, *args, "--out", str(b))[0] == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    meta = json.loads(a.read_text().splitlines()[0][2:])
    assert meta["spec"]["seed"] == 3 and meta["spec"]["gate_mode"] == "random_gaussian"


def test_fit_command(tmp_path, capsys):
    csv = tmp_path / "c.csv"
    run(capsys, "entropy-scan", "--T", "6", "--seeds", "2", "--offsets", "2", "--workers", "1",
        "--L", "2,4,8,16,32", "--out", str(csv))
    rc, out, _ = run(capsys, "fit", str(csv))
    assert rc == EXIT_OK
    rep = json.loads(out)
    assert set(rep["forms"]) == {"const", "log", "log2", "linear"}
    assert rep["selected"] in rep["forms"] and rep["constants_included"]


def test_expval_identity(capsys):
    rc, out, _ = run(capsys, "expval", "--T", "4", "--gate-mode", "identity", "--op", "ZII")
    assert rc == EXIT_OK
    res = json.loads(out)
    assert res["value"] == pytest.approx(1.0, abs=1e-14)
    assert res["spec"]["T"] == 4 and res["spec"]["gate_mode"] == "identity"


def test_inline_flags_override_spec_file(tmp_path, capsys):
    spec = tmp_path / "s.json"
    spec.write_text(json.dumps({"T": 3, "seed": 1, "gate_mode": "random_haar"}))
    rc, out, _ = run(capsys, "energy", "--spec", str(spec), "--seed", "7", "--h", "0.5")
    assert rc == EXIT_OK
    res = json.loads(out)
    assert res["spec"]["seed"] == 7 and res["spec"]["T"] == 3
    assert res["hamiltonian"]["h"] == 0.5


def test_tree_implies_depth(capsys):
    rc, out, _ = run(capsys, "expval", "--tree", "2,1,2", "--op", "XXI", "--site", "2")
    assert rc == EXIT_OK and json.loads(out)["spec"]["T"] == 3


def test_optimize_writes_trace(tmp_path, capsys):
    out_file = tmp_path / "trace.jsonl"
    rc, out, _ = run(capsys, "optimize", "--T", "2", "--max-steps", "2", "--out", str(out_file))
    assert rc == EXIT_OK
    lines = [json.loads(l) for l in out_file.read_text().splitlines()]
    assert "spec" in lines[0] and lines[0]["max_steps"] == 2
    energies = [r["energy"] for r in lines[1:]]
    assert energies == sorted(energies, reverse=True)
    assert json.loads(out)["gates_unitary"] is True


@pytest.mark.parametrize("argv", [
    ["expval", "--T", "3", "--op", "ZZ"],
    ["expval", "--T", "3", "--op", "ZII", "--site", "99"],
    ["energy", "--T", "3", "--tree", "2,2"],
    ["energy", "--spec", "/nonexistent.json"],
    ["fit", "/nonexistent.csv"],
    ["entropy-scan", "--T", "4", "--L", "64"],
    ["nonsense"],
])
def test_usage_errors(argv, capsys):
    assert run(capsys, *argv)[0] == EXIT_USAGE


def test_pauli_words():
    assert pauli_operator("xyz").shape == (8, 8)
    with pytest.raises(InvalidInputError):
        pauli_operator("XQZ")


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "branching_mera", "expval", "--T", "2",
                        "--gate-mode", "identity", "--op", "ZZI"], capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["value"] == pytest.approx(1.0)
