import csv
import io
import json
import subprocess
import sys

import pytest

from seqctx import canonical
from seqctx.cli import CSV_COLUMNS, main
from seqctx.scenario_io import scenario_from_dict, scenario_to_dict


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize(
    "module", ["core-algebra", "measurement", "optimizer", "cli"]
)
def test_verify_single_module_passes(capsys, module):
    code, out, _ = run(capsys, "verify", "--module", module)
    assert code == 0
    assert out.strip().splitlines()[-1].endswith("checks passed")
    assert all(f" {module}: " in line for line in out.splitlines()[:-1])


def test_verify_all_lists_failures(capsys):
    # the two three-qubit closed-form checks cannot pass on the compiled scenario
    code, out, _ = run(capsys, "verify", "--all", "--quiet")
    assert code == 1
    failures = [line for line in out.splitlines() if line.startswith("FAIL")]
    assert len(failures) == 2
    assert all("contextuality:" in line and "residual" in line for line in failures)
    assert out.splitlines()[-1].endswith("2 failed")


def test_verify_json(capsys):
    code, out, _ = run(capsys, "verify", "--module", "core-algebra", "--format", "json")
    data = json.loads(out)
    assert code == 0 and data["failed"] == 0 and data["passed"] == len(data["checks"])


def test_verify_bad_module(capsys):
    code, _, err = run(capsys, "verify", "--module", "nope")
    assert code == 2 and "unknown module" in err


def test_bad_flag_exits_two(capsys):
    with pytest.raises(SystemExit) as info:
        main(["violation", "--scheme", "zz"])
    assert info.value.code == 2


@pytest.mark.parametrize(
    "dim, scheme, value",
    [(4, "db", "3.41421356"), (4, "dp", "2.82842712"), (8, "dp", "2.82842712"), (8, "db", "3.41421356")],
)
def test_violation_text(capsys, dim, scheme, value):
    code, out, _ = run(capsys, "violation", "--dim", str(dim), "--scheme", scheme)
    assert code == 0
    assert f"value          {value}" in out
    assert "<A4A1>" in out


def test_violation_json_carries_full_precision(capsys):
    code, out, _ = run(capsys, "violation", "--dim", "4", "--scheme", "db", "--format", "json")
    data = json.loads(out)
    assert data["value"] == pytest.approx(2 ** 0.5 + 2, abs=1e-15)
    assert data["k"] == 4 and data["witness_min_dim"] == 4
    assert set(data["terms"]) == {"A1A2", "A2A3", "A3A4", "A4A1"}


def test_violation_csv_columns(capsys):
    code, out, _ = run(capsys, "violation", "--dim", "8", "--scheme", "dp", "--format", "csv")
    rows = list(csv.reader(io.StringIO(out)))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert rows[1] == ["8", "DP", "2", "2.82842712", "2.00000000", "2.82842712", "4"]


def test_coarse_projectors_under_db_give_coarse_value(capsys):
    code, out, _ = run(capsys, "violation", "--dim", "4", "--scheme", "db", "--projectors", "coarse", "--quiet")
    assert code == 0 and out.strip() == "2.82842712"


@pytest.mark.parametrize(
    "argv, fragment",
    [
        (["violation", "--dim", "16"], "no canonical scenario"),
        (["violation"], "--dim"),
        (["violation", "--dim", "4", "--projectors", "rank1"], "coarse"),
    ],
)
def test_violation_usage_errors(capsys, argv, fragment):
    code, _, err = run(capsys, *argv)
    assert code == 2 and fragment in err


def test_violation_from_scenario_file(capsys, tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps(scenario_to_dict(canonical.canonical_scenario(2))))
    code, out, _ = run(capsys, "violation", "--scenario", str(path), "--scheme", "db", "--quiet")
    assert code == 0 and out.strip() == "3.41421356"


def test_corrupted_scenario_file(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"n_qubits": 2, "observables": ["XX", "ZY"')
    code, _, err = run(capsys, "violation", "--scenario", str(path))
    assert code == 2 and "invalid JSON" in err


def test_db_without_families(capsys, tmp_path):
    path = tmp_path / "plain.json"
    path.write_text(json.dumps({"n_qubits": 2, "observables": ["XX", "ZY", "XZ", "YY"]}))
    code, _, err = run(capsys, "violation", "--scenario", str(path), "--scheme", "db")
    assert code == 2 and "refining" in err


def test_witness_table(capsys):
    code, out, _ = run(capsys, "witness", "--max-n", "4")
    lines = out.strip().splitlines()
    assert code == 0 and len(lines) == 5
    assert [line.split() for line in lines[1:]] == [
        ["4", "3.41421356"],
        ["8", "3.70710678"],
        ["16", "3.85355339"],
        ["inf", "4.00000000"],
    ]


@pytest.mark.parametrize(
    "value, expected", [("3.5", "d >= 8"), ("2.8284271247461903", "d >= 4"), ("1.9", "none")]
)
def test_witness_value(capsys, value, expected):
    code, out, _ = run(capsys, "witness", "--value", value)
    assert code == 0 and out.startswith(expected)


def test_witness_beyond_maximum(capsys):
    code, _, err = run(capsys, "witness", "--value", "5")
    assert code == 2 and "algebraic maximum" in err


def test_witness_json(capsys):
    _, out, _ = run(capsys, "--format", "json", "witness", "--max-n", "3")
    rows = json.loads(out)
    assert rows[-1] == {"dim": None, "n": None, "value": 4.0}
    assert rows[0]["dim"] == 4


def test_optimize_is_byte_identical(capsys, tmp_path, monkeypatch):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    argv = ["optimize", "--dim", "2", "--restarts", "2", "--max-iters", "1400", "--seed", "7"]
    assert run(capsys, *argv, "--out", str(a))[0] == 0
    monkeypatch.setenv("CTX_SEED", "7")
    assert run(capsys, *argv[:-2], "--out", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    data = json.loads(a.read_text())
    assert data["best_value"] <= 2 + 1e-6 and data["config"]["seed"] == 7
    # the stored scenario goes back through the scenario schema
    back = scenario_from_dict(data["best_scenario"])
    assert back.dim == 2


def test_optimize_reads_stanza(capsys, tmp_path):
    path = tmp_path / "s.json"
    path.write_text(
        json.dumps(
            {
                "n_qubits": 1,
                "observables": ["Z", "Z", "Z", "Z"],
                "state": "0.5*I + 0.5*Z",
                "optimizer": {"dim": 2, "restarts": 1, "max_iters": 700, "seed": 3},
            }
        )
    )
    code, out, _ = run(capsys, "optimize", "--scenario", str(path), "--format", "json")
    data = json.loads(out)
    assert code == 0 and data["config"]["restarts"] == 1 and data["config"]["seed"] == 3


@pytest.mark.parametrize(
    "argv, fragment",
    [
        (["optimize"], "--dim"),
        (["optimize", "--dim", "3"], "power of two"),
        (["optimize", "--dim", "2", "--out", "/nonexistent/dir/x.json"], "cannot write"),
    ],
)
def test_optimize_usage_errors(capsys, argv, fragment):
    code, _, err = run(capsys, *argv)
    assert code == 2 and fragment in err


def test_bad_seed_environment(capsys, monkeypatch):
    monkeypatch.setenv("CTX_SEED", "abc")
    code, _, err = run(capsys, "optimize", "--dim", "2", "--max-iters", "0")
    assert code == 2 and "CTX_SEED" in err


def test_console_script_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "seqctx.cli", "witness", "--value", "3.5"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0 and proc.stdout.strip() == "d >= 8"
