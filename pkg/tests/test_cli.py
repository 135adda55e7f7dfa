from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import pytest

from valstab.cli import InputError, main, parse_eps_list, parse_range
from valstab.ratgeom import parse_rational


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def snapshot(d: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_report_f1(capsys, tmp_path):
    code, out, _ = run(capsys, "report", "F1", "-K", "(0,1)", "--out", str(tmp_path))
    assert code == 0
    assert "-4/3" in out and "28/3" in out
    data = json.loads((tmp_path / "report.json").read_text())
    assert data["values"]["beta_direct"] == "-4/3"
    assert data["values"]["beta_over_S"] == "-1/7"
    assert data["profile"]["breakpoints"] == ["0/1", "2/1"]
    cfg = json.loads((tmp_path / "config.json").read_text())
    assert cfg["subcommand"] == "report" and cfg["inputs"]["divisor"] == "-K"
    assert (tmp_path / "report.txt").read_text() == out


def test_report_negative_valuation(capsys):
    code, out, _ = run(capsys, "report", "F1", "-K", "-e2")
    assert code == 0 and "4/3" in out


def test_report_big_not_ample(capsys):
    code, out, _ = run(capsys, "report", "F1", "2E+f", "e2")
    assert code == 0 and "not ample" in out


def test_report_input_errors(capsys, tmp_path):
    assert run(capsys, "report", "F1", "H", "e1")[0] == 2
    assert run(capsys, "report", "F1", "-K", "(2,2)")[0] == 2
    assert run(capsys, "report", "P1xP1", "H1", "e1")[0] == 2  # not big
    assert run(capsys, "report", str(tmp_path / "missing.json"), "H", "e1")[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{\n  \"rank\": 2,\n  oops\n}")
    code, _, err = run(capsys, "report", str(bad), "H", "e1")
    assert code == 2 and "line 3" in err


def test_argparse_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["report", "F1"])
    assert exc.value.code == 2
    capsys.readouterr()


def test_check_suite(capsys, tmp_path):
    code, out, _ = run(capsys, "check", "P2", "--suite", "norm-relations", "--suite", "fano",
                       "--samples", "10", "--seed", "3", "--out", str(tmp_path))
    assert code == 0
    assert out.count("PASS") == 2
    data = json.loads((tmp_path / "check.json").read_text())
    assert [r["name"] for r in data] == ["norm-relations", "fano"]
    assert run(capsys, "check", "P2", "--suite", "nope")[0] == 2


def test_scan_outputs(capsys, tmp_path):
    code, out, _ = run(capsys, "scan", "F1", "--base", "-K", "--dir1", "f", "--dir2", "C",
                       "--b-range", "-1/2:1/2", "--grid", "2", "--budget", "2",
                       "--out", str(tmp_path))
    assert code == 0
    assert "9/9 ample grid points" in out
    assert {p.name for p in tmp_path.iterdir()} == {"scan.csv", "scan.json", "scan.matrix", "config.json"}
    data = json.loads((tmp_path / "scan.json").read_text())
    assert data["continuity"]["homogeneity_ok"]


def test_scan_modulus_violation_exit_1(capsys):
    code, _, _ = run(capsys, "scan", "F1", "--base", "-K", "--dir1", "f", "--dir2", "C",
                     "--b-range", "-1/2:1/2", "--grid", "2", "--budget", "1", "--modulus", "0")
    assert code == 1


def test_scan_resume(capsys, tmp_path):
    args = ["scan", "F1", "--base", "-K", "--dir1", "f", "--grid", "4", "--budget", "1",
            "--resume", "--out", str(tmp_path)]
    assert run(capsys, *args)[0] == 0
    first = snapshot(tmp_path)
    assert "scan.jsonl" in first
    assert run(capsys, *args)[0] == 0
    assert snapshot(tmp_path) == first


def test_scan_misses_ample_cone(capsys):
    code, _, err = run(capsys, "scan", "P1xP1", "--base", "H1", "--dir1", "H1", "--a-range", "0:1",
                       "--grid", "2", "--budget", "1")
    assert code == 2 and "ample" in err


def test_perturb(capsys, tmp_path):
    code, out, _ = run(capsys, "perturb", "F1", "-K", "--direction", "f", "--eps", "1/64,1/32,1/16",
                       "--budget", "2", "--out", str(tmp_path))
    assert code == 0
    assert out.count("PASS") == 3
    data = json.loads((tmp_path / "perturb.json").read_text())
    assert data["modulus"][0]["monotone"] and data["modulus"][0]["transfer_ok"]
    cfg = json.loads((tmp_path / "config.json").read_text())
    assert cfg["eps"] == ["1/64", "1/32", "1/16"]


def test_perturb_bad_eps(capsys):
    assert run(capsys, "perturb", "F1", "-K", "--eps", "0")[0] == 2


@pytest.mark.parametrize("argv", [
    ["report", "P1xP1", "H1+2H2", "(1,1)"],
    ["check", "F1", "--suite", "beta-forms", "--samples", "5", "--seed", "7"],
    ["scan", "F1", "--base", "-K", "--dir1", "f", "--dir2", "C", "--b-range", "-1/2:1/2",
     "--grid", "2", "--budget", "1"],
    ["perturb", "P2", "3H", "--eps", "1/16,1/32", "--budget", "1"],
])
def test_reruns_are_byte_identical(capsys, tmp_path, argv):
    out = tmp_path / "run"
    assert run(capsys, *argv, "--out", str(out))[0] == 0
    first = snapshot(out)
    assert run(capsys, *argv, "--out", str(out))[0] == 0
    assert snapshot(out) == first


def test_console_script_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "valstab.cli", "report", "P2", "3H", "e1"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and "18" in res.stdout


def test_helpers():
    assert parse_eps_list("2^-4..2^-6") == [parse_rational(x) for x in ("1/16", "1/32", "1/64")]
    assert parse_eps_list("1/3, 1/4") == [parse_rational("1/3"), parse_rational("1/4")]
    assert parse_range("-1/2:1") == (parse_rational("-1/2"), 1)
    with pytest.raises(InputError):
        parse_range("1")
