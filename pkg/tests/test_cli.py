import json
import re
import subprocess
import sys

import pytest

from ckt_prolong import __version__, cli
from ckt_prolong.gradients import Finding
from ckt_prolong.prolong import ClosureError
from ckt_prolong.report import dumps
from ckt_prolong.young import BundleLabel


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_decompose_text(capsys):
    code, out, _ = run(capsys, "decompose", "B[2]o")
    assert code == 0
    assert "B[3]o ⊕ B[2,1]o ⊕ B[1]" in out


def test_decompose_bad_grammar(capsys):
    code, out, err = run(capsys, "decompose", "B[2,1")
    assert code == 2
    assert BundleLabel.GRAMMAR in err and out == ""


@pytest.mark.parametrize("argv", [["frobnicate"], ["decompose"], ["dims", "--n", "x", "L2"],
                                  ["oracle", "--rank", "1"], ["dims"],
                                  ["close", "--rank", "2", "--mode", "curved"]])
def test_usage_errors(capsys, argv):
    code, _, _ = run(capsys, *argv)
    assert code == 2


def test_solve_symmetry_json(capsys):
    code, out, _ = run(capsys, "solve-symmetry", "--op", "yamabe", "--order", "1", "--format", "json")
    assert code == 0
    rep = json.loads(out)
    assert rep["schema"] == 1 and rep["engine"]["version"] == __version__
    assert rep["command"][:3] == ["solve-symmetry", "--op", "yamabe"]
    assert rep["data"]["solution"]["values"] == {"A": "(n-2)/(2*n)", "B": "(n+2)/(2*n)"}
    assert rep["data"]["solution"]["status"] == "unique"
    statuses = {f["statement"]: f["status"] for f in rep["findings"]}
    assert statuses["residual vanishes with the solved coefficients"] == "verified"
    assert dumps(rep) == out


def test_findings_are_sorted(capsys):
    _, out, _ = run(capsys, "bochner", "--format", "json")
    rep = json.loads(out)
    keys = [(f["statement"], f["status"], f["ref"]) for f in rep["findings"]]
    assert keys == sorted(keys)
    disc = [f for f in rep["findings"] if f["status"] == "paper-discrepancy"]
    assert disc and all("paper" in f["payload"] or "reading" in f["payload"] for f in disc)


GLOBAL_FIRST = ["--format", "json", "decompose", "L2"]


def test_global_flags_before_the_command(capsys):
    code, out, _ = run(capsys, *GLOBAL_FIRST)
    assert code == 0 and json.loads(out)["data"]["summands"] == ["B[2,1]o", "L3", "B[1]"]


@pytest.mark.parametrize("argv", [
    ["decompose", "B[2,1]o", "--n", "5"], ["dims", "L2", "B[2]o", "--n", "4"],
    ["dims", "--rank", "1"], ["tree", "--rank", "1"], ["gradient", "B[2]o", "B[3]o"],
    ["close", "--rank", "1", "--mode", "curved"], ["oracle", "--rank", "1", "--n", "3"],
])
def test_json_round_trip(capsys, argv):
    code, out, _ = run(capsys, *argv, "--format", "json")
    assert code == 0
    assert dumps(json.loads(out)) == out


DOUBLE_SCRIPT = re.compile(r"([_^])\{(?:[^{}]|\{[^{}]*\})*\}\1")


@pytest.mark.parametrize("argv", [
    ["decompose", "B[2]o"], ["dims", "--rank", "1"], ["tree", "--rank", "1"],
    ["gradient", "B[2]o", "B[2,1]o"], ["bochner"], ["close", "--rank", "1", "--mode", "curved"],
    ["solve-symmetry", "--op", "yamabe", "--order", "1"],
])
def test_latex_is_standalone(capsys, argv):
    code, out, _ = run(capsys, *argv, "--format", "latex")
    assert code == 0
    assert out.startswith("\\documentclass") and out.rstrip().endswith("\\end{document}")
    assert all(ord(c) < 128 for c in out)
    assert "$$" not in out
    assert out.count("{") == out.count("}")
    assert out.count("\\begin{") == out.count("\\end{")
    assert not DOUBLE_SCRIPT.search(out)


def test_out_file(capsys, tmp_path):
    path = tmp_path / "r.json"
    code, out, _ = run(capsys, "decompose", "B[1]", "--format", "json", "--out", str(path))
    assert code == 0 and out == ""
    assert json.loads(path.read_text(encoding="utf-8"))["data"]["count"] == 3


def test_refuted_finding_exits_one(capsys, monkeypatch):
    def fake(args):
        return [Finding("broken", "refuted", "test")], {}, "", ""
    monkeypatch.setitem(cli.COMMANDS, "bochner", fake)
    code, out, _ = run(capsys, "bochner")
    assert code == 1 and "[refuted] broken" in out


def test_paper_discrepancy_is_not_a_failure(capsys, monkeypatch):
    def fake(args):
        return [Finding("differs", "paper-discrepancy", "test", {"paper": "x", "engine": "y"})], {}, "", ""
    monkeypatch.setitem(cli.COMMANDS, "bochner", fake)
    code, out, _ = run(capsys, "bochner")
    assert code == 0 and "paper: x" in out


def test_closure_failure_exits_three(capsys, monkeypatch):
    def boom(rank, mode="flat"):
        raise ClosureError("no closure")
    monkeypatch.setattr(cli, "close_system", boom)
    code, _, err = run(capsys, "close", "--rank", "1")
    assert code == 3 and "no closure" in err


def test_oracle_fit(capsys):
    code, out, _ = run(capsys, "oracle", "--n", "4", "--fit", "order1", "--format", "json")
    assert code == 0
    assert json.loads(out)["data"]["fit"]["values"] == {"A": "1/4", "B": "3/4"}


def test_verify_all_subset(capsys):
    code, out, _ = run(capsys, "verify-all", "--criteria", "1", "2")
    assert code == 0
    assert re.search(r"criterion  1 .* pass", out) and re.search(r"criterion  2 .* pass", out)


def test_module_entry_point():
    p = subprocess.run([sys.executable, "-m", "ckt_prolong", "decompose", "L0"],
                       capture_output=True, text=True)
    assert p.returncode == 0 and "B[1]" in p.stdout
