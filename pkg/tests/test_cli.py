import io
import json

import pytest

from conftest import MUL_UDIV, SUITE
from peepre.cli import main
from peepre.dsl import load, parse_predicate

GUARDED = "C1 != 0 && C1 u>= C2 && C2 /u C1 != 0"


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out)
    return code, out.getvalue()


@pytest.fixture
def opt_file(tmp_path):
    path = tmp_path / "mul_udiv.opt"
    path.write_text(MUL_UDIV)
    return path


def test_infer_prints_weakest(opt_file, tmp_path):
    report = tmp_path / "report.json"
    code, out = run("infer", str(opt_file), "--widths", "4", "--seed", "7", "--json", str(report))
    assert code == 0
    assert "status: Weakest" in out
    data = json.loads(report.read_text())
    assert data["status"] == "Weakest"
    parse_predicate(data["weakest"])


def test_verify_exit_codes(opt_file, tmp_path):
    assert run("verify", str(opt_file), "--widths", "4", "--pre", GUARDED)[0] == 0
    with_pre = tmp_path / "with_pre.opt"
    with_pre.write_text(f"Pre: {GUARDED}\n" + MUL_UDIV.split("\n", 1)[1])
    code, out = run("verify", str(with_pre), "--widths", "4,8")
    assert (code, out.strip()) == (0, "rewrite: valid")
    code, out = run("verify", str(opt_file), "--widths", "4")
    assert code == 1 and "counterexample" in out


def test_compare_prints_witness(opt_file, tmp_path):
    a = tmp_path / "a.pre"
    a.write_text("true\n")
    code, out = run("compare", str(a), "C1 != 0", "--opt", str(opt_file), "--widths", "4")
    assert code == 0
    assert "C1=i4 0" in out
    code, out = run("compare", "C1 u< C2", "C1 u< C2", "--opt", str(opt_file), "--widths", "4")
    assert code == 0 and out.startswith("no witness")


def test_generalize_output_reparses(tmp_path):
    json_path = tmp_path / "g.json"
    code, out = run("generalize", str(SUITE / "concrete" / "and_and.opt"), "--json", str(json_path))
    assert code == 0
    opt = load(out)
    assert opt.consts == ["C1", "C2"]
    assert json.loads(json_path.read_text())["results"][0]["values"] == {"C1": 7, "C2": 3}


def test_search_on_valid_rewrite(tmp_path):
    path = tmp_path / "valid.opt"
    path.write_text("%a = add %x, C1\n%r = sub %a, C1\n=>\n%r = %x\n")
    code, out = run("search", str(path), "--widths", "4")
    assert code == 0 and "weakest: true" in out


@pytest.mark.parametrize("argv", [
    ["verify", "missing.opt"],
    ["frobnicate"],
    ["infer", "x.opt", "--widths", "0"],
])
def test_usage_errors(argv):
    assert run(*argv)[0] == 2


def test_parse_error_exit(tmp_path):
    bad = tmp_path / "bad.opt"
    bad.write_text("%r = add %x\n=>\n%r = %x\n")
    assert run("verify", str(bad))[0] == 2


def test_timeout_exit():
    code, out = run("search", str(SUITE / "add_nsw_icmp.opt"), "--widths", "4", "--timeout", "0.5")
    assert code == 3 and "status: Timeout" in out
