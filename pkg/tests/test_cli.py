import json

import pytest

from conftest import MODELS
from hwmi.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_solve_json(capsys):
    code, out, _ = run(capsys, "solve", str(MODELS / "broken.hwmi"), "--format", "json")
    rec = json.loads(out)[0]
    assert code == 0 and rec["method"] == "exact" and abs(rec["value"] - 0.027523) < 1e-6


def test_solve_finds_bundled_model_by_name(capsys):
    code, out, _ = run(capsys, "solve", "examples/broken.hwmi")
    assert code == 0 and "0.0275226306" in out


def test_dump_ground(capsys):
    code, out, _ = run(capsys, "solve", str(MODELS / "machine.halpl"), "--dump-ground")
    assert code == 0
    assert "(t|h > 30, normal[t|h](27,5))::conS(t > 30) :- h." in out


def test_counting_semiring(capsys):
    code, out, _ = run(capsys, "solve", "--semiring", "counting", str(MODELS / "broken.hwmi"), "--format", "json")
    assert json.loads(out)[0]["value"] == 5


def test_compile_writes_circuit(tmp_path, capsys):
    path = tmp_path / "c.nnf"
    code, _, err = run(capsys, "compile", str(MODELS / "broken.hwmi"), "-o", str(path), "--var-order", "lex")
    assert code == 0 and path.read_text().startswith("ddnnf ") and "ok" in err


def test_check_agrees(capsys):
    code, out, _ = run(capsys, "check", str(MODELS / "broken.hwmi"), "--oracle-samples", "200000")
    assert code == 0 and "agree" in out


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.hwmi"
    bad.write_text("var real t ~ normal(0, 1);\nformula q := (t > 1;\n")
    assert run(capsys, "solve", str(bad))[0] == 1
    overlap = tmp_path / "o.halpl"
    overlap.write_text("0.5::h. 0.5::c. normal(0,1)::t :- h. normal(1,1)::t :- c. "
                       "q :- valS(t,T), conS(T>0). query(q).")
    assert run(capsys, "solve", str(overlap))[0] == 2
    assert run(capsys, "solve", "bench/click_graph.halpl", "--timeout-ms", "50")[0] == 3


def test_deterministic_output_given_seed(tmp_path, capsys):
    m = tmp_path / "mc.hwmi"
    m.write_text("var real x ~ normal(0,1); var real y ~ normal(0,1); var real z ~ normal(0,1);\n"
                 "formula q := x + y + z^2 < 1; query q;")
    a = json.loads(run(capsys, "solve", str(m), "--format", "json", "--seed", "3")[1])[0]
    b = json.loads(run(capsys, "solve", str(m), "--format", "json", "--seed", "3")[1])[0]
    assert a["method"] == "monte-carlo" and a["value"] == b["value"]


def test_bench_single_shot(capsys):
    code, out, _ = run(capsys, "bench", "--runs", "1", "--only", "TwoCoins", "AddFun/max", "--format", "json",
                       "--oracle-samples", "100000")
    rows = json.loads(out)
    assert code == 0 and [r["name"] for r in rows] == ["TwoCoins", "AddFun/max"]
    assert [r["domain"] for r in rows] == ["D", "H"] and all(r["runs"] == 1 for r in rows)
