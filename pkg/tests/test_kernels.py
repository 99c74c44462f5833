import numpy as np
import pytest

from hwmi import kernels
from hwmi.kernels import Tape, eval_tape
from hwmi.model import parse_model

SRC = """var bool a ~ bernoulli(0.5); var bool b ~ bernoulli(0.5);
var real x ~ normal(0, 1); var real y ~ uniform(-1, 1);
formula q := (a & x > 0.2) | (!b -> y^2 + x < 0.5) | (a <-> x^(1/2) > 0.3) | x^(1/3) < -0.5;
query q;"""


def _data(n=5000, seed=0):
    rng = np.random.default_rng(seed)
    return rng.random((n, 2)) < 0.5, np.column_stack([rng.normal(size=n), rng.uniform(-1, 1, n)])


def test_numpy_matches_reference():
    m = parse_model(SRC)
    tape = Tape(m.formulas["q"], {"a": 0, "b": 1}, {"x": 0, "y": 1})
    B, R = _data()
    ref = eval_tape(tape, B, R, "python")
    assert np.array_equal(eval_tape(tape, B, R, "numpy"), ref)


@pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba unavailable")
def test_numba_matches_reference():
    m = parse_model(SRC)
    tape = Tape(m.formulas["q"], {"a": 0, "b": 1}, {"x": 0, "y": 1})
    B, R = _data()
    assert np.array_equal(eval_tape(tape, B, R, "numba"), eval_tape(tape, B, R, "python"))


def test_reference_matches_formula_semantics():
    from hwmi.formula import eval_formula

    m = parse_model(SRC)
    f = m.formulas["q"]
    tape = Tape(f, {"a": 0, "b": 1}, {"x": 0, "y": 1})
    B, R = _data(300, 1)
    out = eval_tape(tape, B, R, "python")
    for i in range(300):
        v = {"a": bool(B[i, 0]), "b": bool(B[i, 1]), "x": float(R[i, 0]), "y": float(R[i, 1])}
        assert out[i] == eval_formula(f, v)


def test_constant_tape_without_columns():
    from hwmi.formula import TRUE

    tape = Tape(TRUE, {}, {})
    out = eval_tape(tape, np.zeros((4, 0), bool), np.zeros((4, 0)), "numpy")
    assert out.tolist() == [True] * 4
