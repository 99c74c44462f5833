from fractions import Fraction as F

import pytest

from hwmi.algebra import AlgebraicExpr, IversonBracket
from hwmi.compiler import compile_formula, smooth
from hwmi.densities import Normal
from hwmi.formula import TRUE, NraAtom, Var, WeightSpec, abstract
from hwmi.semiring import (COUNTING, DENSITY, E_PLUS, E_TIMES, PROBABILITY, TROPICAL, Binding, BindingConflict,
                           LabelError, Labeling, SemiringElement, amc_evaluate, counting_labeling,
                           density_labeling, label, oplus, otimes)

N = Normal(F(20), F(5))


def bracket(cmp, bound, positive=True):
    a = NraAtom(((F(1), "t", F(1)),), cmp, F(bound))
    return SemiringElement(AlgebraicExpr.bracket(IversonBracket.of(a, positive)), frozenset({Binding("t", N)}))


def test_boolean_labels():
    w = WeightSpec({"no_cool": F(1, 100)})
    assert label("no_cool", w) == SemiringElement(AlgebraicExpr.const(F(1, 100)))
    assert label(("no_cool", False), w) == SemiringElement(AlgebraicExpr.const(F(99, 100)))


def test_atom_labels(broken):
    m = broken.model
    prop, amap = abstract(m.formulas["broken"])
    alpha = density_labeling(m.weights, amap)
    pos = alpha("[t <= 20]", False)
    assert str(pos) == "([t>20], {t~normal(20, 5)})"
    assert str(alpha("[t <= 20]", True)) == "([t<=20], {t~normal(20, 5)})"


def test_unlabeled_literal():
    with pytest.raises(LabelError):
        density_labeling(WeightSpec())("ghost", True)


def test_oplus_builds_psi():
    part = otimes(otimes(SemiringElement(AlgebraicExpr.const(F(1, 100))), bracket(">", 20)), bracket("<=", 30))
    assert str(part.expr) == "0.01*[t>20]*[t<=30]"
    psi = oplus(part, bracket(">", 30))
    assert str(psi) == "(0.01*[t>20]*[t<=30] + [t>30], {t~normal(20, 5)})"


def test_neutral_elements():
    x = bracket(">", 20)
    assert oplus(x, E_PLUS) == x
    assert otimes(x, E_TIMES) == x
    assert otimes(x, E_PLUS) == E_PLUS


def test_neutral_sum_of_complementary_labels():
    assert oplus(bracket(">", 20), bracket(">", 20, positive=False)) == E_TIMES


def test_one_with_bindings_equals_neutral_one():
    assert SemiringElement(AlgebraicExpr.const(1), frozenset({Binding("t", N)})) == E_TIMES


def test_conflicting_bindings_rejected():
    other = SemiringElement(bracket(">", 0).expr, frozenset({Binding("t", Normal(F(0), F(1)))}))
    with pytest.raises(BindingConflict):
        otimes(bracket(">", 20), other)


def test_evaluate_broken_circuit(broken):
    m = broken.model
    prop, amap = abstract(m.formulas["broken"])
    c = compile_formula(prop)
    e = amc_evaluate(c, density_labeling(m.weights, amap))
    assert str(e) == "(0.01*[t>20]*[t<=30] + [t>30], {t~normal(20, 5)})"


def test_true_circuit_is_neutral_one():
    assert amc_evaluate(compile_formula(TRUE), density_labeling(WeightSpec())) == E_TIMES


def test_counting_plugin_on_smoothed_skeleton(broken):
    prop, _ = abstract(broken.model.formulas["broken"])
    c = smooth(compile_formula(prop))
    assert amc_evaluate(c, counting_labeling()) == 5


def test_other_semirings():
    f = Var("a") | Var("b")
    c = compile_formula(f)
    pl = Labeling.from_table({("a", True): F(1, 2), ("a", False): F(1, 2),
                              ("b", True): F(1, 4), ("b", False): F(3, 4)}, PROBABILITY)
    assert amc_evaluate(c, pl) == F(5, 8)
    tl = Labeling.from_table({("a", True): 1.0, ("a", False): 0.0, ("b", True): 2.0, ("b", False): 0.0}, TROPICAL)
    # cheapest model: a false, b true (cost 2) or a true (cost 1, b free -> 0)
    assert amc_evaluate(smooth(c), tl) == 1.0
    assert DENSITY.zero == E_PLUS and COUNTING.one == 1
