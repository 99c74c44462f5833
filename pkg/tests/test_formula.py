from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hwmi.formula import (AbstractionMap, And, Constraint, NraAtom, Not, Or, Var, VariableRegistry, WeightSpec,
                          abstract, canonicalize_atom, eval_formula, format_formula)
from hwmi.lexer import ParseError
from hwmi.model import parse_formula, parse_model

BROKEN = """
var bool no_cool ~ bernoulli(0.01);
var real t ~ normal(20, 5);
formula broken := (no_cool & (t > 20)) | (t > 30);
query broken;
"""


def atom(cmp, bound, *terms):
    return NraAtom(tuple((F(c), v, F(p)) for c, v, p in terms), cmp, F(bound))


def test_parse_broken_model():
    m = parse_model(BROKEN)
    assert list(m.registry.bools) == ["no_cool"]
    assert list(m.registry.reals) == ["t"]
    assert m.weights.bool_weights["no_cool"] == F(1, 100)
    assert str(m.weights.densities["t"]) == "normal(20, 5)"
    assert m.queries == ["broken"]
    f = m.formulas["broken"]
    assert eval_formula(f, {"no_cool": True, "t": 25})
    assert not eval_formula(f, {"no_cool": False, "t": 25})
    assert eval_formula(f, {"no_cool": False, "t": 31})


def test_constant_formula():
    m = parse_model("formula q := true;\nquery q;")
    assert m.formulas["q"].op == "const" and m.formulas["q"].payload is True
    assert not m.formulas["q"].bool_vars and not m.formulas["q"].real_vars


@pytest.mark.parametrize("src, msg", [
    ("0.2::h;\n0.2::h;", "duplicate"),
    ("var bool a ~ bernoulli(1.5);", "[0, 1]"),
    ("formula q := a;", "unknown"),
    ("var real t ~ normal(0, 1);\nformula q := t > ;", ""),
])
def test_parse_errors(src, msg):
    with pytest.raises((ParseError, ValueError)) as exc:
        parse_model(src)
    assert msg in str(exc.value)


def test_parse_error_has_position():
    with pytest.raises(ParseError) as exc:
        parse_model("var real t ~ normal(0, 1);\nformula q := (t > 1;")
    assert "2:" in str(exc.value)


def test_scaled_atoms_canonicalize_equal():
    a, pa = canonicalize_atom(atom(">", 40, (2, "t", 1)))
    b, pb = canonicalize_atom(atom(">", 20, (1, "t", 1)))
    assert (a, pa) == (b, pb)


def test_sign_flip():
    a = canonicalize_atom(atom("<", -30, (-1, "t", 1)))
    b = canonicalize_atom(atom(">", 30, (1, "t", 1)))
    assert a == b


def test_leading_coefficient_and_order():
    a, _ = canonicalize_atom(atom("<=", 3, (1, "t", 1), (F(1, 2), "r", 1)))
    assert [v for _, v, _ in a.terms] == ["r", "t"]
    assert a.terms[0][0] == 1
    assert a.comparator in ("<", "<=", "=")


def test_abstract_broken():
    f = parse_model(BROKEN).formulas["broken"]
    prop, amap = abstract(f)
    assert prop.bool_vars == {"no_cool", "[t <= 20]", "[t <= 30]"}
    assert not prop.real_vars
    assert set(amap.to_atom) == {"[t <= 20]", "[t <= 30]"}


def test_abstract_shares_equal_atoms():
    reg = VariableRegistry()
    reg.declare("t", "real")
    f = parse_formula("t > 20 | 2*t > 40", reg)
    prop, amap = abstract(f)
    assert len(amap.to_atom) == 1


def test_abstract_boolean_identity():
    f = Or(Var("a"), And(Var("b"), Not(Var("c"))))
    prop, amap = abstract(f)
    assert prop is f
    assert not amap.to_atom


def test_eval_missing_variable():
    with pytest.raises(KeyError):
        eval_formula(Var("a"), {})


def test_weight_range_checked():
    with pytest.raises(ValueError):
        WeightSpec({"a": F(3, 2)})


def test_structural_sharing():
    assert And(Var("a"), Var("b")) is And(Var("a"), Var("b"))


# --------------------------------------------------------------------------- properties

coefs = st.fractions(min_value=-5, max_value=5, max_denominator=7).filter(lambda q: q != 0)
powers = st.sampled_from([F(1), F(2), F(3), F(1, 2), F(1, 3)])
cmps = st.sampled_from(["<", "<=", ">", ">=", "=", "!="])
atoms = st.builds(lambda ts, c, b: NraAtom(tuple(ts), c, b),
                  st.lists(st.tuples(coefs, st.sampled_from(["r", "t", "u"]), powers), min_size=1, max_size=3),
                  cmps, st.fractions(min_value=-10, max_value=10, max_denominator=5))


def _merged(a):
    # atoms with the same (var, power) twice are merged by the parser; mimic that
    acc = {}
    for c, v, p in a.terms:
        acc[(v, p)] = acc.get((v, p), 0) + c
    terms = tuple((c, v, p) for (v, p), c in acc.items() if c)
    return NraAtom(terms, a.comparator, a.bound) if terms else None


@settings(max_examples=200, deadline=None)
@given(atoms, st.fractions(min_value=F(1, 9), max_value=10, max_denominator=9))
def test_canonicalize_idempotent_and_scale_invariant(a, k):
    a = _merged(a)
    if a is None:
        return
    c1, p1 = canonicalize_atom(a)
    c2, p2 = canonicalize_atom(c1)
    assert (c2, p2) == (c1, True)
    scaled = NraAtom(tuple((c * k, v, p) for c, v, p in a.terms), a.comparator, a.bound * k)
    assert canonicalize_atom(scaled) == (c1, p1)


@settings(max_examples=200, deadline=None)
@given(atoms, st.dictionaries(st.sampled_from(["r", "t", "u"]),
                              st.fractions(min_value=0, max_value=9, max_denominator=4), min_size=3))
def test_canonical_atom_preserves_truth(a, vals):
    a = _merged(a)
    if a is None:
        return
    c, pol = canonicalize_atom(a)
    assert c.holds(vals) == (a.holds(vals) == pol)


leaf_names = ["a", "b", "c"]


def formulas(depth=3):
    reg = VariableRegistry()
    for b in leaf_names:
        reg.declare(b, "bool")
    reg.declare("t", "real")
    reg.declare("u", "real")
    leaves = st.one_of(
        st.sampled_from([Var(b) for b in leaf_names]),
        st.sampled_from([parse_formula(s, reg) for s in ("t > 1", "2*t <= 4", "t + u < 3", "u^2 >= 2", "t = 2")]),
    )
    return st.recursive(leaves, lambda kids: st.one_of(
        st.builds(Not, kids),
        st.builds(lambda xs: And(*xs), st.lists(kids, min_size=2, max_size=3)),
        st.builds(lambda xs: Or(*xs), st.lists(kids, min_size=2, max_size=3)),
    ), max_leaves=8)


@settings(max_examples=200, deadline=None)
@given(formulas(), st.fixed_dictionaries({"a": st.booleans(), "b": st.booleans(), "c": st.booleans(),
                                          "t": st.fractions(-3, 5, max_denominator=2),
                                          "u": st.fractions(-3, 5, max_denominator=2)}))
def test_abstraction_soundness(f, v):
    prop, amap = abstract(f)
    induced = dict(v)
    for name, a in amap.to_atom.items():
        induced[name] = a.holds(v)
    assert eval_formula(f, v) == eval_formula(prop, induced)


@settings(max_examples=100, deadline=None)
@given(formulas())
def test_print_parse_roundtrip(f):
    reg = VariableRegistry()
    for b in leaf_names:
        reg.declare(b, "bool")
    reg.declare("t", "real")
    reg.declare("u", "real")
    assert parse_formula(format_formula(f), reg) is f
