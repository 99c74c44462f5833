from fractions import Fraction as F

import pytest
from scipy import stats

from conftest import GOLDEN, MODELS
from hwmi.formula import Var
from hwmi.hal.ground import check_mutual_exclusivity, ground
from hwmi.hal.parser import HalSemanticError, parse_program
from hwmi.hal.reduce import CyclicProgramError, ExclusivityError, program_to_model, reduce_to_formula
from hwmi.lexer import ParseError
from hwmi.oracle import enumerate_program
from hwmi.pipeline import load_text, solve_query

MACHINE = (MODELS / "machine.halpl").read_text()


def machine_mixture():
    def part(mu):
        d = stats.norm(mu, 5)
        return 0.01 * (d.cdf(30) - d.cdf(20)) + d.sf(30)

    return 0.8 * part(20) + 0.2 * part(27)


def test_parse_machine_program():
    p = parse_program(MACHINE)
    assert len(p.facts) == 2
    assert len(p.distributional) == 2
    assert len([c for c in p.rules if c.head.pred == "broken"]) == 2
    assert [str(q) for q in p.queries] == ["broken"]


def test_plain_problog_parses():
    p = parse_program("0.5::a. q :- a. query(q).")
    assert len(p.facts) == 1 and len(p.rules) == 1


@pytest.mark.parametrize("src", [
    "q :- valS(t, T), conS(T > 1, Y).",
    "q :- valS(t).",
    "q :- conS().",
])
def test_builtin_arity_errors(src):
    with pytest.raises((ParseError, HalSemanticError)):
        parse_program(src)


def test_syntax_error():
    with pytest.raises(ParseError):
        parse_program("0.5::a")


def test_ground_machine_matches_golden():
    g = ground(parse_program(MACHINE))
    expected = (GOLDEN / "machine_ground.txt").read_text().splitlines()
    assert sorted(g.dump().splitlines()) == sorted(expected)
    assert len(g.cons_clauses) == 4
    assert {v.name for v in g.values["t"]} == {"t|h", "t|\\+h"}


def test_unconditional_definition_gives_empty_guard():
    g = ground(parse_program("normal(0,1)::t. q :- valS(t,T), conS(T>1). r :- valS(t,T), conS(T<0). query(q)."))
    assert len(g.cons_clauses) == 2
    assert all(c.body == () for c in g.cons_clauses)
    assert [v.name for v in g.values["t"]] == ["t"]


def test_grounding_count_is_product_of_guard_counts():
    src = """
    0.5::a. 0.5::b.
    normal(0,1)::x :- a.  normal(1,1)::x :- \\+a.
    normal(0,2)::y :- b.  normal(2,1)::y :- \\+b.  uniform(0,1)::y2 :- b.
    q :- valS(x,X), valS(y,Y), conS(X + Y > 1).
    query(q).
    """
    g = ground(parse_program(src))
    assert len(g.cons_clauses) == 2 * 2


def test_unbound_condition_variable():
    with pytest.raises(HalSemanticError):
        ground(parse_program("normal(0,1)::t. q :- conS(T > 1). query(q)."))


def test_undefined_continuous_variable():
    with pytest.raises(HalSemanticError, match="never defined"):
        ground(parse_program("q :- valS(t,T), conS(T > 1). query(q)."))


def test_valS_without_conS_is_rejected():
    with pytest.raises(HalSemanticError):
        ground(parse_program("normal(0,1)::t. q :- valS(t,T). query(q)."))


def test_exclusivity_reports():
    ok = ground(parse_program(MACHINE))
    assert check_mutual_exclusivity(ok).ok
    bad = ground(parse_program("""0.5::h. 0.5::no_cool.
        normal(20,5)::t :- h.  normal(27,5)::t :- h, no_cool.
        q :- valS(t,T), conS(T > 1). query(q)."""))
    rep = check_mutual_exclusivity(bad)
    assert not rep.ok and rep.violations[0][0] == "t"
    single = ground(parse_program("normal(0,1)::t :- h. 0.5::h. q :- valS(t,T), conS(T>0). query(q)."))
    assert check_mutual_exclusivity(single).ok


def test_overlapping_guards_refused_by_reduction():
    g = ground(parse_program("""0.5::h. 0.5::c.
        normal(20,5)::t :- h.  normal(27,5)::t :- c.
        q :- valS(t,T), conS(T > 1). query(q)."""))
    with pytest.raises(ExclusivityError):
        program_to_model(g)


def test_machine_reduces_to_guard_mixture():
    lm = load_text(MACHINE, "halpl")
    r = solve_query(lm.model, "broken")
    assert r.result.method == "exact"
    assert abs(r.value - machine_mixture()) < 1e-9


def test_noisy_or_completion():
    g = ground(parse_program("0.5::a. 0.5::b. q :- a. q :- b. query(q)."))
    f, w, _ = reduce_to_formula(g, "q")
    assert f is (Var("a") | Var("b"))
    assert float(solve_query(program_to_model(g), "q").value) == 0.75


def test_single_constraint_reduction():
    g = ground(parse_program("normal(20,5)::t. q :- valS(t,T), conS(T > 30). query(q)."))
    f, w, guards = reduce_to_formula(g, "q")
    assert f.atoms and len(f.atoms) == 1 and str(f) == "t > 30"
    assert guards["t"].guard.op == "const"


def test_cycles_rejected():
    g = ground(parse_program("0.5::a. p :- q. q :- p. p :- a. query(p)."))
    with pytest.raises(CyclicProgramError):
        program_to_model(g)


def test_probabilistic_rules_and_evidence():
    src = "0.3::alice. 0.03::gun :- alice. 0.8::gun :- \\+alice. evidence(gun). query(alice)."
    lm = load_text(src, "halpl")
    r = solve_query(lm.model, "alice")
    assert r.result.exact.rational() == F(9, 569) == enumerate_program(lm.ground)


def test_logic_variables_ground_over_facts():
    src = """person(ann). person(bob).
    0.5::smokes(X) :- person(X).
    0.2::cancer(X) :- smokes(X).
    any :- cancer(X).
    query(any)."""
    lm = load_text(src, "halpl")
    r = solve_query(lm.model, "any")
    p = 0.5 * 0.2
    assert abs(r.value - (1 - (1 - p) ** 2)) < 1e-12
    assert r.result.exact.rational() == enumerate_program(lm.ground)
