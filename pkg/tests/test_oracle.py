from fractions import Fraction as F

import pytest

from hwmi.formula import FALSE, And, Not, Or, Var, WeightSpec
from hwmi.model import parse_model
from hwmi.oracle import OracleLimit, enumerate_amc, enumerate_probability, mc_program, mc_wmi
from hwmi.semiring import COUNTING, DENSITY, PROBABILITY, E_PLUS, Labeling, counting_labeling

A1, A2 = Var("[t <= 20]"), Var("[t <= 30]")


def test_count_skeleton_by_enumeration():
    f = Or(And(Var("no_cool"), Not(A1)), Not(A2))
    assert enumerate_amc(f, counting_labeling(), COUNTING) == 5


def test_probability_inclusion_exclusion():
    pa, pb = F(1, 3), F(3, 7)
    lab = Labeling(lambda v, pos: {"a": pa, "b": pb}[v] if pos else 1 - {"a": pa, "b": pb}[v], PROBABILITY)
    assert enumerate_amc(Var("a") | Var("b"), lab, PROBABILITY) == pa + pb - pa * pb
    assert enumerate_amc(Var("a") & Var("b"), lab, PROBABILITY) == pa * pb


def test_unsat_gives_additive_neutral():
    assert enumerate_amc(Var("a") & Not(Var("a")), counting_labeling(), COUNTING) == 0
    assert enumerate_amc(FALSE, counting_labeling(), DENSITY) is E_PLUS


def test_enumeration_cap():
    f = And(*(Var(f"v{i}") for i in range(23)))
    with pytest.raises(OracleLimit):
        enumerate_amc(f, counting_labeling(), COUNTING)


def test_true_formula():
    m = parse_model("formula q := true; query q;")
    est = mc_wmi(m, 1000, 0)
    assert (est.estimate, est.std_error) == (1.0, 0.0)


def test_contradiction():
    m = parse_model("var real t ~ normal(20, 5); formula q := t > 30 & t <= 30; query q;")
    assert mc_wmi(m, 10_000, 0).estimate == 0.0


def test_broken_estimate(broken):
    est, se = mc_wmi(broken.model, 1_000_000, 42)
    assert abs(est - 0.0275226306287) < 4 * se


def test_seed_determinism(broken, machine):
    assert mc_wmi(broken.model, 100_000, 9).estimate == mc_wmi(broken.model, 100_000, 9).estimate
    assert mc_program(machine.ground, 100_000, 9).estimate == mc_program(machine.ground, 100_000, 9).estimate
    assert mc_wmi(broken.model, 100_000, 9).estimate != mc_wmi(broken.model, 100_000, 10).estimate


def test_chunking_does_not_change_small_runs(broken):
    # the first chunk of a longer run is the whole of a one-chunk run
    from hwmi import oracle

    n = oracle.CHUNK
    a = mc_wmi(broken.model, n, 5).estimate
    b = mc_wmi(broken.model, 2 * n, 5).estimate
    c = mc_wmi(broken.model, n, 5).estimate
    assert a == c and 0 <= b <= 1


def test_discrete_sampling_converges_to_enumeration():
    src = """var bool a ~ bernoulli(0.3); var bool b ~ bernoulli(0.6); var bool c ~ bernoulli(0.1);
             formula q := (a | b) & !(b & c) | (c -> a) & !b; query q;"""
    m = parse_model(src)
    exact = enumerate_probability(m.formulas["q"], m.weights)
    est, se = mc_wmi(m, 400_000, 1)
    assert abs(est - float(exact)) < 3 * se


def test_evidence_ratio():
    m = parse_model("""var bool a ~ bernoulli(0.5); var bool b ~ bernoulli(0.5);
                       formula q := a; evidence !(a & b); query q;""")
    assert enumerate_probability(m.formulas["q"], m.weights, m.evidence) == F(1, 3)
    est, se = mc_wmi(m, 400_000, 2)
    assert abs(est - 1 / 3) < 3 * se


def test_program_sampler_matches_mixture(machine):
    from test_hal import machine_mixture

    est, se = mc_program(machine.ground, 1_000_000, 4)
    assert abs(est - machine_mixture()) < 4 * se


def test_oracle_streams_differ_from_integrator_streams():
    import numpy as np

    from hwmi.oracle import _rng

    ours = _rng(3, 0).random(4)
    theirs = np.random.Generator(np.random.Philox(key=np.array([3, 0], dtype=np.uint64))).random(4)
    assert not np.array_equal(ours, theirs)
