import math
from fractions import Fraction as F

import numpy as np
import pytest
from scipy import stats

from hwmi.algebra import ONE, AlgebraicExpr, IversonBracket
from hwmi.closedform import ClosedForm
from hwmi.densities import Beta, Normal, PiecewisePolynomial, Uniform
from hwmi.formula import NraAtom, Not
from hwmi.integrate import Integrand, IntegrationError, IntegrationTimeout, WmiResult, attach_densities, integrate
from hwmi.model import parse_model
from hwmi.pipeline import WorldProbability, solve_query
from hwmi.semiring import Binding, SemiringElement


def br(cmp, bound, *terms, positive=True):
    a = NraAtom(tuple((F(c), v, F(p)) for c, v, p in terms), cmp, F(bound))
    return AlgebraicExpr.bracket(IversonBracket.of(a, positive))


def t_(cmp, bound, var="t", power=1, positive=True):
    return br(cmp, bound, (1, var, power), positive=positive)


N20 = Normal(F(20), F(5))


def test_broken_integrand_closed_form():
    psi = F(1, 100) * t_(">", 20) * t_("<=", 30) + t_(">", 30)
    r = integrate(Integrand(psi, {"t": N20}))
    assert r.method == "exact" and r.error_bound == 0
    assert str(r.exact) == "199/200 - 99/100*Phi(2)"
    direct = 0.01 * (stats.norm.cdf(2) - 0.5) + (1 - stats.norm.cdf(2))
    assert abs(r.value - direct) < 1e-12


def test_uniform_normalizes():
    r = integrate(Integrand(ONE, {"t": Uniform(F(0), F(1))}))
    assert r.exact.rational() == 1
    r = integrate(Integrand(t_("<", F(1, 2)) + t_(">=", F(1, 2)), {"t": Uniform(F(0), F(1))}))
    assert r.exact.rational() == 1


def test_x_greater_than_y_uniform():
    e = br(">", 0, (1, "x", 1), (-1, "y", 1))
    r = integrate(Integrand(e, {"x": Uniform(F(0), F(1)), "y": Uniform(F(0), F(1))}))
    assert r.method == "exact" and r.exact.rational() == F(1, 2)


def test_polytope_with_polynomial_densities():
    tri = PiecewisePolynomial(((F(0), F(1), (F(0), F(2))),))  # density 2x on [0, 1]
    e = br("<", 1, (1, "x", 1), (1, "y", 1))
    r = integrate(Integrand(e, {"x": tri, "y": Uniform(F(0), F(1))}))
    # P(x + y < 1) = int_0^1 2x (1 - x) dx = 1/3
    assert r.exact.rational() == F(1, 3)


def test_beta_interval_mass():
    r = integrate(Integrand(t_(">", F(1, 2), "p"), {"p": Beta(F(2), F(5))}))
    assert abs(r.value - stats.beta(2, 5).sf(0.5)) < 1e-12


def test_nonlinear_univariate_uses_quadrature():
    r = integrate(Integrand(t_(">", 27000, power=3), {"t": N20}))
    assert r.method == "quadrature"
    assert abs(r.value - stats.norm(20, 5).sf(30)) < 1e-9


def test_gaussian_multivariate_goes_numeric():
    e = br("<", 1, (1, "x", 1), (1, "y", 1))
    r = integrate(Integrand(e, {"x": Normal(F(0), F(1)), "y": Normal(F(0), F(1))}))
    assert r.method == "quadrature"
    assert abs(r.value - stats.norm(0, math.sqrt(2)).cdf(1)) < 1e-7


def test_three_gaussians_monte_carlo_is_reproducible():
    e = br("<", 1, (1, "x", 1), (1, "y", 1), (1, "z", 2))
    d = {v: Normal(F(0), F(1)) for v in "xyz"}
    r1 = integrate(Integrand(e, d), mc_samples=200_000, seed=3)
    r2 = integrate(Integrand(e, d), mc_samples=200_000, seed=3)
    assert r1.method == "monte-carlo" and r1.value == r2.value and r1.error_bound > 0
    rng = np.random.default_rng(0)
    x, y, z = rng.standard_normal((3, 2_000_000))
    ref = np.mean(x + y + z ** 2 < 1)
    assert abs(r1.value - ref) < 4 * r1.error_bound + 1e-3


def test_equality_bracket_has_measure_zero():
    r = integrate(Integrand(t_("=", 20), {"t": N20}))
    assert r.value == 0 and r.warnings
    r = integrate(Integrand(t_("=", 20, positive=False), {"t": N20}))
    assert r.value == pytest.approx(1.0)


def test_missing_density_is_an_error():
    with pytest.raises(IntegrationError):
        Integrand(t_(">", 1), {})


def test_timeout():
    es = [br(">", 1, (1, f"x{i}", 1), (1, f"x{(i + 1) % 12}", 1)) for i in range(12)]
    e = ONE
    for x in es:
        e = e * x
    with pytest.raises(IntegrationTimeout):
        integrate(Integrand(e, {f"x{i}": Uniform(F(0), F(1)) for i in range(12)}), timeout=0.05)


def test_attach_single_integrand():
    psi = F(1, 100) * t_(">", 20) * t_("<=", 30) + t_(">", 30)
    [(i, coef)] = attach_densities(SemiringElement(psi, frozenset({Binding("t", N20)})))
    assert coef == 1 and i.densities == {"t": N20} and i.expr == psi
    [(i, coef)] = attach_densities(SemiringElement(ONE))
    assert integrate(i).value == 1


def test_attach_splits_guard_worlds(machine):
    m = machine.model
    q = solve_query(m, "broken")
    pieces = attach_densities(q.amc, m.guards, WorldProbability(m.weights))
    assert sorted(c for _, c in pieces) == [F(1, 5), F(4, 5)]
    by_coef = {c: i for i, c in pieces}
    assert [str(d) for d in by_coef[F(4, 5)].densities.values()] == ["normal(20, 5)"]
    assert [str(d) for d in by_coef[F(1, 5)].densities.values()] == ["normal(27, 5)"]


def test_wmi_result_arithmetic():
    a = WmiResult.from_exact(ClosedForm.const(F(1, 4)))
    b = WmiResult(0.5, None, 0.01, "monte-carlo")
    s = a + b
    assert s.method == "monte-carlo" and s.value == 0.75 and s.error_bound == 0.01
    assert (a + a).exact.rational() == F(1, 2)
    assert a.scaled(2).value == 0.5


def test_density_validation():
    with pytest.raises(ValueError):
        Normal(F(0), F(0))
    with pytest.raises(ValueError):
        Uniform(F(1), F(1))
    with pytest.raises(ValueError):
        PiecewisePolynomial(((F(0), F(1), (F(2),)),))


# --------------------------------------------------------------------------- laws on fixtures

FIXTURES = [
    """var bool a ~ bernoulli(0.3); var real t ~ normal(20, 5); var real u ~ uniform(0, 10);
       formula q := (a & t > 22) | (u < 4 & t <= 18);""",
    """var bool a ~ bernoulli(0.5); var bool b ~ bernoulli(0.25); var real x ~ uniform(0, 1);
       var real y ~ uniform(0, 1); formula q := (a -> x + y < 1) & (b | x > y);""",
    """var real p ~ beta(2, 3); var bool c ~ bernoulli(0.7); formula q := c <-> (p > 0.4);""",
    """var real t ~ normal(0, 1); formula q := t^2 < 2 | t > 3;""",
]


@pytest.mark.parametrize("src", FIXTURES)
def test_query_and_negation_sum_to_one(src):
    m = parse_model(src + "\nquery q;")
    m.formulas["nq"] = Not(m.formulas["q"])
    p = solve_query(m, "q")
    n = solve_query(m, "nq")
    tol = 1e-9 if p.result.method == n.result.method == "exact" else 1e-6
    assert abs(p.value + n.value - 1) < tol


@pytest.mark.parametrize("src", FIXTURES)
def test_conjunctive_strengthening_is_monotone(src):
    m = parse_model(src + "\nquery q;")
    reg = m.registry
    extra = next(iter(reg.bools), None)
    from hwmi.formula import And, Var

    m.formulas["stronger"] = And(m.formulas["q"], Var(extra)) if extra else m.formulas["q"]
    assert solve_query(m, "stronger").value <= solve_query(m, "q").value + 1e-9
