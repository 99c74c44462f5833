"""End-to-end solving: abstract, compile, label, evaluate, attach densities, integrate."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .closedform import ClosedForm
from .compiler import CompileTimeout, DdnnfCircuit, compile_formula, model_count, smooth
from .formula import And, AbstractionMap, Formula, Not, WeightSpec, abstract
from .integrate import IntegrationTimeout, WmiResult, attach_densities, integrate
from .model import Model, parse_model
from .semiring import PROBABILITY, SemiringElement, amc_evaluate, density_labeling, probability_labeling


class SolveTimeout(Exception):
    pass


@dataclass
class Timings:
    ground_ms: float = 0.0
    kc_ms: float = 0.0
    eval_ms: float = 0.0
    integrate_ms: float = 0.0

    def as_dict(self):
        return {k: round(v, 3) for k, v in vars(self).items()}


@dataclass
class QueryResult:
    query: str
    result: WmiResult
    timings: Timings = field(default_factory=Timings)
    amc: SemiringElement | None = None
    exact_text: str | None = None

    @property
    def value(self) -> float:
        return self.result.value

    def to_json(self) -> dict:
        exact = self.exact_text if self.exact_text is not None else self.result.exact_str
        return {
            "query": self.query,
            "value": self.result.value,
            "error_bound": self.result.error_bound,
            "method": self.result.method,
            "exact": exact,
            "timings": self.timings.as_dict(),
        }


class _Clock:
    def __init__(self, timeout: float | None):
        self.deadline = time.perf_counter() + timeout if timeout else None

    def left(self) -> float | None:
        if self.deadline is None:
            return None
        rest = self.deadline - time.perf_counter()
        if rest <= 0:
            raise SolveTimeout("time budget exhausted")
        return rest


class WorldProbability:
    """Exact probability of a propositional formula over the model's Boolean weights (cached)."""

    def __init__(self, weights: WeightSpec):
        self.weights = weights
        self.labeling = probability_labeling(weights)
        self.cache: dict[Formula, Fraction] = {}

    def __call__(self, f: Formula) -> Fraction:
        hit = self.cache.get(f)
        if hit is None:
            c = compile_formula(f)
            hit = self.cache[f] = amc_evaluate(c, self.labeling, PROBABILITY)
        return hit


class CompiledQuery:
    """One compiled circuit, re-evaluable under different weights."""

    def __init__(self, formula: Formula, model: Model, order=None, timeout: float | None = None,
                 max_vars: int = 64):
        t0 = time.perf_counter()
        self.model = model
        self.formula = formula
        self.prop, self.amap = abstract(formula, AbstractionMap())
        self.circuit: DdnnfCircuit = compile_formula(self.prop, order=order, timeout=timeout or 60.0,
                                                     max_vars=max_vars)
        self.kc_ms = (time.perf_counter() - t0) * 1e3

    def evaluate(self, weights: WeightSpec | None = None) -> SemiringElement:
        weights = weights or self.model.weights
        return amc_evaluate(self.circuit, density_labeling(weights, self.amap, self.model.guards))

    def integrate(self, e: SemiringElement, weights: WeightSpec | None = None, timeout=None,
                  mc_samples: int = 100_000, seed: int = 0) -> WmiResult:
        weights = weights or self.model.weights
        world = WorldProbability(weights) if self.model.guards else None
        total = WmiResult(0.0, ClosedForm.const(0))
        for integrand, coef in attach_densities(e, self.model.guards, world):
            total = total + integrate(integrand, timeout=timeout, mc_samples=mc_samples, seed=seed).scaled(coef)
        return total


def _ratio(num: WmiResult, den: WmiResult) -> tuple[WmiResult, str | None]:
    if den.value <= 0:
        raise ValueError("evidence has probability zero")
    if num.exact is not None and den.exact is not None:
        if den.exact.is_rational:
            cf = num.exact * ClosedForm.const(1 / den.exact.rational())
            return WmiResult.from_exact(cf, num.warnings + den.warnings), None
        value = num.value / den.value
        return WmiResult(value, None, 0.0, "exact", num.warnings + den.warnings), f"({num.exact}) / ({den.exact})"
    value = num.value / den.value
    err = (num.error_bound + value * den.error_bound) / den.value
    method = max(num.method, den.method, key=["exact", "quadrature", "monte-carlo"].index)
    return WmiResult(value, None, err, method, num.warnings + den.warnings), None


def solve_query(model: Model, query: str, semiring: str = "density", order=None, timeout: float | None = None,
                mc_samples: int = 100_000, seed: int = 0, ground_ms: float = 0.0) -> QueryResult:
    clock = _Clock(timeout)
    f = model.formulas[query]
    ev = model.evidence
    target = And(f, ev) if ev is not None else f
    timings = Timings(ground_ms=ground_ms)
    try:
        if semiring == "counting":
            return _count(model, query, target, order, timings)
        if semiring == "probability":
            return _probability(model, query, target, ev, order, timings)
        cq = CompiledQuery(target, model, order=order, timeout=clock.left())
        timings.kc_ms = cq.kc_ms
        t0 = time.perf_counter()
        e = cq.evaluate()
        timings.eval_ms = (time.perf_counter() - t0) * 1e3
        t0 = time.perf_counter()
        res = cq.integrate(e, timeout=clock.left(), mc_samples=mc_samples, seed=seed)
        exact_text = None
        if ev is not None:
            cq_e = CompiledQuery(ev, model, order=order, timeout=clock.left())
            timings.kc_ms += cq_e.kc_ms
            t1 = time.perf_counter()
            ee = cq_e.evaluate()
            timings.eval_ms += (time.perf_counter() - t1) * 1e3
            den = cq_e.integrate(ee, timeout=clock.left(), mc_samples=mc_samples, seed=seed + 1)
            res, exact_text = _ratio(res, den)
        timings.integrate_ms = (time.perf_counter() - t0) * 1e3
        return QueryResult(query, res, timings, e, exact_text)
    except (CompileTimeout, IntegrationTimeout) as exc:
        raise SolveTimeout(str(exc)) from None


def _count(model, query, target, order, timings) -> QueryResult:
    t0 = time.perf_counter()
    prop, amap = abstract(target)
    scope = sorted(set(model.registry.bools) | set(amap.to_atom))
    c = compile_formula(prop, order=order, variables=scope)
    timings.kc_ms = (time.perf_counter() - t0) * 1e3
    t0 = time.perf_counter()
    n = model_count(smooth(c))
    timings.eval_ms = (time.perf_counter() - t0) * 1e3
    return QueryResult(query, WmiResult(float(n), ClosedForm.const(n)), timings, exact_text=str(n))


def _probability(model, query, target, ev, order, timings) -> QueryResult:
    if model.registry.reals:
        raise ValueError("the probability semiring applies to models without real variables")
    t0 = time.perf_counter()
    c = compile_formula(target, order=order)
    ce = compile_formula(ev, order=order) if ev is not None else None
    timings.kc_ms = (time.perf_counter() - t0) * 1e3
    t0 = time.perf_counter()
    lab = probability_labeling(model.weights)
    p = amc_evaluate(c, lab)
    if ce is not None:
        p = p / amc_evaluate(ce, lab)
    timings.eval_ms = (time.perf_counter() - t0) * 1e3
    return QueryResult(query, WmiResult.from_exact(ClosedForm.const(p)), timings)


def solve_wmi(model: Model, queries=None, **kw) -> dict[str, QueryResult]:
    """Solve every query of ``model``; keyword arguments as for `solve_query`."""
    queries = list(model.queries if queries is None else queries)
    return {q: solve_query(model, q, **kw) for q in queries}


# --------------------------------------------------------------------------- files


@dataclass
class LoadedModel:
    model: Model
    ground_ms: float = 0.0
    ground: object = None  # GroundProgram for .halpl sources
    program: object = None


def load_text(text: str, kind: str, check: bool = True) -> LoadedModel:
    if kind == "hwmi":
        t0 = time.perf_counter()
        m = parse_model(text)
        return LoadedModel(m, (time.perf_counter() - t0) * 1e3)
    from .hal.ground import ground
    from .hal.parser import parse_program
    from .hal.reduce import program_to_model

    t0 = time.perf_counter()
    prog = parse_program(text)
    g = ground(prog)
    m = program_to_model(g, check=check)
    return LoadedModel(m, (time.perf_counter() - t0) * 1e3, g, prog)


def load_file(path, check: bool = True) -> LoadedModel:
    path = Path(path)
    kind = "halpl" if path.suffix in (".halpl", ".pl") else "hwmi"
    return load_text(path.read_text(), kind, check)


def solve_file(path, **kw) -> dict[str, QueryResult]:
    lm = load_file(path)
    return solve_wmi(lm.model, ground_ms=lm.ground_ms, **kw)


def results_json(results: dict[str, QueryResult]) -> str:
    return json.dumps([r.to_json() for r in results.values()], indent=2)


def negated(model: Model, query: str) -> Formula:
    return Not(model.formulas[query])
