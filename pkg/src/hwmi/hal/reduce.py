"""Completion of an acyclic ground program into weighted formulas.

Each derived atom is replaced by the disjunction of its clause bodies, so the
result mentions only probabilistic facts and arithmetic constraints over
guarded symbolic values.  Several definitions of one atom yield a noisy-or.
"""

from __future__ import annotations

from collections import Counter
from fractions import Fraction

from ..formula import FALSE, TRUE, And, Formula, Not, Or, Var, VariableRegistry, WeightSpec
from ..model import GuardInfo, Model
from .ground import ConsAtom, GroundProgram, check_mutual_exclusivity, guard_text
from .parser import Atom, HalSemanticError


class CyclicProgramError(HalSemanticError):
    pass


class ExclusivityError(HalSemanticError):
    def __init__(self, report):
        self.report = report
        pairs = "; ".join(f"{b}: {i} and {j}" for b, i, j in report.violations)
        super().__init__(f"overlapping definitions of a continuous variable ({pairs})")


class Reducer:
    def __init__(self, g: GroundProgram):
        self.g = g
        self.weights: dict[str, Fraction] = {}
        self.fact_vars: dict[Atom, list] = {}
        self.rules_by_head: dict[Atom, list] = {}
        self.cons_by_head: dict[ConsAtom, list] = {}
        counts = Counter(a for a, p in g.facts if p is not None)
        for r in g.rules:
            counts[r.head] += r.prob is not None
        uses: Counter = Counter()

        def fresh(atom: Atom, p: Fraction) -> str:
            name = str(atom)
            if counts[atom] > 1 or atom in self.rules_by_head_all:
                uses[atom] += 1
                name = f"{atom}#{uses[atom]}"
            self.weights[name] = Fraction(p)
            return name

        self.rules_by_head_all = {r.head for r in g.rules}
        for a, p in g.facts:
            self.fact_vars.setdefault(a, []).append(TRUE if p is None else Var(fresh(a, p)))
        for r in g.rules:
            prob_var = Var(fresh(r.head, r.prob)) if r.prob is not None else None
            self.rules_by_head.setdefault(r.head, []).append((r, prob_var))
        for c in g.cons_clauses:
            self.cons_by_head.setdefault(c.head, []).append(c)
        self.memo: dict = {}
        self.active: set = set()

    def atom(self, a: Atom) -> Formula:
        hit = self.memo.get(a)
        if hit is not None:
            return hit
        if a in self.active:
            raise CyclicProgramError(f"cyclic dependency through {a}; only acyclic programs are supported")
        self.active.add(a)
        parts = list(self.fact_vars.get(a, ()))
        for r, prob_var in self.rules_by_head.get(a, ()):
            conj = [prob_var] if prob_var is not None else []
            for b, pos in r.body:
                f = self.cons(b) if isinstance(b, ConsAtom) else self.atom(b)
                conj.append(f if pos else Not(f))
            parts.append(And(*conj))
        self.active.discard(a)
        out = Or(*parts)
        self.memo[a] = out
        return out

    def literal(self, a: Atom, pos: bool) -> Formula:
        f = self.atom(a)
        return f if pos else Not(f)

    def guard(self, value) -> Formula:
        return And(*(self.literal(a, pos) for a, pos in value.guard))

    def cons(self, c: ConsAtom) -> Formula:
        hit = self.memo.get(c)
        if hit is not None:
            return hit
        parts = []
        for cl in self.cons_by_head.get(c, ()):
            parts.append(And(*(self.literal(a, pos) for a, pos in cl.body), cl.label))
        out = Or(*parts)
        self.memo[c] = out
        return out

    def guards(self) -> dict[str, GuardInfo]:
        out = {}
        for base, vals in self.g.values.items():
            for v in vals:
                out[v.name] = GuardInfo(base, self.guard(v), guard_text(v.guard))
        return out


def reduce_to_formula(g: GroundProgram, q: Atom | str, check: bool = True):
    """``(formula, weights, guards)`` for one query of a ground program."""
    m = program_to_model(g, queries=[q], check=check)
    name = str(q)
    return m.formulas[name], m.weights, m.guards


def program_to_model(g: GroundProgram, queries=None, check: bool = True) -> Model:
    """Weighted-formula model with one formula per query (and the evidence, if any)."""
    red = Reducer(g)
    if check:
        report = check_mutual_exclusivity(g, red.guard)
        if not report.ok:
            raise ExclusivityError(report)
    queries = list(g.queries if queries is None else queries)
    formulas = {}
    for q in queries:
        atom = q if isinstance(q, Atom) else _atom_from_text(q)
        formulas[str(atom)] = red.atom(atom)
    evidence = None
    if g.evidence:
        evidence = And(*(red.literal(a, v) for a, v in g.evidence))
    reg = VariableRegistry()
    for name in sorted(red.weights):
        reg.declare(name, "bool")
    densities = {}
    for vals in g.values.values():
        for v in vals:
            reg.declare(v.name, "real")
            densities[v.name] = v.density
    weights = WeightSpec(dict(red.weights), densities)
    return Model(reg, weights, formulas, [str(q) for q in queries], evidence, red.guards(), source="halpl")


def _atom_from_text(text: str) -> Atom:
    from .parser import _Parser

    p = _Parser(text)
    a = p.atom(ground=True)
    return a


__all__ = ["reduce_to_formula", "program_to_model", "CyclicProgramError", "ExclusivityError", "Reducer",
           "FALSE"]
