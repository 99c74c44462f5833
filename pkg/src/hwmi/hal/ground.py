"""Bottom-up grounding with the conS clause schema.

Every distributional clause instance ``D::t :- b`` becomes a symbolic value
``t|b`` of ``t``.  A rule instance whose ``valS`` literals bind logic
variables to symbolic values ``v_i|b_i`` and whose ``conS(C)`` maps them
contributes the labeled clause

    (C[V_i := v_i|b_i], {v_i|b_i ~ f_i}) :: conS(C[V_i := v_i]) :- b_1, ..., b_n.

and the rule itself keeps ``conS(C[V_i := v_i])`` in place of its ``valS`` /
``conS`` literals.  Distributional clauses are dropped afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

from ..arith import comparison
from ..densities import Density, make_density
from ..formula import FALSE, TRUE, And, Formula, Not, Var, eval_formula, format_formula
from .parser import Atom, Clause, HalSemanticError, Literal, LogicVar, Program


@dataclass(frozen=True)
class SymbolicValue:
    base: str  # the continuous variable
    guard: tuple  # ground body literals, as (Atom, positive) pairs
    density: Density

    @property
    def name(self) -> str:
        if not self.guard:
            return self.base
        return f"{self.base}|{guard_text(self.guard)}"


def literal_text(lit) -> str:
    a, pos = lit
    return str(a) if pos else f"\\+{a}"


def guard_text(guard) -> str:
    return ",".join(literal_text(g) for g in guard)


@dataclass(frozen=True)
class ConsAtom:
    """Ground ``conS(C)`` over base variable names; the condition is a formula leaf or a constant."""

    condition: Formula

    def __str__(self):
        return f"conS({format_formula(self.condition)})"


@dataclass(frozen=True)
class ConsClause:
    head: ConsAtom
    label: Formula  # the condition over guarded value names
    values: tuple  # SymbolicValue per logic variable of the condition
    body: tuple  # ground guard literals

    def __str__(self):
        dens = ", ".join(f"{v.density.kind}[{v.name}]({_density_args(v.density)})" for v in self.values)
        head = f"({format_formula(self.label)}, {dens})::{self.head}"
        if self.body:
            return head + " :- " + ", ".join(literal_text(b) for b in self.body) + "."
        return head + "."


def _density_args(d: Density) -> str:
    text = str(d)
    return text[text.index("(") + 1:-1].replace(" ", "")


@dataclass(frozen=True)
class GroundRule:
    head: Atom
    body: tuple  # (Atom | ConsAtom, positive)
    prob: Fraction | None = None

    def __str__(self):
        out = str(self.head)
        if self.prob is not None:
            out = f"{_fmt_prob(self.prob)}::{out}"
        if self.body:
            out += " :- " + ", ".join(str(a) if pos else f"\\+{a}" for a, pos in self.body)
        return out + "."


def _fmt_prob(p: Fraction) -> str:
    f = float(p)
    return repr(f) if Fraction(repr(f)) == p else f"{p.numerator}/{p.denominator}"


@dataclass
class GroundProgram:
    facts: list[tuple[Atom, Fraction | None]] = field(default_factory=list)  # None: certain fact
    rules: list[GroundRule] = field(default_factory=list)
    cons_clauses: list[ConsClause] = field(default_factory=list)
    values: dict[str, list[SymbolicValue]] = field(default_factory=dict)
    queries: list[Atom] = field(default_factory=list)
    evidence: list[tuple[Atom, bool]] = field(default_factory=list)

    @property
    def atoms(self) -> set[Atom]:
        out = {a for a, _ in self.facts}
        out.update(r.head for r in self.rules)
        return out

    def dump(self) -> str:
        """Grounded program, one clause per line."""
        lines = []
        for a, p in self.facts:
            lines.append(f"{_fmt_prob(p)}::{a}." if p is not None else f"{a}.")
        lines += [str(c) for c in self.cons_clauses]
        lines += [str(r) for r in self.rules]
        lines += [f"query({q})." for q in self.queries]
        for a, v in self.evidence:
            lines.append(f"evidence({a})." if v else f"evidence({a},false).")
        return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------- substitution


def _apply(term, theta):
    if isinstance(term, LogicVar):
        return theta.get(term.name, term)
    return term


def _apply_atom(a: Atom, theta) -> Atom:
    return Atom(a.pred, tuple(_apply(t, theta) for t in a.args))


def _match(pattern: Atom, fact: Atom, theta: dict):
    if pattern.pred != fact.pred or len(pattern.args) != len(fact.args):
        return None
    out = dict(theta)
    for p, f in zip(pattern.args, fact.args):
        if isinstance(p, LogicVar):
            if p.name == "_":
                continue
            bound = out.get(p.name)
            if bound is None:
                out[p.name] = f
            elif bound != f:
                return None
        elif p != f:
            return None
    return out


def _subst_poly(items, theta, rename):
    """Polynomial with logic variables replaced: symbolic values renamed, numbers folded."""
    poly: dict = {}
    for mono, coef in items:
        powers: dict[str, Fraction] = {}
        c = coef
        for v, p in mono:
            val = theta.get(v)
            if isinstance(val, SymbolicValue):
                name = rename(val)
                powers[name] = powers.get(name, Fraction(0)) + p
            elif isinstance(val, Fraction):
                if p.denominator != 1:
                    raise HalSemanticError(f"rational power of the number bound to {v}")
                c *= val ** p.numerator
            else:
                raise HalSemanticError(f"logic variable {v} in conS is not bound to a value")
        m = tuple(sorted(powers.items()))
        poly[m] = poly.get(m, Fraction(0)) + c
    return {m: c for m, c in poly.items() if c}


def _condition_formula(cond, theta, rename) -> Formula:
    lhs = _subst_poly(cond.lhs, theta, rename)
    rhs = _subst_poly(cond.rhs, theta, rename)
    try:
        return comparison(lhs, cond.cmp, rhs)
    except ValueError as exc:
        raise HalSemanticError(f"conS({cond.text}): {exc}") from None


def _density(clause: Clause, theta) -> Density:
    name, args = clause.density
    vals = []
    for a in args:
        a = _apply(a, theta)
        if not isinstance(a, Fraction):
            raise HalSemanticError(f"line {clause.line}: density parameter {a} is not a number")
        vals.append(a)
    try:
        return make_density(name, vals)
    except ValueError as exc:
        raise HalSemanticError(f"line {clause.line}: {exc}") from None


# --------------------------------------------------------------------------- grounding


class _Grounder:
    def __init__(self, program: Program):
        self.p = program
        self.derivable: set[Atom] = set()
        self.values: dict[str, list[SymbolicValue]] = {}
        self.instances: dict[int, set] = {i: set() for i in range(len(program.clauses))}

    def check(self):
        for c in self.p.clauses:
            kinds = [lit.kind for lit in c.body]
            if c.is_distributional and any(k != "atom" for k in kinds):
                raise HalSemanticError(f"line {c.line}: densities conditioned on continuous tests are not supported")
            valS_vars = {lit.var.name for lit in c.body if lit.kind == "valS"}
            cons_vars = set()
            for lit in c.body:
                if lit.kind == "conS":
                    cons_vars |= lit.cond.variables
            if valS_vars - cons_vars:
                raise HalSemanticError(f"line {c.line}: valS without a conS using its value")
            if not c.body and not c.head.is_ground:
                raise HalSemanticError(f"line {c.line}: fact {c.head} is not ground")

    def bindings(self, body, theta, idx=0):
        """All substitutions satisfying positive atoms and valS of a body (over-approximation)."""
        if idx == len(body):
            yield theta
            return
        lit = body[idx]
        if lit.kind == "atom" and lit.positive:
            pat = _apply_atom(lit.atom, theta)
            if pat.is_ground:
                if pat in self.derivable:
                    yield from self.bindings(body, theta, idx + 1)
                return
            for fact in list(self.derivable):
                t2 = _match(pat, fact, theta)
                if t2 is not None:
                    yield from self.bindings(body, t2, idx + 1)
        elif lit.kind == "valS":
            target = _apply(lit.target, theta)
            if isinstance(target, LogicVar):
                raise HalSemanticError(f"valS target {target} is unbound")
            base = str(target) if not isinstance(target, Fraction) else None
            if base is None:
                raise HalSemanticError("valS target must name a continuous variable")
            for v in self.values.get(base, ()):
                bound = theta.get(lit.var.name)
                if bound is None or bound == v:
                    yield from self.bindings(body, {**theta, lit.var.name: v}, idx + 1)
        else:
            yield from self.bindings(body, theta, idx + 1)

    def run(self):
        self.check()
        changed = True
        while changed:
            changed = False
            for i, c in enumerate(self.p.clauses):
                for theta in list(self.bindings(c.body, {})):
                    key = tuple(sorted(theta.items(), key=lambda kv: kv[0]))
                    if key in self.instances[i]:
                        continue
                    self.instances[i].add(key)
                    head = _apply_atom(c.head, theta)
                    if not head.is_ground:
                        raise HalSemanticError(f"line {c.line}: head {head} is not ground (unsafe variable)")
                    for lit in c.body:
                        if lit.kind == "atom" and not lit.positive and not _apply_atom(lit.atom, theta).is_ground:
                            raise HalSemanticError(f"line {c.line}: negated literal {lit} is not ground")
                    changed = True
                    if c.is_distributional:
                        guard = tuple((_apply_atom(lit.atom, theta), lit.positive) for lit in c.body)
                        sv = SymbolicValue(str(head), guard, _density(c, theta))
                        self.values.setdefault(sv.base, []).append(sv)
                    else:
                        self.derivable.add(head)
        return self.build()

    def build(self) -> GroundProgram:
        p = self.p
        g = GroundProgram(values=self.values, queries=list(p.queries), evidence=list(p.evidence))
        defined_bases = set(self.values)
        for c in p.clauses:
            for lit in c.body:
                if lit.kind == "valS" and isinstance(lit.target, str) and lit.target not in defined_bases:
                    raise HalSemanticError(f"line {c.line}: continuous variable {lit.target} is never defined")
        seen_rules = set()
        seen_cons = set()
        for i, c in enumerate(p.clauses):
            if c.is_distributional:
                continue
            for key in sorted(self.instances[i], key=repr):
                theta = dict(key)
                head = _apply_atom(c.head, theta)
                if not c.body:
                    g.facts.append((head, c.prob))
                    continue
                body = []
                ok = True
                for lit in c.body:
                    if lit.kind == "atom":
                        a = _apply_atom(lit.atom, theta)
                        if not lit.positive and a not in self.derivable:
                            continue  # negation of an underivable atom always holds
                        body.append((a, lit.positive))
                    elif lit.kind == "conS":
                        cons = self.cons_literal(lit, theta)
                        if cons is FALSE:
                            ok = False
                            break
                        if cons is TRUE:
                            continue
                        body.append((cons[0], True))
                        for cl in cons[1]:
                            if cl not in seen_cons:
                                seen_cons.add(cl)
                                g.cons_clauses.append(cl)
                if not ok:
                    continue
                rule = GroundRule(head, tuple(body), c.prob)
                # a probabilistic clause is one independent event per distinct ground instance
                key = (i, rule) if c.prob is not None else rule
                if key not in seen_rules:
                    seen_rules.add(key)
                    g.rules.append(rule)
        return g

    def cons_literal(self, lit: Literal, theta):
        cond = lit.cond
        base_head = _condition_formula(cond, theta, lambda v: v.base)
        label = _condition_formula(cond, theta, lambda v: v.name)
        if base_head in (TRUE, FALSE) and label in (TRUE, FALSE):
            return label
        used = []
        for v in sorted(cond.variables):
            val = theta.get(v)
            if isinstance(val, SymbolicValue) and val not in used:
                used.append(val)
        body = []
        for v in used:
            for gl in v.guard:
                if gl not in body:
                    body.append(gl)
        clause = ConsClause(ConsAtom(base_head), label, tuple(used), tuple(body))
        return ConsAtom(base_head), [clause]


def ground(program: Program) -> GroundProgram:
    """Ground a program (see the module docstring for the conS schema)."""
    return _Grounder(program).run()


# --------------------------------------------------------------------------- exclusivity


@dataclass
class ExclusivityReport:
    violations: list[tuple[str, str, str]] = field(default_factory=list)  # (base, value_i, value_j)
    method: str = "enumeration"

    @property
    def ok(self) -> bool:
        return not self.violations


def check_mutual_exclusivity(g: GroundProgram, guard_formula=None, enumeration_limit: int = 20) -> ExclusivityReport:
    """Pairwise unsatisfiability of the guards of every continuous variable.

    ``guard_formula(SymbolicValue)`` gives the guard over independent facts
    (the reducer supplies it); the default reads guard literals as independent
    propositions.
    """
    from ..compiler import compile_formula

    if guard_formula is None:
        def guard_formula(v):
            return And(*(Var(str(a)) if pos else Not(Var(str(a))) for a, pos in v.guard))

    report = ExclusivityReport()
    for base in sorted(g.values):
        vals = g.values[base]
        for i in range(len(vals)):
            for j in range(i + 1, len(vals)):
                f = And(guard_formula(vals[i]), guard_formula(vals[j]))
                names = sorted(f.bool_vars)
                if len(names) <= enumeration_limit:
                    sat = any(eval_formula(f, dict(zip(names, bits)))
                              for bits in product((False, True), repeat=len(names)))
                else:
                    report.method = "compilation"
                    c = compile_formula(f)
                    sat = c.nodes[c.root][0] != "F"
                if sat:
                    report.violations.append((base, vals[i].name, vals[j].name))
    return report
