"""Hybrid formulas: Boolean variables, polynomial real constraints, connectives.

Formulas are hash-consed: building the same tree twice returns the same
object, so identity doubles as structural equality and formulas can key
caches directly.  All arithmetic inside atoms is exact (`Fraction`).
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Mapping

COMPARATORS = ("<", "<=", ">", ">=", "=", "!=")
CANONICAL_COMPARATORS = ("<", "<=", "=")

_NEGATED = {">": "<=", ">=": "<", "!=": "="}
_FLIPPED = {"<": "<=", "<=": "<"}  # comparator of the complement after multiplying by -1
_DISPLAY_NEG = {"<=": ">", "<": ">=", "=": "!="}


@dataclass(frozen=True)
class NraAtom:
    """``sum(coef * var ** power) <comparator> bound``."""

    terms: tuple[tuple[Fraction, str, Fraction], ...]
    comparator: str
    bound: Fraction

    def __post_init__(self):
        if not self.terms:
            raise ValueError("an atom needs at least one term")
        if self.comparator not in COMPARATORS:
            raise ValueError(f"unknown comparator {self.comparator!r}")
        for coef, var, power in self.terms:
            if power <= 0:
                raise ValueError(f"power of {var} must be a positive rational, got {power}")

    @property
    def linear(self) -> bool:
        return all(p == 1 for _, _, p in self.terms)

    @cached_property
    def variables(self) -> tuple[str, ...]:
        return tuple(sorted({v for _, v, _ in self.terms}))

    @property
    def univariate(self) -> bool:
        return len(self.variables) == 1

    def lhs(self, values: Mapping[str, object]):
        return sum((coef * power_of(values[var], p) for coef, var, p in self.terms), Fraction(0))

    def holds(self, values: Mapping[str, object]) -> bool:
        try:
            lhs = self.lhs(values)
        except KeyError as exc:
            raise KeyError(f"missing value for real variable {exc.args[0]}") from None
        if isinstance(lhs, float) and math.isnan(lhs):
            return False
        return _compare(lhs, self.comparator, self.bound)

    def key(self):
        return (self.terms, self.comparator, self.bound)

    @cached_property
    def _hash(self) -> int:
        return hash(self.key())

    def __hash__(self):
        return self._hash

    def __str__(self):
        return format_atom(self.terms, self.comparator, self.bound)


def _compare(lhs, cmp, rhs) -> bool:
    if cmp == "<":
        return lhs < rhs
    if cmp == "<=":
        return lhs <= rhs
    if cmp == ">":
        return lhs > rhs
    if cmp == ">=":
        return lhs >= rhs
    if cmp == "=":
        return lhs == rhs
    return lhs != rhs


def power_of(x, p: Fraction):
    """Real power ``x ** p``; NaN where undefined (negative base, even root)."""
    if p.denominator == 1:
        return x ** p.numerator
    xf = float(x)
    if xf >= 0:
        return xf ** float(p)
    if p.denominator % 2 == 0:
        return math.nan
    mag = (-xf) ** float(p)
    return -mag if p.numerator % 2 else mag


def _format_number(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def format_term(coef: Fraction, var: str, power: Fraction, first: bool) -> str:
    sign = "-" if coef < 0 else "+"
    mag = abs(coef)
    body = var
    if power != 1:
        body += f"^{power.numerator}" if power.denominator == 1 else f"^({_format_number(power)})"
    if mag != 1:
        body = f"{_format_number(mag)}*{body}"
    if first:
        return body if sign == "+" else f"-{body}"
    return f" {sign} {body}"


def format_atom(terms, comparator, bound) -> str:
    lhs = "".join(format_term(c, v, p, i == 0) for i, (c, v, p) in enumerate(terms))
    rhs = _format_number(bound) if bound >= 0 else f"-{_format_number(-bound)}"
    return f"{lhs} {comparator} {rhs}"


def canonicalize_atom(atom: NraAtom) -> tuple[NraAtom, bool]:
    """Return ``(canonical, positive)`` with ``atom`` equivalent to the canonical
    atom when ``positive`` and to its negation otherwise.

    Canonical atoms have merged terms sorted by (variable, power), leading
    coefficient +1 and a comparator in ``<``, ``<=``, ``=``.  ``>``, ``>=`` and
    ``!=`` are expressed as negated literals of the complementary atom.
    """
    merged: dict[tuple[str, Fraction], Fraction] = {}
    for coef, var, power in atom.terms:
        key = (var, Fraction(power))
        merged[key] = merged.get(key, Fraction(0)) + Fraction(coef)
    terms = [(c, v, p) for (v, p), c in sorted(merged.items()) if c != 0]
    if not terms:
        raise ValueError(f"atom {atom} has no non-zero terms")
    cmp, positive = atom.comparator, True
    if cmp in _NEGATED:
        cmp, positive = _NEGATED[cmp], False
    lead = terms[0][0]
    scale = abs(lead)
    bound = Fraction(atom.bound) / scale
    terms = [(c / scale, v, p) for c, v, p in terms]
    if lead < 0:
        terms = [(-c, v, p) for c, v, p in terms]
        bound = -bound
        if cmp in _FLIPPED:
            cmp, positive = _FLIPPED[cmp], not positive
    return NraAtom(tuple(terms), cmp, bound), positive


def is_canonical(atom: NraAtom) -> bool:
    canon, positive = canonicalize_atom(atom)
    return positive and canon == atom


def describe_literal(atom: NraAtom, positive: bool) -> str:
    """Readable form of a canonical atom or its negation (``t > 30``)."""
    if positive:
        return str(atom)
    return format_atom(atom.terms, _DISPLAY_NEG[atom.comparator], atom.bound)


# --------------------------------------------------------------------------- formulas

_INTERN: "weakref.WeakValueDictionary[tuple, Formula]" = weakref.WeakValueDictionary()


class Formula:
    """Hash-consed formula node.

    ``op`` is one of ``const``, ``var``, ``atom``, ``not``, ``and``, ``or``,
    ``implies``, ``iff``.  ``payload`` holds the constant, variable name or
    canonical `NraAtom`.
    """

    __slots__ = ("op", "args", "payload", "__weakref__", "__dict__")

    def __new__(cls, op: str, args: tuple = (), payload=None):
        key = (op, args, payload)
        node = _INTERN.get(key)
        if node is None:
            node = object.__new__(cls)
            object.__setattr__(node, "op", op)
            object.__setattr__(node, "args", args)
            object.__setattr__(node, "payload", payload)
            _INTERN[key] = node
        return node

    def __setattr__(self, name, value):
        raise AttributeError("Formula is immutable")

    def __reduce__(self):
        return (Formula, (self.op, self.args, self.payload))

    @cached_property
    def bool_vars(self) -> frozenset[str]:
        if self.op == "var":
            return frozenset((self.payload,))
        out = frozenset()
        for a in self.args:
            out |= a.bool_vars
        return out

    @cached_property
    def real_vars(self) -> frozenset[str]:
        if self.op == "atom":
            return frozenset(self.payload.variables)
        out = frozenset()
        for a in self.args:
            out |= a.real_vars
        return out

    @cached_property
    def atoms(self) -> frozenset[NraAtom]:
        if self.op == "atom":
            return frozenset((self.payload,))
        out = frozenset()
        for a in self.args:
            out |= a.atoms
        return out

    @property
    def is_literal(self) -> bool:
        return self.op in ("var", "atom") or (self.op == "not" and self.args[0].op in ("var", "atom"))

    def __and__(self, other):
        return And(self, other)

    def __or__(self, other):
        return Or(self, other)

    def __invert__(self):
        return Not(self)

    def __repr__(self):
        return f"Formula({format_formula(self)!r})"

    def __str__(self):
        return format_formula(self)


TRUE = Formula("const", (), True)
FALSE = Formula("const", (), False)


def Const(value: bool) -> Formula:
    return TRUE if value else FALSE


def Var(name: str) -> Formula:
    return Formula("var", (), name)


def Constraint(atom: NraAtom) -> Formula:
    """Leaf for an arithmetic constraint; stored canonically (maybe under a negation)."""
    canon, positive = canonicalize_atom(atom)
    leaf = Formula("atom", (), canon)
    return leaf if positive else Formula("not", (leaf,))


def Not(child: Formula) -> Formula:
    return Formula("not", (child,))


def _nary(op: str, children) -> Formula:
    flat = []
    for c in children:
        if c.op == op:
            flat.extend(c.args)
        else:
            flat.append(c)
    if not flat:
        return TRUE if op == "and" else FALSE
    if len(flat) == 1:
        return flat[0]
    return Formula(op, tuple(flat))


def And(*children: Formula) -> Formula:
    return _nary("and", children)


def Or(*children: Formula) -> Formula:
    return _nary("or", children)


def Implies(a: Formula, b: Formula) -> Formula:
    return Formula("implies", (a, b))


def Iff(a: Formula, b: Formula) -> Formula:
    return Formula("iff", (a, b))


# --------------------------------------------------------------------------- printing

_PREC = {"iff": 1, "implies": 2, "or": 3, "and": 4, "not": 5}


def format_formula(f: Formula) -> str:
    """Source-syntax rendering; ``parse_formula(format_formula(f))`` rebuilds ``f``."""
    memo: dict[int, str] = {}

    def render(g: Formula) -> tuple[str, int]:
        op = g.op
        if op == "const":
            return ("true" if g.payload else "false"), 9
        if op == "var":
            return g.payload, 9
        if op == "atom":
            return str(g.payload), 6
        if op == "not":
            child = g.args[0]
            if child.op == "atom":
                return describe_literal(child.payload, False), 6
            text, prec = render(child)
            return "!" + (text if prec > 6 else f"({text})"), 5
        parts = []
        for child in g.args:
            text, prec = render(child)
            # nested binary connectives and lower precedence always get parentheses
            parts.append(text if prec > _PREC[op] and prec != _PREC["implies"] else f"({text})")
        sep = {"and": " & ", "or": " | ", "implies": " -> ", "iff": " <-> "}[op]
        return sep.join(parts), _PREC[op]

    return render(f)[0]


# --------------------------------------------------------------------------- registry & weights


@dataclass
class VariableRegistry:
    kinds: dict[str, str] = field(default_factory=dict)

    def declare(self, name: str, kind: str):
        if kind not in ("bool", "real"):
            raise ValueError(f"unknown variable kind {kind!r}")
        if name in self.kinds:
            raise ValueError(f"duplicate variable {name!r}")
        self.kinds[name] = kind

    def kind(self, name: str) -> str | None:
        return self.kinds.get(name)

    @property
    def bools(self) -> list[str]:
        return sorted(n for n, k in self.kinds.items() if k == "bool")

    @property
    def reals(self) -> list[str]:
        return sorted(n for n, k in self.kinds.items() if k == "real")

    def check(self, f: Formula):
        for name in f.bool_vars:
            if self.kinds.get(name) != "bool":
                raise ValueError(f"unknown Boolean variable {name!r}")
        for name in f.real_vars:
            if self.kinds.get(name) != "real":
                raise ValueError(f"unknown real variable {name!r}")


@dataclass
class WeightSpec:
    """Factorized weights: a probability per Boolean, a density per real."""

    bool_weights: dict[str, Fraction] = field(default_factory=dict)
    densities: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, p in self.bool_weights.items():
            if not 0 <= p <= 1:
                raise ValueError(f"weight of {name!r} outside [0, 1]: {p}")

    def covers(self, f: Formula) -> bool:
        return f.bool_vars <= self.bool_weights.keys() and f.real_vars <= self.densities.keys()

    def with_bool_weights(self, **updates) -> "WeightSpec":
        weights = dict(self.bool_weights)
        weights.update({k: Fraction(v) for k, v in updates.items()})
        return WeightSpec(weights, dict(self.densities))


# --------------------------------------------------------------------------- evaluation


def eval_formula(f: Formula, assignment: Mapping[str, object]) -> bool:
    """Truth value of ``f``; Booleans map to bool, reals to numbers."""
    memo: dict[int, bool] = {}

    def ev(g: Formula) -> bool:
        hit = memo.get(id(g))
        if hit is not None:
            return hit
        op = g.op
        if op == "const":
            r = g.payload
        elif op == "var":
            try:
                r = bool(assignment[g.payload])
            except KeyError:
                raise KeyError(f"missing value for Boolean variable {g.payload}") from None
        elif op == "atom":
            r = g.payload.holds(assignment)
        elif op == "not":
            r = not ev(g.args[0])
        elif op == "and":
            r = all(ev(a) for a in g.args)
        elif op == "or":
            r = any(ev(a) for a in g.args)
        elif op == "implies":
            r = (not ev(g.args[0])) or ev(g.args[1])
        else:
            r = ev(g.args[0]) == ev(g.args[1])
        memo[id(g)] = r
        return r

    return ev(f)


def substitute(f: Formula, mapping: Mapping[Formula, Formula]) -> Formula:
    """Replace leaves (by identity) according to ``mapping``."""
    memo: dict[int, Formula] = {}

    def sub(g: Formula) -> Formula:
        if g in mapping:
            return mapping[g]
        hit = memo.get(id(g))
        if hit is not None:
            return hit
        if not g.args:
            r = g
        else:
            args = tuple(sub(a) for a in g.args)
            r = _rebuild(g.op, args)
        memo[id(g)] = r
        return r

    return sub(f)


def _rebuild(op: str, args: tuple) -> Formula:
    if op == "not":
        return Not(args[0])
    if op == "and":
        return And(*args)
    if op == "or":
        return Or(*args)
    return Formula(op, args)


# --------------------------------------------------------------------------- abstraction


def abstraction_name(atom: NraAtom) -> str:
    return f"[{atom}]"


@dataclass
class AbstractionMap:
    to_var: dict[NraAtom, str] = field(default_factory=dict)
    to_atom: dict[str, NraAtom] = field(default_factory=dict)

    def add(self, atom: NraAtom) -> str:
        name = self.to_var.get(atom)
        if name is None:
            name = abstraction_name(atom)
            self.to_var[atom] = name
            self.to_atom[name] = atom
        return name

    def is_abstraction(self, var: str) -> bool:
        return var in self.to_atom

    def concretize(self, prop: Formula) -> Formula:
        mapping = {Var(n): Formula("atom", (), a) for n, a in self.to_atom.items()}
        return substitute(prop, mapping)

    def induced(self, assignment: Mapping[str, object]) -> dict[str, bool]:
        """Truth values of every abstraction variable under a concrete assignment."""
        return {n: a.holds(assignment) for n, a in self.to_atom.items()}


def abstract(f: Formula, amap: AbstractionMap | None = None) -> tuple[Formula, AbstractionMap]:
    """Replace every constraint leaf by a propositional variable."""
    amap = amap if amap is not None else AbstractionMap()
    mapping = {}
    for atom in sorted(f.atoms, key=lambda a: str(a)):
        mapping[Formula("atom", (), atom)] = Var(amap.add(atom))
    return substitute(f, mapping), amap
