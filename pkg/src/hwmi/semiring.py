"""Commutative semirings, literal labelings and bottom-up circuit evaluation.

The probability density semiring pairs an `AlgebraicExpr` with the set of
density bindings of the real variables it mentions.  Its neutral elements are
``(0, {})`` and ``(1, {})``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from .algebra import ONE, ZERO, AlgebraicExpr, IversonBracket, simplify_intervals
from .compiler import DdnnfCircuit
from .densities import Density
from .formula import AbstractionMap, WeightSpec


class LabelError(KeyError):
    """A literal has no label."""

    def __str__(self):
        return self.args[0] if self.args else "unlabeled literal"


class BindingConflict(ValueError):
    """One real variable bound to two different densities."""


@dataclass(frozen=True)
class Binding:
    var: str
    density: Density
    guard: str = ""  # printable guard of a guarded symbolic value

    def __str__(self):
        return f"{self.var}~{self.density}"


def merge_bindings(a: frozenset, b: frozenset) -> frozenset:
    if not a:
        return b
    if not b or a is b:
        return a
    out = a | b
    if len(out) == len(a) or len(out) == len(b):
        return out  # one side contains the other
    seen: dict[str, Density] = {}
    for bd in out:
        prev = seen.setdefault(bd.var, bd.density)
        if prev != bd.density:
            raise BindingConflict(f"conflicting densities for {bd.var}: {prev} and {bd.density}")
    return out


class SemiringElement:
    """``(expr, bindings)``; equality ignores bindings of variables the expression no longer mentions."""

    __slots__ = ("expr", "bindings", "_key")

    def __init__(self, expr: AlgebraicExpr, bindings: frozenset = frozenset()):
        self.expr = expr
        self.bindings = frozenset(bindings)
        self._key = None

    def key(self):
        if self._key is None:
            live = self.expr.canonical_variables
            self._key = (self.expr, frozenset(b for b in self.bindings if b.var in live))
        return self._key

    def __eq__(self, other):
        if not isinstance(other, SemiringElement):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def density_of(self, var: str) -> Density | None:
        for b in self.bindings:
            if b.var == var:
                return b.density
        return None

    def __str__(self):
        bs = ", ".join(sorted(str(b) for b in self.bindings))
        return f"({self.expr}, {{{bs}}})"

    __repr__ = __str__


E_PLUS = SemiringElement(ZERO)
E_TIMES = SemiringElement(ONE)


def oplus(x: SemiringElement, y: SemiringElement) -> SemiringElement:
    return SemiringElement(x.expr + y.expr, merge_bindings(x.bindings, y.bindings))


def otimes(x: SemiringElement, y: SemiringElement) -> SemiringElement:
    return SemiringElement(x.expr * y.expr, merge_bindings(x.bindings, y.bindings))


# --------------------------------------------------------------------------- semirings


class Semiring:
    name = "semiring"
    zero = None
    one = None

    def add(self, a, b):
        raise NotImplementedError

    def mul(self, a, b):
        raise NotImplementedError

    def simplify(self, a):
        return a

    def eq(self, a, b) -> bool:
        return a == b


class CountingSemiring(Semiring):
    name = "counting"
    zero, one = 0, 1

    def add(self, a, b):
        return a + b

    def mul(self, a, b):
        return a * b


class ProbabilitySemiring(Semiring):
    name = "probability"
    zero, one = Fraction(0), Fraction(1)

    def add(self, a, b):
        return a + b

    def mul(self, a, b):
        return a * b


class TropicalSemiring(Semiring):
    """(min, +) over floats; zero is +inf."""

    name = "tropical"
    zero, one = math.inf, 0.0

    def add(self, a, b):
        return min(a, b)

    def mul(self, a, b):
        return a + b


class DensitySemiring(Semiring):
    name = "density"
    zero, one = E_PLUS, E_TIMES

    def __init__(self, simplify: bool = True):
        self._simplify = simplify

    def add(self, a, b):
        return oplus(a, b)

    def mul(self, a, b):
        return otimes(a, b)

    def simplify(self, a):
        if not self._simplify:
            return a
        e = simplify_intervals(a.expr)
        return a if e is a.expr else SemiringElement(e, a.bindings)


COUNTING = CountingSemiring()
PROBABILITY = ProbabilitySemiring()
TROPICAL = TropicalSemiring()
DENSITY = DensitySemiring()

SEMIRINGS = {"counting": COUNTING, "probability": PROBABILITY, "density": DENSITY, "tropical": TROPICAL}


# --------------------------------------------------------------------------- labelings


class Labeling:
    """Maps ``(variable, polarity)`` to a semiring element; results are cached."""

    def __init__(self, fn: Callable[[str, bool], object], semiring: Semiring = DENSITY):
        self.fn = fn
        self.semiring = semiring
        self._cache: dict = {}

    def __call__(self, var: str, positive: bool = True):
        k = (var, positive)
        hit = self._cache.get(k)
        if hit is None and k not in self._cache:
            hit = self._cache[k] = self.fn(var, positive)
        return hit

    @classmethod
    def from_table(cls, table: dict, semiring: Semiring) -> "Labeling":
        def fn(var, positive):
            try:
                return table[(var, positive)]
            except KeyError:
                raise LabelError(f"unlabeled literal {'' if positive else '~'}{var}") from None

        return cls(fn, semiring)


def density_labeling(weights: WeightSpec, amap: AbstractionMap | None = None, guards=None) -> Labeling:
    """Boolean literals get ``(p, {})``/``(1-p, {})``; abstraction literals get brackets with the atom's densities."""
    amap = amap or AbstractionMap()
    guards = guards or {}

    def fn(var, positive):
        if amap.is_abstraction(var):
            atom = amap.to_atom[var]
            bindings = []
            for v in sorted(atom.variables):
                d = weights.densities.get(v)
                if d is None:
                    raise LabelError(f"real variable {v} has no density")
                g = guards.get(v)
                bindings.append(Binding(v, d, g.guard_text if g is not None else ""))
            return SemiringElement(AlgebraicExpr.bracket(IversonBracket(atom, positive)), frozenset(bindings))
        p = weights.bool_weights.get(var)
        if p is None:
            raise LabelError(f"unlabeled literal {var}")
        return SemiringElement(AlgebraicExpr.const(p if positive else 1 - p))

    return Labeling(fn, DENSITY)


def probability_labeling(weights: WeightSpec) -> Labeling:
    def fn(var, positive):
        p = weights.bool_weights.get(var)
        if p is None:
            raise LabelError(f"unlabeled literal {var} (the probability semiring needs Boolean weights)")
        return Fraction(p) if positive else 1 - Fraction(p)

    return Labeling(fn, PROBABILITY)


def counting_labeling() -> Labeling:
    return Labeling(lambda var, positive: 1, COUNTING)


def label(lit, weights: WeightSpec, amap: AbstractionMap | None = None) -> SemiringElement:
    """Density-semiring label of ``lit``: a variable name, ``(name, polarity)`` or a literal formula."""
    if isinstance(lit, str):
        var, positive = lit, True
    elif isinstance(lit, tuple):
        var, positive = lit
    else:
        f = lit
        positive = True
        while f.op == "not":
            f, positive = f.args[0], not positive
        if f.op != "var":
            raise LabelError(f"not a literal: {lit}")
        var = f.payload
    return density_labeling(weights, amap)(var, positive)


# --------------------------------------------------------------------------- evaluation


def amc_evaluate(c: DdnnfCircuit, alpha: Labeling, semiring: Semiring | None = None):
    """Bottom-up semiring fold over the circuit.

    Decision nodes ``O(v, low, high)`` evaluate to
    ``alpha(~v) * low + alpha(v) * high``; plain ORs (``v = 0``) to ``low + high``.
    """
    sr = semiring or alpha.semiring
    names = c.var_names
    vals: list = [None] * len(c.nodes)
    seen = c.reachable()
    for i, node in enumerate(c.nodes):
        if not seen[i]:
            continue
        kind = node[0]
        if kind == "T":
            r = sr.one
        elif kind == "F":
            r = sr.zero
        elif kind == "L":
            r = alpha(names[node[1]], node[2])
        elif kind == "A":
            ch = node[1]
            r = vals[ch[0]]
            for k in ch[1:]:
                r = sr.mul(r, vals[k])
            r = sr.simplify(r)
        else:
            var, lo, hi = node[1], node[2], node[3]
            if var:
                name = names[var]
                r = sr.add(sr.mul(alpha(name, False), vals[lo]), sr.mul(alpha(name, True), vals[hi]))
            else:
                r = sr.add(vals[lo], vals[hi])
            r = sr.simplify(r)
        vals[i] = r
    return vals[c.root]
