"""Sum-of-products expressions over rationals, opaque symbols and Iverson brackets.

A monomial is ``coef * prod(brackets) * prod(symbols ** k)``.  Brackets are
idempotent and a bracket times its complement is zero; those two rules plus
coefficient merging are applied on construction.  Equality compares the
expansion where every negated bracket ``[~l]`` is rewritten as ``1 - [l]``,
which is a unique normal form, so ``[l] + [~l] == 1`` and all semiring laws
hold under ``==``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Mapping

from .formula import NraAtom, canonicalize_atom, describe_literal


@dataclass(frozen=True)
class IversonBracket:
    atom: NraAtom  # canonical
    positive: bool = True

    @classmethod
    def of(cls, atom: NraAtom, positive: bool = True) -> "IversonBracket":
        canon, pol = canonicalize_atom(atom)
        return cls(canon, pol == positive)

    @cached_property
    def _hash(self) -> int:
        return hash((self.atom, self.positive))

    def __hash__(self):
        return self._hash

    def negate(self) -> "IversonBracket":
        return IversonBracket(self.atom, not self.positive)

    @property
    def key(self):
        a = self.atom
        return (a.variables, tuple((v, p, c) for c, v, p in a.terms), a.bound, a.comparator, not self.positive)

    def holds(self, values) -> bool:
        return self.atom.holds(values) == self.positive

    @property
    def variables(self):
        return self.atom.variables

    def __str__(self):
        return "[" + describe_literal(self.atom, self.positive).replace(" ", "") + "]"


Monomial = tuple  # (frozenset[IversonBracket], tuple[(symbol, exponent), ...])

_ONE_MONO: Monomial = (frozenset(), ())


def _mono_key(m: Monomial):
    brackets, symbols = m
    return (tuple(sorted(b.key for b in brackets)), symbols)


def _is_contradictory(brackets: frozenset) -> bool:
    return any(b.negate() in brackets for b in brackets if b.positive)


def _mul_symbols(a, b):
    if not a:
        return b
    if not b:
        return a
    out = dict(a)
    for s, k in b:
        out[s] = out.get(s, 0) + k
    return tuple(sorted(out.items()))


def _merge_complements(terms: dict) -> dict:
    """Rewrite ``c*m*[l] + c*m*[~l]`` to ``c*m`` until no such pair remains."""
    changed = True
    while changed:
        changed = False
        index = {}
        for mono, coef in terms.items():
            brackets, symbols = mono
            for b in brackets:
                rest = (brackets - {b}, symbols)
                index.setdefault((rest, b.atom), {})[b.positive] = (mono, coef)
        for (rest, _), sides in index.items():
            if len(sides) == 2 and sides[True][1] == sides[False][1]:
                m_pos, m_neg = sides[True][0], sides[False][0]
                if m_pos not in terms or m_neg not in terms:
                    continue
                coef = terms.pop(m_pos)
                del terms[m_neg]
                total = terms.get(rest, Fraction(0)) + coef
                if total:
                    terms[rest] = total
                else:
                    terms.pop(rest, None)
                changed = True
                break
    return terms


class AlgebraicExpr:
    __slots__ = ("terms", "_canon")

    def __init__(self, terms: Mapping[Monomial, Fraction] | None = None, _raw=False):
        if _raw:
            self.terms = dict(terms)
        else:
            acc: dict[Monomial, Fraction] = {}
            for mono, coef in (terms or {}).items():
                if coef == 0 or _is_contradictory(mono[0]):
                    continue
                acc[mono] = acc.get(mono, Fraction(0)) + Fraction(coef)
            self.terms = _merge_complements({m: c for m, c in acc.items() if c != 0})
        self._canon = None

    # -- constructors
    @classmethod
    def const(cls, q) -> "AlgebraicExpr":
        q = Fraction(q)
        return cls({_ONE_MONO: q} if q else {}, _raw=True)

    @classmethod
    def bracket(cls, b: IversonBracket) -> "AlgebraicExpr":
        return cls({(frozenset((b,)), ()): Fraction(1)}, _raw=True)

    @classmethod
    def symbol(cls, name: str) -> "AlgebraicExpr":
        return cls({(frozenset(), ((name, 1),)): Fraction(1)}, _raw=True)

    # -- arithmetic
    def __add__(self, other):
        other = _coerce(other)
        if not other.terms:
            return self
        if not self.terms:
            return other
        a, b = self._scalar(), other._scalar()
        if a is not None and b is not None:
            return AlgebraicExpr.const(a + b)
        acc = dict(self.terms)
        for m, c in other.terms.items():
            acc[m] = acc.get(m, Fraction(0)) + c
        return AlgebraicExpr(acc)

    __radd__ = __add__

    def __neg__(self):
        return AlgebraicExpr({m: -c for m, c in self.terms.items()}, _raw=True)

    def __sub__(self, other):
        return self + (-_coerce(other))

    def __rsub__(self, other):
        return _coerce(other) - self

    def __mul__(self, other):
        other = _coerce(other)
        if not self.terms or not other.terms:
            return AlgebraicExpr()
        if self.is_one():
            return other
        if other.is_one():
            return self
        a, b = self._scalar(), other._scalar()
        if a is not None:
            return other._scale(a)
        if b is not None:
            return self._scale(b)
        acc: dict[Monomial, Fraction] = {}
        for (b1, s1), c1 in self.terms.items():
            for (b2, s2), c2 in other.terms.items():
                brackets = b1 | b2
                if _is_contradictory(brackets):
                    continue
                m = (brackets, _mul_symbols(s1, s2))
                acc[m] = acc.get(m, Fraction(0)) + c1 * c2
        return AlgebraicExpr(acc)

    __rmul__ = __mul__

    def _scalar(self) -> Fraction | None:
        if len(self.terms) == 1:
            return self.terms.get(_ONE_MONO)
        return None

    def _scale(self, q: Fraction) -> "AlgebraicExpr":
        # scaling keeps a normalized expression normalized
        return AlgebraicExpr({m: c * q for m, c in self.terms.items()}, _raw=True)

    # -- queries
    def is_zero(self) -> bool:
        return not self.terms

    def is_one(self) -> bool:
        return len(self.terms) == 1 and self.terms.get(_ONE_MONO) == 1

    def constant_value(self) -> Fraction | None:
        if not self.terms:
            return Fraction(0)
        if set(self.terms) == {_ONE_MONO}:
            return self.terms[_ONE_MONO]
        return None

    @property
    def variables(self) -> frozenset[str]:
        out = set()
        for brackets, _ in self.terms:
            for b in brackets:
                out.update(b.variables)
        return frozenset(out)

    @property
    def canonical_variables(self) -> frozenset[str]:
        """Real variables that survive in the normal form (cancelled brackets drop out)."""
        out = set()
        for atoms, _ in self.canonical():
            for a in atoms:
                out.update(a.variables)
        return frozenset(out)

    @property
    def symbols(self) -> frozenset[str]:
        return frozenset(s for _, syms in self.terms for s, _ in syms)

    def monomials(self):
        """(coef, brackets sorted, symbols) in deterministic order."""
        for mono in sorted(self.terms, key=_mono_key):
            brackets, symbols = mono
            yield self.terms[mono], sorted(brackets, key=lambda b: b.key), symbols

    def canonical(self) -> dict:
        """Normal form: positive brackets only (``[~l]`` expanded as ``1 - [l]``)."""
        if self._canon is None:
            out: dict = {}
            for (brackets, symbols), coef in self.terms.items():
                pos = frozenset(b.atom for b in brackets if b.positive)
                neg = [b.atom for b in brackets if not b.positive]
                for k in range(len(neg) + 1):
                    sign = -1 if k % 2 else 1
                    for subset in combinations(neg, k):
                        key = (pos | frozenset(subset), symbols)
                        out[key] = out.get(key, Fraction(0)) + sign * coef
            self._canon = {k: v for k, v in out.items() if v != 0}
        return self._canon

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = AlgebraicExpr.const(other)
        if not isinstance(other, AlgebraicExpr):
            return NotImplemented
        if self.terms == other.terms:
            return True
        return self.canonical() == other.canonical()

    def __hash__(self):
        return hash(frozenset(self.canonical().items()))

    def evaluate(self, values: Mapping[str, object], symbols: Mapping[str, object] | None = None):
        """Pointwise value at a real assignment (and symbol values)."""
        symbols = symbols or {}
        total = 0
        for coef, brackets, syms in self.monomials():
            if all(b.holds(values) for b in brackets):
                term = coef
                for s, k in syms:
                    term = term * symbols[s] ** k
                total = total + term
        return total

    def substitute_symbols(self, values: Mapping[str, object]) -> "AlgebraicExpr":
        out = AlgebraicExpr()
        for coef, brackets, syms in self.monomials():
            term = AlgebraicExpr({(frozenset(brackets), ()): coef}, _raw=True)
            for s, k in syms:
                factor = _coerce(values[s]) if s in values else AlgebraicExpr.symbol(s)
                for _ in range(k):
                    term = term * factor
            out = out + term
        return out

    # -- printing
    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for coef, brackets, syms in self.monomials():
            factors = [str(b) for b in brackets]
            factors += [s if k == 1 else f"{s}^{k}" for s, k in syms]
            mag = abs(coef)
            if not factors:
                body = format_rational(mag)
            elif mag == 1:
                body = "*".join(factors)
            else:
                body = "*".join([format_rational(mag)] + factors)
            parts.append(("-" if coef < 0 else "+", body))
        text = ("-" if parts[0][0] == "-" else "") + parts[0][1]
        for sign, body in parts[1:]:
            text += f" {sign} {body}"
        return text

    def __repr__(self):
        return f"AlgebraicExpr({str(self)!r})"

    def to_json(self) -> str:
        rows = []
        for coef, brackets, syms in self.monomials():
            rows.append({
                "coef": format_rational(coef, decimal=False),
                "brackets": [str(b)[1:-1] for b in brackets],
                "symbols": {s: k for s, k in syms},
            })
        return json.dumps(rows, sort_keys=True)


ZERO = AlgebraicExpr()
ONE = AlgebraicExpr.const(1)


def _coerce(x) -> AlgebraicExpr:
    if isinstance(x, AlgebraicExpr):
        return x
    if isinstance(x, IversonBracket):
        return AlgebraicExpr.bracket(x)
    return AlgebraicExpr.const(x)


def format_rational(q: Fraction, decimal: bool = True) -> str:
    q = Fraction(q)
    if q.denominator == 1:
        return str(q.numerator)
    if decimal:
        d = q.denominator
        twos = fives = 0
        while d % 2 == 0:
            d //= 2
            twos += 1
        while d % 5 == 0:
            d //= 5
            fives += 1
        if d == 1 and max(twos, fives) <= 12:
            digits = max(twos, fives)
            return f"{float(q):.{digits}f}".rstrip("0")
    return f"{q.numerator}/{q.denominator}"


def expr_add(a: AlgebraicExpr, b: AlgebraicExpr) -> AlgebraicExpr:
    return a + b


def expr_mul(a: AlgebraicExpr, b: AlgebraicExpr) -> AlgebraicExpr:
    return a * b


def expr_sum(items: Iterable[AlgebraicExpr]) -> AlgebraicExpr:
    acc: dict = {}
    for e in items:
        for m, c in e.terms.items():
            acc[m] = acc.get(m, Fraction(0)) + c
    return AlgebraicExpr(acc)


# --------------------------------------------------------------------------- intervals


def univariate_bound(b: IversonBracket):
    """Classify a linear univariate bracket ``[x op c]``.

    Returns ``(var, kind, value, closed)`` with kind in lower/upper/point/hole,
    or None for brackets the interval rules do not touch.
    """
    a = b.atom
    if len(a.terms) != 1 or a.terms[0][2] != 1:
        return None
    var, c = a.terms[0][1], a.bound
    if a.comparator == "<=":
        return (var, "upper", c, True) if b.positive else (var, "lower", c, False)
    if a.comparator == "<":
        return (var, "upper", c, False) if b.positive else (var, "lower", c, True)
    return (var, "point", c, True) if b.positive else (var, "hole", c, True)


def _upper_bracket(var, c, closed):
    return IversonBracket(NraAtom(((Fraction(1), var, Fraction(1)),), "<=" if closed else "<", c), True)


def _lower_bracket(var, c, closed):
    return IversonBracket(NraAtom(((Fraction(1), var, Fraction(1)),), "<" if closed else "<=", c), False)


def _point_bracket(var, c):
    return IversonBracket(NraAtom(((Fraction(1), var, Fraction(1)),), "=", c), True)


def _hole_bracket(var, c):
    return IversonBracket(NraAtom(((Fraction(1), var, Fraction(1)),), "=", c), False)


def interval_of(bounds):
    """Intersect classified bounds of one variable.

    Returns None when empty, else ``(lo, lo_closed, hi, hi_closed, point, holes)``
    with ``None`` for a missing side.
    """
    lo = hi = None
    lo_closed = hi_closed = True
    points, holes = set(), set()
    for _, kind, c, closed in bounds:
        if kind == "lower":
            if lo is None or c > lo or (c == lo and not closed):
                lo, lo_closed = c, closed
        elif kind == "upper":
            if hi is None or c < hi or (c == hi and not closed):
                hi, hi_closed = c, closed
        elif kind == "point":
            points.add(c)
        else:
            holes.add(c)
    if len(points) > 1:
        return None

    def inside(x):
        if lo is not None and (x < lo or (x == lo and not lo_closed)):
            return False
        if hi is not None and (x > hi or (x == hi and not hi_closed)):
            return False
        return True

    if points:
        (p,) = points
        if not inside(p) or p in holes:
            return None
        return (None, True, None, True, p, frozenset())
    if lo is not None and hi is not None:
        if lo > hi or (lo == hi and not (lo_closed and hi_closed)):
            return None
        if lo == hi:
            return (None, True, None, True, lo, frozenset()) if lo not in holes else None
    kept = set()
    for h in holes:
        if lo is not None and h == lo and lo_closed:
            lo_closed = False
        elif hi is not None and h == hi and hi_closed:
            hi_closed = False
        elif inside(h):
            kept.add(h)
    return (lo, lo_closed, hi, hi_closed, None, frozenset(kept))


def _simplify_brackets(brackets: frozenset):
    per_var: dict[str, list] = {}
    other = []
    for b in brackets:
        info = univariate_bound(b)
        if info is None:
            other.append(b)
        else:
            per_var.setdefault(info[0], []).append(info)
    out = set(other)
    for var, bounds in per_var.items():
        iv = interval_of(bounds)
        if iv is None:
            return None
        lo, lo_closed, hi, hi_closed, point, holes = iv
        if point is not None:
            out.add(_point_bracket(var, point))
            continue
        if lo is not None:
            out.add(_lower_bracket(var, lo, lo_closed))
        if hi is not None:
            out.add(_upper_bracket(var, hi, hi_closed))
        out.update(_hole_bracket(var, h) for h in holes)
    return frozenset(out)


def simplify_intervals(e: AlgebraicExpr) -> AlgebraicExpr:
    """Intersect linear univariate brackets of each variable within every monomial."""
    acc: dict[Monomial, Fraction] = {}
    changed = False
    for (brackets, symbols), coef in e.terms.items():
        if len(brackets) < 2:
            acc[(brackets, symbols)] = acc.get((brackets, symbols), Fraction(0)) + coef
            continue
        simplified = _simplify_brackets(brackets)
        if simplified != brackets:
            changed = True
        if simplified is None:
            continue
        m = (simplified, symbols)
        acc[m] = acc.get(m, Fraction(0)) + coef
    if not changed:
        return e
    return AlgebraicExpr(acc)
