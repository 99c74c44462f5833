"""Closed-form results: rational combinations of Gaussian and Beta CDF terms."""

from __future__ import annotations

import math
from fractions import Fraction

from scipy import special


def std_normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def _fmt(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


class ClosedForm:
    """Sum of ``coef * prod(factors)``.

    Factors are ``("Phi", z)`` for the standard normal CDF at a rational
    point and ``("I", x, a, b)`` for the regularized incomplete Beta
    function.  ``Phi`` arguments are kept non-negative (``Phi(-z)`` is
    rewritten as ``1 - Phi(z)``) so equal values have equal forms.
    """

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms: dict[tuple, Fraction] = {}
        for k, v in (terms or {}).items():
            if v != 0:
                self.terms[k] = Fraction(v)

    @classmethod
    def const(cls, q) -> "ClosedForm":
        return cls({(): Fraction(q)})

    @classmethod
    def phi(cls, z) -> "ClosedForm":
        z = Fraction(z)
        if z == 0:
            return cls.const(Fraction(1, 2))
        if z < 0:
            return cls.const(1) - cls({(("Phi", -z),): 1})
        return cls({(("Phi", z),): 1})

    @classmethod
    def betai(cls, x, a, b) -> "ClosedForm":
        x = Fraction(x)
        if x <= 0:
            return cls.const(0)
        if x >= 1:
            return cls.const(1)
        return cls({(("I", x, Fraction(a), Fraction(b)),): 1})

    def __add__(self, other):
        other = _coerce(other)
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, Fraction(0)) + v
        return ClosedForm(out)

    __radd__ = __add__

    def __neg__(self):
        return ClosedForm({k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-_coerce(other))

    def __rsub__(self, other):
        return _coerce(other) - self

    def __mul__(self, other):
        other = _coerce(other)
        out: dict[tuple, Fraction] = {}
        for k1, v1 in self.terms.items():
            for k2, v2 in other.terms.items():
                k = tuple(sorted(k1 + k2, key=repr))
                out[k] = out.get(k, Fraction(0)) + v1 * v2
        return ClosedForm(out)

    __rmul__ = __mul__

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = ClosedForm.const(other)
        return isinstance(other, ClosedForm) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    @property
    def is_rational(self) -> bool:
        return all(k == () for k in self.terms)

    def rational(self) -> Fraction:
        if not self.is_rational:
            raise ValueError("closed form contains transcendental terms")
        return self.terms.get((), Fraction(0))

    def value(self) -> float:
        total = math.fsum(float(v) * math.prod(_factor_value(f) for f in k) for k, v in self.sorted_terms())
        return total

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda kv: (len(kv[0]), repr(kv[0])))

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for k, v in self.sorted_terms():
            factors = [_factor_str(f) for f in k]
            if not factors:
                body = _fmt(abs(v))
            elif abs(v) == 1:
                body = "*".join(factors)
            else:
                body = "*".join([_fmt(abs(v))] + factors)
            parts.append(("-" if v < 0 else "+", body))
        text = ("-" if parts[0][0] == "-" else "") + parts[0][1]
        for sign, body in parts[1:]:
            text += f" {sign} {body}"
        return text

    __repr__ = __str__


def _coerce(x) -> ClosedForm:
    if isinstance(x, ClosedForm):
        return x
    return ClosedForm.const(x)


def _factor_value(f) -> float:
    if f[0] == "Phi":
        return std_normal_cdf(float(f[1]))
    _, x, a, b = f
    return float(special.betainc(float(a), float(b), float(x)))


def _factor_str(f) -> str:
    if f[0] == "Phi":
        return f"Phi({_fmt(f[1])})"
    _, x, a, b = f
    return f"I({_fmt(x)}; {_fmt(a)}, {_fmt(b)})"
