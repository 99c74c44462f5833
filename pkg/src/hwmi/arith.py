"""Arithmetic terms inside constraints: sums of ``coef * var ^ power``."""

from __future__ import annotations

from fractions import Fraction
from typing import Callable

from .formula import FALSE, TRUE, Constraint, Formula, NraAtom
from .lexer import ParseError, TokenStream

# monomial: sorted tuple of (var, power); the constant monomial is ()
Poly = dict


def _const(q) -> Poly:
    q = Fraction(q)
    return {(): q} if q else {}


def _add(a: Poly, b: Poly, sign=1) -> Poly:
    out = dict(a)
    for m, c in b.items():
        v = out.get(m, Fraction(0)) + sign * c
        if v:
            out[m] = v
        else:
            out.pop(m, None)
    return out


def _mul(a: Poly, b: Poly) -> Poly:
    out: Poly = {}
    for m1, c1 in a.items():
        for m2, c2 in b.items():
            powers: dict[str, Fraction] = dict(m1)
            for v, p in m2:
                powers[v] = powers.get(v, Fraction(0)) + p
            m = tuple(sorted(powers.items()))
            out = _add(out, {m: c1 * c2})
    return out


def _constant_value(p: Poly):
    if any(m != () for m in p):
        return None
    return p.get((), Fraction(0))


def _power(base: Poly, exp: Fraction, tok, stream: TokenStream) -> Poly:
    c = _constant_value(base)
    if c is not None:
        if exp.denominator != 1:
            stream.error("non-integer power of a constant is not rational", tok)
        if c == 0 and exp < 0:
            stream.error("division by zero", tok)
        return _const(c ** exp.numerator)
    if exp <= 0:
        stream.error("powers of variables must be positive rationals", tok)
    if exp.denominator == 1:
        out = _const(1)
        for _ in range(exp.numerator):
            out = _mul(out, base)
        return out
    if len(base) != 1:
        stream.error("rational power of a sum is outside the supported fragment", tok)
    (m, coef), = base.items()
    if len(m) != 1 or coef != 1:
        stream.error("rational power must apply to a single variable", tok)
    (v, p), = m
    return {((v, p * exp),): Fraction(1)}


def parse_arith(stream: TokenStream, resolve: Callable) -> Poly:
    """Parse a polynomial expression; ``resolve(token)`` maps an identifier to a variable name."""

    def expr() -> Poly:
        out = term()
        while stream.at("+") or stream.at("-"):
            sign = 1 if stream.next().text == "+" else -1
            out = _add(out, term(), sign)
        return out

    def term() -> Poly:
        out = unary()
        while stream.at("*") or stream.at("/"):
            op = stream.next()
            rhs = unary()
            if op.text == "*":
                out = _mul(out, rhs)
            else:
                c = _constant_value(rhs)
                if c is None:
                    stream.error("division by a non-constant term", op)
                if c == 0:
                    stream.error("division by zero", op)
                out = _mul(out, _const(1 / c))
        return out

    def unary() -> Poly:
        if stream.accept("-"):
            return _mul(_const(-1), unary())
        if stream.accept("+"):
            return unary()
        return power()

    def power() -> Poly:
        base = primary()
        if stream.at("^"):
            tok = stream.next()
            exp_poly = unary() if not stream.at("(") else primary()
            exp = _constant_value(exp_poly)
            if exp is None:
                stream.error("exponent must be a constant", tok)
            return _power(base, exp, tok, stream)
        return base

    def primary() -> Poly:
        tok = stream.peek
        if tok.kind == "NUM":
            stream.next()
            return _const(tok.value)
        if tok.kind == "IDENT":
            stream.next()
            name = resolve(tok)
            return {((name, Fraction(1)),): Fraction(1)}
        if stream.accept("("):
            out = expr()
            stream.expect(")")
            return out
        stream.error(f"expected a term, found {tok.text or 'end of input'!r}")

    return expr()


def parse_constant(stream: TokenStream) -> Fraction:
    tok = stream.peek

    def no_vars(t):
        stream.error(f"expected a number, found {t.text!r}", t)

    value = _constant_value(parse_arith(stream, no_vars))
    if value is None:  # pragma: no cover - resolve() already rejects identifiers
        stream.error("expected a number", tok)
    return value


_CMP_TOKENS = ("<", "<=", ">", ">=", "=", "!=")


def at_comparator(stream: TokenStream) -> bool:
    return stream.peek.kind == "OP" and stream.peek.text in _CMP_TOKENS


def comparison(lhs: Poly, cmp: str, rhs: Poly, stream: TokenStream | None = None, tok=None) -> Formula:
    """Build the constraint ``lhs cmp rhs``; constant comparisons fold to true/false."""
    diff = _add(lhs, rhs, -1)
    bound = -diff.pop((), Fraction(0))
    terms = []
    for m, c in diff.items():
        if len(m) != 1:
            msg = "products of different variables are outside the supported fragment"
            if stream is not None:
                stream.error(msg, tok)
            raise ValueError(msg)
        (v, p), = m
        terms.append((c, v, p))
    if not terms:
        zero = Fraction(0)
        holds = {"<": zero < bound, "<=": zero <= bound, ">": zero > bound, ">=": zero >= bound,
                 "=": zero == bound, "!=": zero != bound}[cmp]
        return TRUE if holds else FALSE
    return Constraint(NraAtom(tuple(sorted(terms, key=lambda t: (t[1], t[2]))), cmp, bound))


def parse_comparison(stream: TokenStream, resolve: Callable) -> Formula:
    lhs = parse_arith(stream, resolve)
    if not at_comparator(stream):
        stream.error(f"expected a comparison operator, found {stream.peek.text or 'end of input'!r}")
    tok = stream.next()
    rhs = parse_arith(stream, resolve)
    return comparison(lhs, tok.text, rhs, stream, tok)


__all__ = ["parse_arith", "parse_constant", "parse_comparison", "comparison", "at_comparator", "ParseError"]
