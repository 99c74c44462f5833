"""The `.hwmi` model format and the `Model` container shared with the HAL frontend.

Grammar (``#`` starts a comment)::

    model      := statement*
    statement  := 'var' 'bool' NAME '~' 'bernoulli' '(' number ')' ';'
                | number '::' NAME ';'                       # same as above
                | 'var' 'real' NAME '~' density ';'
                | 'formula' NAME ':=' formula ';'
                | 'query' NAME ';'
                | 'evidence' formula ';'
    density    := ('normal' | 'uniform' | 'beta') '(' number ',' number ')'
                | 'piecewise' '(' piece (';' piece)* ')'
    piece      := '[' number ',' number ']' ':' number+      # coefficients of x^0, x^1, ...
    formula    := implies ('<->' implies)*
    implies    := or ('->' implies)?
    or         := and ('|' and)*
    and        := unary ('&' unary)*
    unary      := ('!' | '\\+') unary | primary
    primary    := 'true' | 'false' | NAME | '(' formula ')' | term cmp term
    cmp        := '<' | '<=' | '>' | '>=' | '=' | '!='
    term       := sums/products of numbers and real variables, '^' with a
                  positive rational exponent; each monomial has one variable

``NAME`` in a formula refers to a Boolean variable or a previously defined
formula.  ``normal(mu, sigma)`` takes the standard deviation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .arith import at_comparator, comparison, parse_arith, parse_constant
from .densities import PiecewisePolynomial, make_density
from .formula import FALSE, TRUE, And, Formula, Iff, Implies, Not, Or, Var, VariableRegistry, WeightSpec
from .lexer import ParseError, TokenStream, tokenize

KEYWORDS = {"var", "bool", "real", "formula", "query", "evidence", "true", "false"}


@dataclass
class GuardInfo:
    """A real variable that stands for ``base`` in the worlds where ``guard`` holds."""

    base: str
    guard: Formula
    guard_text: str = ""


@dataclass
class Model:
    registry: VariableRegistry = field(default_factory=VariableRegistry)
    weights: WeightSpec = field(default_factory=WeightSpec)
    formulas: dict[str, Formula] = field(default_factory=dict)
    queries: list[str] = field(default_factory=list)
    evidence: Formula | None = None
    guards: dict[str, GuardInfo] = field(default_factory=dict)
    source: str = "hwmi"

    def query_formula(self, name: str) -> Formula:
        return self.formulas[name]


class _ModelParser:
    def __init__(self, text: str):
        self.s = TokenStream(tokenize(text, comment="#"))
        self.model = Model()

    # -- statements
    def parse(self) -> Model:
        s = self.s
        while s.peek.kind != "EOF":
            if s.accept("var"):
                self.var_decl()
            elif s.peek.kind == "NUM" and s.lookahead().text == "::":
                tok = s.peek
                p = parse_constant(s)
                s.expect("::")
                name = s.expect_kind("IDENT", "a variable name")
                self.declare(name, "bool")
                self.set_weight(name, p, tok)
                s.expect(";")
            elif s.accept("formula"):
                name = s.expect_kind("IDENT", "a formula name")
                if name.text in self.model.formulas or self.model.registry.kind(name.text):
                    s.error(f"duplicate name {name.text!r}", name)
                s.expect(":=")
                self.model.formulas[name.text] = self.formula()
                s.expect(";")
            elif s.accept("query"):
                name = s.expect_kind("IDENT", "a formula name")
                if name.text not in self.model.formulas:
                    s.error(f"query names undeclared formula {name.text!r}", name)
                self.model.queries.append(name.text)
                s.expect(";")
            elif s.accept("evidence"):
                ev = self.formula()
                m = self.model
                m.evidence = ev if m.evidence is None else And(m.evidence, ev)
                s.expect(";")
            else:
                s.error(f"unexpected {s.peek.text or 'end of input'!r}")
        return self.model

    def declare(self, tok, kind):
        if tok.text in KEYWORDS:
            self.s.error(f"{tok.text!r} is a reserved word", tok)
        try:
            self.model.registry.declare(tok.text, kind)
        except ValueError as exc:
            self.s.error(str(exc), tok)

    def set_weight(self, tok, p: Fraction, where):
        if not 0 <= p <= 1:
            self.s.error(f"weight of {tok.text!r} outside [0, 1]: {p}", where)
        self.model.weights.bool_weights[tok.text] = p

    def var_decl(self):
        s = self.s
        kind = s.next()
        if kind.text not in ("bool", "real"):
            s.error("expected 'bool' or 'real'", kind)
        name = s.expect_kind("IDENT", "a variable name")
        self.declare(name, kind.text)
        s.expect("~")
        dist = s.expect_kind("IDENT", "a distribution")
        s.expect("(")
        if kind.text == "bool":
            if dist.text != "bernoulli":
                s.error("Boolean variables take bernoulli(p)", dist)
            where = s.peek
            self.set_weight(name, parse_constant(s), where)
        elif dist.text == "piecewise":
            self.model.weights.densities[name.text] = self.piecewise(dist)
        else:
            args = [parse_constant(s)]
            while s.accept(","):
                args.append(parse_constant(s))
            try:
                self.model.weights.densities[name.text] = make_density(dist.text, args)
            except ValueError as exc:
                s.error(str(exc), dist)
        s.expect(")")
        s.expect(";")

    def piecewise(self, tok):
        s = self.s
        pieces = []
        while True:
            s.expect("[")
            lo = parse_constant(s)
            s.expect(",")
            hi = parse_constant(s)
            s.expect("]")
            s.expect(":")
            coeffs = [parse_constant(s)]
            while not (s.at(";") or s.at(")")):
                coeffs.append(parse_constant(s))
            pieces.append((lo, hi, tuple(coeffs)))
            if not s.accept(";"):
                break
        try:
            return PiecewisePolynomial(tuple(pieces))
        except ValueError as exc:
            s.error(str(exc), tok)

    # -- formulas
    def formula(self) -> Formula:
        return parse_formula_tokens(self.s, self.resolve_bool, self.resolve_real)

    def resolve_bool(self, tok) -> Formula:
        m = self.model
        if tok.text in m.formulas:
            return m.formulas[tok.text]
        if m.registry.kind(tok.text) == "bool":
            return Var(tok.text)
        if m.registry.kind(tok.text) == "real":
            self.s.error(f"real variable {tok.text!r} used as a Boolean", tok)
        self.s.error(f"unknown variable {tok.text!r}", tok)

    def resolve_real(self, tok) -> str:
        kind = self.model.registry.kind(tok.text)
        if kind == "real":
            return tok.text
        if kind == "bool":
            self.s.error(f"Boolean variable {tok.text!r} used in arithmetic", tok)
        self.s.error(f"unknown real variable {tok.text!r}", tok)


def parse_formula_tokens(s: TokenStream, resolve_bool, resolve_real) -> Formula:
    def iff() -> Formula:
        out = implies()
        while s.accept("<->"):
            out = Iff(out, implies())
        return out

    def implies() -> Formula:
        lhs = disj()
        if s.accept("->"):
            return Implies(lhs, implies())
        return lhs

    def disj() -> Formula:
        parts = [conj()]
        while s.accept("|"):
            parts.append(conj())
        return parts[0] if len(parts) == 1 else Or(*parts)

    def conj() -> Formula:
        parts = [unary()]
        while s.accept("&"):
            parts.append(unary())
        return parts[0] if len(parts) == 1 else And(*parts)

    def unary() -> Formula:
        if s.accept("!") or s.accept("\\+"):
            return Not(unary())
        return primary()

    def primary() -> Formula:
        start = s.pos
        try:
            lhs = parse_arith(s, resolve_real)
            if at_comparator(s):
                tok = s.next()
                rhs = parse_arith(s, resolve_real)
                return comparison(lhs, tok.text, rhs, s, tok)
            s.error(f"expected a comparison operator, found {s.peek.text or 'end of input'!r}")
        except ParseError as exc:
            arith_error, arith_pos = exc, s.pos
        s.pos = start
        try:
            return boolean_primary()
        except ParseError as exc:
            # report whichever attempt got further
            if arith_pos > s.pos:
                raise arith_error from None
            raise

    def boolean_primary() -> Formula:
        tok = s.peek
        if s.accept("true"):
            return TRUE
        if s.accept("false"):
            return FALSE
        if tok.kind == "IDENT":
            s.next()
            return resolve_bool(tok)
        if s.accept("("):
            out = iff()
            s.expect(")")
            return out
        s.error(f"expected a formula, found {tok.text or 'end of input'!r}")

    return iff()


def parse_model(text: str) -> Model:
    """Parse `.hwmi` source into a `Model`; raises `ParseError`."""
    return _ModelParser(text).parse()


def parse_formula(text: str, registry: VariableRegistry, formulas: dict | None = None) -> Formula:
    """Parse a standalone formula against an existing registry."""
    s = TokenStream(tokenize(text))
    formulas = formulas or {}

    def rb(tok):
        if tok.text in formulas:
            return formulas[tok.text]
        if registry.kind(tok.text) == "bool":
            return Var(tok.text)
        s.error(f"unknown Boolean variable {tok.text!r}", tok)

    def rr(tok):
        if registry.kind(tok.text) == "real":
            return tok.text
        s.error(f"unknown real variable {tok.text!r}", tok)

    f = parse_formula_tokens(s, rb, rr)
    if s.peek.kind != "EOF":
        s.error(f"trailing input {s.peek.text!r}")
    return f


def format_model(model: Model) -> str:
    from .formula import format_formula

    lines = []
    for name in model.registry.bools:
        lines.append(f"var bool {name} ~ bernoulli({model.weights.bool_weights[name]});")
    for name in model.registry.reals:
        lines.append(f"var real {name} ~ {model.weights.densities[name]};")
    for name, f in model.formulas.items():
        lines.append(f"formula {name} := {format_formula(f)};")
    if model.evidence is not None:
        lines.append(f"evidence {format_formula(model.evidence)};")
    for q in model.queries:
        lines.append(f"query {q};")
    return "\n".join(lines) + "\n"
