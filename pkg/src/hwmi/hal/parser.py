"""Reader for `.halpl` programs.

    program    := item*
    item       := [weight '::'] atom [':-' body] '.'
                | 'query' '(' atom ')' '.'
                | 'evidence' '(' atom [',' ('true' | 'false')] ')' '.'
    weight     := number | density
    density    := ('normal' | 'uniform' | 'beta') '(' arg ',' arg ')'
    body       := literal (',' literal)*
    literal    := ('\\+' | 'not') atom | 'not' '(' atom ')'
                | 'valS' '(' term ',' VAR ')' | 'conS' '(' condition ')' | atom
    atom       := name ['(' term (',' term)* ')']

``%`` starts a comment; ``<-`` is not an arrow, use ``:-`` (or the arrow
character).  Names starting with an upper-case letter or ``_`` are logic
variables.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from ..arith import at_comparator, parse_arith
from ..lexer import ParseError, TokenStream, tokenize

DENSITY_NAMES = ("normal", "uniform", "beta")
BUILTINS = ("valS", "conS")


class HalSemanticError(ValueError):
    """A well-formed program whose meaning is outside the supported fragment."""


@dataclass(frozen=True)
class LogicVar:
    name: str

    def __str__(self):
        return self.name


def is_logic_var(name: str) -> bool:
    return name[0].isupper() or name[0] == "_"


def format_term(t) -> str:
    if isinstance(t, Fraction):
        return str(t.numerator) if t.denominator == 1 else str(float(t))
    return str(t)


@dataclass(frozen=True)
class Atom:
    pred: str
    args: tuple = ()

    @property
    def is_ground(self) -> bool:
        return not any(isinstance(a, LogicVar) for a in self.args)

    def __str__(self):
        if not self.args:
            return self.pred
        return f"{self.pred}({','.join(format_term(a) for a in self.args)})"


@dataclass(frozen=True)
class Condition:
    """``lhs cmp rhs`` over logic variables and numbers (polynomials as in `arith`)."""

    lhs: tuple  # frozen polynomial items
    cmp: str
    rhs: tuple
    text: str

    @property
    def variables(self) -> set[str]:
        out = set()
        for m, _ in self.lhs + self.rhs:
            out.update(v for v, _ in m)
        return out


@dataclass(frozen=True)
class Literal:
    kind: str  # atom | valS | conS
    positive: bool = True
    atom: Atom | None = None
    target: object = None  # valS: the continuous variable term
    var: LogicVar | None = None  # valS: the bound logic variable
    cond: Condition | None = None

    def __str__(self):
        if self.kind == "valS":
            return f"valS({format_term(self.target)},{self.var})"
        if self.kind == "conS":
            return f"conS({self.cond.text})"
        return str(self.atom) if self.positive else f"\\+{self.atom}"


@dataclass
class Clause:
    head: Atom
    body: tuple = ()
    prob: Fraction | None = None
    density: tuple | None = None  # (name, args)
    line: int = 0

    @property
    def is_distributional(self) -> bool:
        return self.density is not None

    def __str__(self):
        out = str(self.head)
        if self.prob is not None:
            out = f"{format_term(self.prob)}::{out}"
        elif self.density is not None:
            out = f"{self.density[0]}({','.join(format_term(a) for a in self.density[1])})::{out}"
        if self.body:
            out += " :- " + ", ".join(str(b) for b in self.body)
        return out + "."


@dataclass
class Program:
    clauses: list[Clause] = field(default_factory=list)
    queries: list[Atom] = field(default_factory=list)
    evidence: list[tuple[Atom, bool]] = field(default_factory=list)

    @property
    def facts(self):
        return [c for c in self.clauses if not c.body and not c.is_distributional]

    @property
    def distributional(self):
        return [c for c in self.clauses if c.is_distributional]

    @property
    def rules(self):
        return [c for c in self.clauses if c.body and not c.is_distributional]


def _freeze(poly: dict) -> tuple:
    return tuple(sorted(poly.items()))


class _Parser:
    def __init__(self, text: str):
        self.s = TokenStream(tokenize(text, comment="%"))
        self.program = Program()

    def parse(self) -> Program:
        s = self.s
        while s.peek.kind != "EOF":
            if s.at("query") and s.lookahead().text == "(":
                s.next()
                s.expect("(")
                self.program.queries.append(self.atom(ground=True))
                s.expect(")")
                s.expect(".")
            elif s.at("evidence") and s.lookahead().text == "(":
                s.next()
                s.expect("(")
                a = self.atom(ground=True)
                value = True
                if s.accept(","):
                    tok = s.next()
                    if tok.text not in ("true", "false"):
                        s.error("evidence value must be true or false", tok)
                    value = tok.text == "true"
                s.expect(")")
                s.expect(".")
                self.program.evidence.append((a, value))
            else:
                self.program.clauses.append(self.clause())
        return self.program

    def number(self) -> Fraction:
        s = self.s
        neg = s.accept("-")
        tok = s.expect_kind("NUM", "a number")
        return -tok.value if neg else tok.value

    def clause(self) -> Clause:
        s = self.s
        start = s.peek
        prob = density = None
        if s.peek.kind == "NUM" and s.lookahead().text == "::":
            prob = self.number()
            if not 0 <= prob <= 1:
                s.error(f"probability {prob} outside [0, 1]", start)
            s.expect("::")
        elif s.peek.text in DENSITY_NAMES and s.lookahead().text == "(":
            name = s.next().text
            s.expect("(")
            args = [self.density_arg()]
            while s.accept(","):
                args.append(self.density_arg())
            s.expect(")")
            if not s.at("::"):
                s.error(f"expected '::' after {name}(...)")
            s.next()
            density = (name, tuple(args))
        head = self.atom()
        if head.pred in BUILTINS:
            s.error(f"{head.pred} cannot be a clause head", start)
        body = ()
        if s.accept(":-"):
            body = tuple(self.body())
        s.expect(".")
        return Clause(head, body, prob, density, start.line)

    def density_arg(self):
        s = self.s
        if s.peek.kind == "IDENT" and is_logic_var(s.peek.text):
            return LogicVar(s.next().text)
        return self.number()

    def body(self):
        out = [self.literal()]
        while self.s.accept(","):
            out.append(self.literal())
        return out

    def literal(self) -> Literal:
        s = self.s
        if s.accept("\\+"):
            return Literal("atom", False, self.atom())
        if s.at("not"):
            s.next()
            if s.accept("("):
                a = self.atom()
                s.expect(")")
            else:
                a = self.atom()
            return Literal("atom", False, a)
        tok = s.peek
        if tok.text == "valS" and s.lookahead().text == "(":
            s.next()
            s.expect("(")
            target = self.term()
            if not s.accept(","):
                s.error("valS/2 takes a continuous variable and a logic variable", tok)
            v = s.expect_kind("IDENT", "a logic variable")
            if not is_logic_var(v.text):
                s.error("second argument of valS/2 must be a logic variable", v)
            if not s.at(")"):
                s.error("valS/2 takes exactly two arguments", tok)
            s.next()
            return Literal("valS", True, target=target, var=LogicVar(v.text))
        if tok.text == "conS" and s.lookahead().text == "(":
            s.next()
            s.expect("(")
            cond = self.condition(tok)
            if not s.at(")"):
                s.error("conS/1 takes exactly one argument", tok)
            s.next()
            return Literal("conS", True, cond=cond)
        return Literal("atom", True, self.atom())

    def condition(self, where) -> Condition:
        s = self.s
        first = s.pos

        def resolve(t):
            if not is_logic_var(t.text):
                s.error(f"conditions range over logic variables bound by valS, found {t.text!r}", t)
            return t.text

        lhs = parse_arith(s, resolve)
        if not at_comparator(s):
            s.error(f"expected a comparison in conS, found {s.peek.text or 'end of input'!r}")
        cmp = s.next().text
        rhs = parse_arith(s, resolve)
        text = _span_text(s.tokens[first:s.pos])
        return Condition(_freeze(lhs), cmp, _freeze(rhs), text)

    def term(self):
        s = self.s
        tok = s.peek
        if tok.kind == "NUM" or tok.text == "-":
            return self.number()
        if tok.kind == "IDENT":
            s.next()
            return LogicVar(tok.text) if is_logic_var(tok.text) else tok.text
        s.error(f"expected a term, found {tok.text or 'end of input'!r}")

    def atom(self, ground: bool = False) -> Atom:
        s = self.s
        tok = s.expect_kind("IDENT", "a predicate name")
        if is_logic_var(tok.text):
            s.error(f"predicate names must start in lower case: {tok.text!r}", tok)
        args = []
        if s.accept("("):
            args.append(self.term())
            while s.accept(","):
                args.append(self.term())
            s.expect(")")
        a = Atom(tok.text, tuple(args))
        if ground and not a.is_ground:
            s.error(f"{a} must be ground", tok)
        return a


def _span_text(tokens) -> str:
    return " ".join(t.text for t in tokens).replace("( ", "(").replace(" )", ")")


def parse_program(text: str) -> Program:
    """Parse `.halpl` source; raises `ParseError`."""
    return _Parser(text).parse()


__all__ = ["parse_program", "Program", "Clause", "Atom", "Literal", "Condition", "LogicVar", "ParseError",
           "HalSemanticError", "is_logic_var"]
