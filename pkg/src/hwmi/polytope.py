"""Exact integration of multivariate polynomials over polytopes.

Variables are eliminated one at a time.  For each variable the region is split
by which lower and which upper bound is active, so the inner integral runs
between two affine functions of the remaining variables.
"""

from __future__ import annotations

import time
from fractions import Fraction
from itertools import product

ZERO = Fraction(0)
ONE = Fraction(1)


class Poly:
    """Sparse polynomial over indexed variables; monomials are exponent tuples."""

    __slots__ = ("n", "c")

    def __init__(self, n: int, coeffs: dict | None = None):
        self.n = n
        self.c = {m: v for m, v in (coeffs or {}).items() if v}

    @classmethod
    def const(cls, n, q) -> "Poly":
        return cls(n, {(0,) * n: Fraction(q)})

    @classmethod
    def var(cls, n, i) -> "Poly":
        m = [0] * n
        m[i] = 1
        return cls(n, {tuple(m): ONE})

    @classmethod
    def univariate(cls, n, i, coeffs) -> "Poly":
        out = {}
        for k, q in enumerate(coeffs):
            m = [0] * n
            m[i] = k
            out[tuple(m)] = Fraction(q)
        return cls(n, out)

    def __add__(self, other: "Poly") -> "Poly":
        out = dict(self.c)
        for m, v in other.c.items():
            out[m] = out.get(m, ZERO) + v
        return Poly(self.n, out)

    def __sub__(self, other: "Poly") -> "Poly":
        return self + other.scale(-1)

    def scale(self, q) -> "Poly":
        return Poly(self.n, {m: v * q for m, v in self.c.items()})

    def __mul__(self, other: "Poly") -> "Poly":
        out: dict = {}
        for m1, v1 in self.c.items():
            for m2, v2 in other.c.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                out[m] = out.get(m, ZERO) + v1 * v2
        return Poly(self.n, out)

    def is_zero(self) -> bool:
        return not self.c

    def constant(self) -> Fraction:
        return self.c.get((0,) * self.n, ZERO)

    def antiderivative(self, i: int) -> "Poly":
        out = {}
        for m, v in self.c.items():
            k = m[i] + 1
            mm = m[:i] + (k,) + m[i + 1:]
            out[mm] = v / k
        return Poly(self.n, out)

    def substitute(self, i: int, affine: "Poly") -> "Poly":
        """Replace variable ``i`` by a polynomial free of ``i``."""
        powers = [Poly.const(self.n, 1)]
        out = Poly(self.n)
        for m, v in sorted(self.c.items()):
            k = m[i]
            while len(powers) <= k:
                powers.append(powers[-1] * affine)
            rest = Poly(self.n, {m[:i] + (0,) + m[i + 1:]: v})
            out = out + rest * powers[k]
        return out


class Linear:
    """Affine form ``sum(a[i] * x[i]) + b``; a constraint means ``form >= 0``."""

    __slots__ = ("a", "b")

    def __init__(self, a, b):
        self.a = tuple(Fraction(x) for x in a)
        self.b = Fraction(b)

    def coef(self, i) -> Fraction:
        return self.a[i]

    def solve_for(self, i) -> "Linear":
        """Affine expression for ``x[i]`` on the hyperplane ``form = 0``."""
        ai = self.a[i]
        return Linear([(-x / ai if j != i else ZERO) for j, x in enumerate(self.a)], -self.b / ai)

    def __sub__(self, other: "Linear") -> "Linear":
        return Linear([x - y for x, y in zip(self.a, other.a)], self.b - other.b)

    def to_poly(self) -> Poly:
        n = len(self.a)
        out = {(0,) * n: self.b}
        for i, x in enumerate(self.a):
            if x:
                m = [0] * n
                m[i] = 1
                out[tuple(m)] = x
        return Poly(n, out)

    def range_over(self, box) -> tuple[Fraction, Fraction]:
        lo = hi = self.b
        for x, (l, h) in zip(self.a, box):
            if x > 0:
                lo += x * l
                hi += x * h
            elif x < 0:
                lo += x * h
                hi += x * l
        return lo, hi

    def normalized(self):
        for x in self.a:
            if x:
                s = abs(x)
                return (tuple(y / s for y in self.a), self.b / s)
        return (self.a, self.b)


class PolytopeTimeout(Exception):
    pass


class _Eliminator:
    def __init__(self, box, deadline=None):
        self.box = box
        self.deadline = deadline
        self.branches = 0

    def prune(self, cons, alive):
        """Drop constraints implied by the box, return None if one is infeasible on it."""
        box = [self.box[i] for i in range(len(self.box))]
        out = []
        seen = set()
        for c in cons:
            lo, hi = c.range_over(box)
            if hi < 0:
                return None
            if lo >= 0:
                continue
            key = c.normalized()
            if key in seen:
                continue
            seen.add(key)
            out.append(c)
        return out

    def run(self, poly: Poly, cons: list, order: list[int]) -> Poly:
        if self.deadline is not None and time.perf_counter() > self.deadline:
            raise PolytopeTimeout("exact elimination timed out")
        cons = self.prune(cons, order)
        if cons is None or poly.is_zero():
            return Poly(poly.n)
        if not order:
            return poly
        i = order[-1]
        rest = order[:-1]
        lowers, uppers, other = [], [], []
        for c in cons:
            a = c.coef(i)
            if a > 0:
                lowers.append(c.solve_for(i))  # x_i >= L
            elif a < 0:
                uppers.append(c.solve_for(i))  # x_i <= U
            else:
                other.append(c)
        lo_box, hi_box = self.box[i]
        n = poly.n
        lowers.append(Linear([0] * n, lo_box))
        uppers.append(Linear([0] * n, hi_box))
        anti = poly.antiderivative(i)
        total = Poly(n)
        for li, L in enumerate(lowers):
            for ui, U in enumerate(uppers):
                self.branches += 1
                extra = [U - L]
                extra += [L - L2 for k, L2 in enumerate(lowers) if k != li]
                extra += [U2 - U for k, U2 in enumerate(uppers) if k != ui]
                # ties between equal bounds are measure zero, so they may be counted in any branch;
                # keep exactly one by requiring strict dominance over earlier indices
                if any(_same(L, L2) for k, L2 in enumerate(lowers) if k < li):
                    continue
                if any(_same(U, U2) for k, U2 in enumerate(uppers) if k < ui):
                    continue
                if _const_negative(U - L):
                    continue
                inner = anti.substitute(i, U.to_poly()) - anti.substitute(i, L.to_poly())
                total = total + self.run(inner, other + extra, rest)
        return total


def _same(a: Linear, b: Linear) -> bool:
    return a.a == b.a and a.b == b.b


def _const_negative(c: Linear) -> bool:
    return not any(c.a) and c.b < 0


def integrate_polytope(poly: Poly, constraints: list, box, timeout: float | None = None) -> Fraction:
    """Exact integral of ``poly`` over ``box`` intersected with ``{c >= 0}``."""
    deadline = time.perf_counter() + timeout if timeout else None
    el = _Eliminator([(Fraction(a), Fraction(b)) for a, b in box], deadline)
    out = el.run(poly, list(constraints), list(range(poly.n)))
    return out.constant()


def integrate_pieces(factors, constraints, timeout: float | None = None) -> Fraction:
    """``factors[i]`` lists polynomial pieces ``((lo, hi), coeffs)`` of variable ``i``'s density."""
    n = len(factors)
    total = ZERO
    for combo in product(*factors):
        box = [iv for iv, _ in combo]
        poly = Poly.const(n, 1)
        for i, (_, coeffs) in enumerate(combo):
            poly = poly * Poly.univariate(n, i, coeffs)
        total += integrate_polytope(poly, constraints, box, timeout)
    return total
