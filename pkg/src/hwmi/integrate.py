"""Integrating evaluated expressions against their densities.

Each monomial factors into groups of variables that share brackets.  A group
is integrated

* exactly from CDF differences when it is one variable with linear bounds,
* exactly by polytope elimination when its brackets are linear and every
  density is piecewise polynomial,
* numerically otherwise (root-bracketed quadrature for up to two variables,
  Monte-Carlo beyond).
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy import integrate as sp_integrate
from scipy import optimize

from .algebra import AlgebraicExpr, IversonBracket, interval_of, univariate_bound
from .closedform import ClosedForm
from .densities import INF, Density, Normal
from .polytope import Linear, PolytopeTimeout, integrate_pieces

log = logging.getLogger(__name__)

METHOD_RANK = {"exact": 0, "quadrature": 1, "monte-carlo": 2}


class IntegrationTimeout(Exception):
    pass


class IntegrationError(ValueError):
    pass


@dataclass
class Integrand:
    expr: AlgebraicExpr
    densities: dict[str, Density]

    def __post_init__(self):
        missing = self.expr.variables - self.densities.keys()
        if missing:
            raise IntegrationError(f"no density for {', '.join(sorted(missing))}")


@dataclass
class WmiResult:
    value: float
    exact: ClosedForm | None = None
    error_bound: float = 0.0
    method: str = "exact"
    warnings: list[str] = field(default_factory=list)

    @property
    def exact_str(self) -> str | None:
        return None if self.exact is None else str(self.exact)

    @classmethod
    def from_exact(cls, cf: ClosedForm, warnings=()) -> "WmiResult":
        return cls(cf.value(), cf, 0.0, "exact", list(warnings))

    def scaled(self, q) -> "WmiResult":
        q = Fraction(q)
        exact = self.exact * ClosedForm.const(q) if self.exact is not None else None
        return WmiResult(self.value * float(q), exact, self.error_bound * abs(float(q)), self.method,
                         list(self.warnings))

    def __add__(self, other: "WmiResult") -> "WmiResult":
        method = max(self.method, other.method, key=METHOD_RANK.__getitem__)
        if self.exact is not None and other.exact is not None:
            exact = self.exact + other.exact
            return WmiResult(exact.value(), exact, 0.0, "exact", self.warnings + other.warnings)
        return WmiResult(self.value + other.value, None, self.error_bound + other.error_bound, method,
                         self.warnings + other.warnings)


ZERO_RESULT = WmiResult(0.0, ClosedForm.const(0))


# --------------------------------------------------------------------------- density attachment


def attach_densities(e, guards=None, world_probability: Callable | None = None):
    """Split an evaluated element into ``(Integrand, discrete coefficient)`` pairs.

    With guarded symbolic values (``guards`` maps a real variable to its
    `GuardInfo`), monomials are grouped by the guard world of the variables
    they mention; the coefficient is that world's probability and the
    integrand is the group renormalized by it.  Without guards a single
    integrand with coefficient 1 is returned.
    """
    from .formula import And

    densities = {}
    for b in e.bindings:
        prev = densities.setdefault(b.var, b.density)
        if prev != b.density:
            raise IntegrationError(f"overlapping densities for {b.var}")
    guards = guards or {}
    groups: dict[tuple, dict] = {}
    for (brackets, symbols), coef in e.expr.terms.items():
        vs = set()
        for br in brackets:
            vs.update(br.variables)
        key = tuple(sorted({str(guards[v].guard) for v in vs if v in guards}))
        gvars = groups.setdefault(key, {})
        gvars[(brackets, symbols)] = coef
    out = []
    for key in sorted(groups):
        expr = AlgebraicExpr(groups[key])
        coef = Fraction(1)
        if key and world_probability is not None:
            formulas = []
            for v in sorted(expr.variables):
                if v in guards:
                    formulas.append(guards[v].guard)
            p = Fraction(world_probability(And(*formulas)))
            if p > 0:
                coef = p
                expr = expr * AlgebraicExpr.const(1 / p)
        dens = {v: densities[v] for v in sorted(expr.variables)}
        out.append((Integrand(expr, dens), coef))
    if not out:
        out.append((Integrand(e.expr, {}), Fraction(1)))
    return out


# --------------------------------------------------------------------------- helpers


def _np_power(x: np.ndarray, p: Fraction) -> np.ndarray:
    if p.denominator == 1:
        return x ** p.numerator
    with np.errstate(invalid="ignore"):
        if p.denominator % 2 == 0:
            return np.where(x >= 0, np.abs(x) ** float(p), np.nan)
        mag = np.abs(x) ** float(p)
        return np.where(x >= 0, mag, -mag if p.numerator % 2 else mag)


def bracket_mask(b: IversonBracket, values: dict) -> np.ndarray:
    """Vectorized truth of a bracket; where a power is undefined the atom is false."""
    a = b.atom
    lhs = None
    for coef, var, power in a.terms:
        t = float(coef) * _np_power(np.asarray(values[var], dtype=float), power)
        lhs = t if lhs is None else lhs + t
    c = float(a.bound)
    with np.errstate(invalid="ignore"):
        if a.comparator == "<":
            holds = lhs < c
        elif a.comparator == "<=":
            holds = lhs <= c
        else:
            holds = lhs == c
    return holds if b.positive else ~holds


def _effective_support(d: Density) -> tuple[float, float]:
    lo, hi = d.support()
    if isinstance(d, Normal):
        mu, s = float(d.mu), float(d.sigma)
        lo, hi = mu - 40 * s, mu + 40 * s
    return lo, hi


def _term_fn(terms):
    return lambda x: sum(float(c) * float(_np_power(np.asarray(x, dtype=float), p)) for c, p in terms)


def region_intervals(conds, d: Density, grid: int = 2001):
    """Intervals of the real line where all univariate conditions hold.

    ``conds`` are ``(terms, comparator, bound, positive)`` with terms
    ``[(coef, power)]`` in a single variable.  Breakpoints are polynomial
    roots when every power is an integer, otherwise sign changes on a grid
    refined with Brent's method.
    """
    lo, hi = _effective_support(d)
    points = {lo, hi}
    for terms, _, bound, _ in conds:
        if all(p.denominator == 1 for _, p in terms):
            deg = max(int(p) for _, p in terms)
            coeffs = [0.0] * (deg + 1)
            for c, p in terms:
                coeffs[deg - int(p)] += float(c)
            coeffs[deg] -= float(bound)
            while coeffs and coeffs[0] == 0:
                coeffs.pop(0)
            if len(coeffs) > 1:
                for r in np.roots(coeffs):
                    if abs(r.imag) < 1e-9 * max(1.0, abs(r.real)):
                        x = r.real
                        for _ in range(3):  # polish
                            f = np.polyval(coeffs, x)
                            df = np.polyval(np.polyder(coeffs), x)
                            if df == 0:
                                break
                            x -= f / df
                        if lo < x < hi:
                            points.add(float(x))
        else:
            f = _term_fn(terms)
            xs = np.linspace(lo, hi, grid)
            with np.errstate(invalid="ignore"):
                ys = np.array([f(x) for x in xs]) - float(bound)
            for k in range(grid - 1):
                y0, y1 = ys[k], ys[k + 1]
                if np.isnan(y0) or np.isnan(y1):
                    if np.isnan(y0) != np.isnan(y1):
                        points.add(float(xs[k] if np.isnan(y1) else xs[k + 1]))
                    continue
                if y0 == 0:
                    points.add(float(xs[k]))
                elif y0 * y1 < 0:
                    points.add(float(optimize.brentq(lambda x: f(x) - float(bound), xs[k], xs[k + 1], xtol=1e-14)))
    pts = sorted(points)
    out = []
    for a, b in zip(pts, pts[1:]):
        if b <= a:
            continue
        mid = np.array([0.5 * (a + b)])
        ok = True
        for terms, cmp, bound, positive in conds:
            lhs = sum(float(c) * _np_power(mid, p) for c, p in terms)
            with np.errstate(invalid="ignore"):
                holds = bool(lhs[0] < bound if cmp == "<" else lhs[0] <= bound if cmp == "<=" else lhs[0] == bound)
            if holds != positive:
                ok = False
                break
        if ok:
            if out and out[-1][1] == a:
                out[-1] = (out[-1][0], b)
            else:
                out.append((a, b))
    return out


def _univariate_conds(brackets, var, fixed: dict | None = None):
    """Conditions on ``var`` with other variables fixed to floats."""
    conds = []
    for b in brackets:
        a = b.atom
        terms, bound = [], float(a.bound)
        for c, v, p in a.terms:
            if v == var:
                terms.append((c, p))
            else:
                bound -= float(c) * float(_np_power(np.array([fixed[v]]), p)[0])
        if np.isnan(bound):
            if b.positive:
                return None
            continue
        conds.append((terms, a.comparator, bound, b.positive))
    return conds


def _mass_of(conds, d: Density) -> float:
    if conds is None:
        return 0.0
    if any(not terms for terms, *_ in conds):
        # a condition with no occurrence of the variable is constant
        keep = []
        for terms, cmp, bound, positive in conds:
            if terms:
                keep.append((terms, cmp, bound, positive))
                continue
            holds = 0 < bound if cmp == "<" else 0 <= bound if cmp == "<=" else bound == 0
            if holds != positive:
                return 0.0
        conds = keep
        if not conds:
            return 1.0
    return sum(d.mass_float(a, b) for a, b in region_intervals(conds, d))


# --------------------------------------------------------------------------- group integration


class _Integrator:
    def __init__(self, densities, mc_samples=100_000, seed=0, deadline=None, quad_tol=1e-10):
        self.densities = densities
        self.mc_samples = mc_samples
        self.seed = seed
        self.deadline = deadline
        self.quad_tol = quad_tol
        self.warnings: list[str] = []
        self._cache: dict = {}

    def remaining(self):
        if self.deadline is None:
            return None
        left = self.deadline - time.perf_counter()
        if left <= 0:
            raise IntegrationTimeout("integration timed out")
        return left

    def group(self, brackets: frozenset) -> WmiResult:
        hit = self._cache.get(brackets)
        if hit is None:
            self.remaining()
            hit = self._cache[brackets] = self._group(brackets)
        return hit

    def _group(self, brackets: frozenset) -> WmiResult:
        vs = set()
        for b in brackets:
            vs.update(b.variables)
        vs = sorted(vs)
        if len(vs) == 1:
            bounds = [univariate_bound(b) for b in brackets]
            if all(x is not None for x in bounds):
                return self._interval(vs[0], bounds)
            return self._univariate_numeric(vs[0], brackets)
        linear = all(all(p == 1 for _, _, p in b.atom.terms) for b in brackets)
        pieces = [self.densities[v].polynomial_pieces() for v in vs]
        if linear and all(p is not None for p in pieces):
            return self._polytope(vs, brackets, pieces)
        if len(vs) == 2:
            return self._quad2(vs, brackets)
        return self._monte_carlo(vs, brackets)

    def _interval(self, var, bounds) -> WmiResult:
        iv = interval_of(bounds)
        if iv is None:
            return ZERO_RESULT
        lo, _, hi, _, point, _ = iv
        if point is not None:
            return ZERO_RESULT
        d = self.densities[var]
        return WmiResult.from_exact(d.mass(-INF if lo is None else lo, INF if hi is None else hi))

    def _univariate_numeric(self, var, brackets) -> WmiResult:
        d = self.densities[var]
        value = _mass_of(_univariate_conds(brackets, var), d)
        return WmiResult(value, None, 1e-10, "quadrature")

    def _polytope(self, vs, brackets, pieces) -> WmiResult:
        index = {v: i for i, v in enumerate(vs)}
        cons = []
        for b in brackets:
            a = [Fraction(0)] * len(vs)
            for c, v, _ in b.atom.terms:
                a[index[v]] += c
            upper = Linear([-x for x in a], b.atom.bound)  # bound - sum >= 0
            cons.append(upper if b.positive else Linear(a, -b.atom.bound))
        try:
            value = integrate_pieces(pieces, cons, self.remaining())
        except PolytopeTimeout:
            raise IntegrationTimeout("exact polytope integration timed out") from None
        return WmiResult.from_exact(ClosedForm.const(value))

    def _quad2(self, vs, brackets) -> WmiResult:
        x, y = vs
        dx, dy = self.densities[x], self.densities[y]
        lo, hi = dx.support()

        def inner(xv):
            self.remaining()
            return dx.pdf(xv) * _mass_of(_univariate_conds(brackets, y, {x: xv}), dy)

        # breakpoints where a bracket's boundary meets the support edge of y
        pts = set()
        ylo, yhi = _effective_support(dy)
        for b in brackets:
            terms = b.atom.terms
            xs = [(c, p) for c, v, p in terms if v == x]
            ys = [(c, p) for c, v, p in terms if v == y]
            if len(xs) == 1 and xs[0][1] == 1 and all(p == 1 for _, p in ys):
                cx = float(xs[0][0])
                cy = sum(float(c) for c, _ in ys)
                for edge in (ylo, yhi):
                    if math.isfinite(edge):
                        pts.add((float(b.atom.bound) - cy * edge) / cx)
        flo, fhi = _effective_support(dx)
        pts = sorted(p for p in pts if flo < p < fhi)
        if math.isinf(lo) or math.isinf(hi):
            lo, hi = flo, fhi
        value, err = sp_integrate.quad(inner, lo, hi, points=pts or None, limit=200,
                                       epsabs=self.quad_tol, epsrel=self.quad_tol)
        return WmiResult(value, None, max(err, 1e-10), "quadrature")

    def _monte_carlo(self, vs, brackets) -> WmiResult:
        n = self.mc_samples
        chunk = 1 << 16
        total = 0.0
        total_sq = 0.0
        done = 0
        k = 0
        while done < n:
            self.remaining()
            m = min(chunk, n - done)
            rng = np.random.Generator(np.random.Philox(key=np.array([self.seed, k], dtype=np.uint64)))
            vals = {v: self.densities[v].sample(rng, m) for v in vs}
            mask = np.ones(m, dtype=bool)
            for b in sorted(brackets, key=lambda b: b.key):
                mask &= bracket_mask(b, vals)
            s = float(mask.sum())
            total += s
            total_sq += s
            done += m
            k += 1
        mean = total / n
        var = max(total_sq / n - mean * mean, 0.0)
        return WmiResult(mean, None, math.sqrt(var / n), "monte-carlo")


def _components(brackets):
    groups: list[tuple[set, list]] = []
    for b in brackets:
        vs = set(b.variables)
        merged = [g for g in groups if g[0] & vs]
        for g in merged:
            groups.remove(g)
            vs |= g[0]
        items = [b] + [x for g in merged for x in g[1]]
        groups.append((vs, items))
    return [frozenset(items) for _, items in groups]


def _product(results) -> WmiResult:
    if all(r.exact is not None for r in results):
        cf = ClosedForm.const(1)
        for r in results:
            cf = cf * r.exact
        return WmiResult.from_exact(cf)
    value = 1.0
    for r in results:
        value *= r.value
    err = 0.0
    for i, r in enumerate(results):
        others = 1.0
        for j, s in enumerate(results):
            if j != i:
                others *= abs(s.value) + s.error_bound
        err += r.error_bound * others
    method = max((r.method for r in results), key=METHOD_RANK.__getitem__)
    return WmiResult(value, None, err, method)


def integrate(i: Integrand, timeout: float | None = None, mc_samples: int = 100_000, seed: int = 0) -> WmiResult:
    """Integral of ``i.expr`` times the product of its densities."""
    deadline = time.perf_counter() + timeout if timeout else None
    worker = _Integrator(i.densities, mc_samples=mc_samples, seed=seed, deadline=deadline)
    total = ZERO_RESULT
    warned = False
    for coef, brackets, symbols in i.expr.monomials():
        if symbols:
            raise IntegrationError("expression still contains weight symbols")
        kept = []
        zero = False
        for b in brackets:
            if b.atom.comparator == "=":
                if b.positive:
                    zero = True
                    break
                continue  # almost-everywhere true
            kept.append(b)
        if zero:
            if not warned:
                worker.warnings.append("equality constraint has probability zero")
                log.warning("equality constraint over a continuous variable integrates to 0")
                warned = True
            continue
        parts = [worker.group(g) for g in _components(kept)]
        term = _product(parts) if parts else WmiResult.from_exact(ClosedForm.const(1))
        total = total + term.scaled(coef)
    total.warnings = worker.warnings + total.warnings
    return total
