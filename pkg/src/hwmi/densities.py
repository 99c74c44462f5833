"""One-dimensional parametric densities with exact CDF differences."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import special

from .closedform import ClosedForm, std_normal_cdf

INF = math.inf


def _fmt(q) -> str:
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


class Density:
    kind = "density"

    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    def pdf(self, x: float) -> float:
        raise NotImplementedError

    def cdf(self, x: float) -> float:
        raise NotImplementedError

    def mass(self, lo, hi) -> ClosedForm:
        """Exact probability of ``lo < X < hi`` (bounds may be +-inf)."""
        raise NotImplementedError

    def mass_float(self, lo: float, hi: float) -> float:
        return max(0.0, self.cdf(hi) - self.cdf(lo))

    def polynomial_pieces(self):
        """Pieces ``((lo, hi), coeffs)`` when the density is piecewise polynomial, else None."""
        return None

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class Normal(Density):
    mu: Fraction
    sigma: Fraction  # standard deviation
    kind = "normal"

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("normal: sigma must be positive")

    def support(self):
        return (-INF, INF)

    def pdf(self, x):
        z = (x - float(self.mu)) / float(self.sigma)
        return math.exp(-0.5 * z * z) / (float(self.sigma) * math.sqrt(2 * math.pi))

    def cdf(self, x):
        if x == INF:
            return 1.0
        if x == -INF:
            return 0.0
        return std_normal_cdf((x - float(self.mu)) / float(self.sigma))

    def mass_float(self, lo, hi):
        # use the tail on the far side of the mean to avoid cancellation
        mu = float(self.mu)
        if lo >= mu:
            return max(0.0, self.cdf(2 * mu - lo) - self.cdf(2 * mu - hi))
        return max(0.0, self.cdf(hi) - self.cdf(lo))

    def _cdf_form(self, x) -> ClosedForm:
        if x == INF:
            return ClosedForm.const(1)
        if x == -INF:
            return ClosedForm.const(0)
        return ClosedForm.phi((Fraction(x) - self.mu) / self.sigma)

    def mass(self, lo, hi):
        if not lo < hi:
            return ClosedForm.const(0)
        return self._cdf_form(hi) - self._cdf_form(lo)

    def sample(self, rng, n):
        return rng.normal(float(self.mu), float(self.sigma), n)

    def __str__(self):
        return f"normal({_fmt(self.mu)}, {_fmt(self.sigma)})"


@dataclass(frozen=True)
class Uniform(Density):
    lo: Fraction
    hi: Fraction
    kind = "uniform"

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("uniform: lo must be below hi")

    def support(self):
        return (float(self.lo), float(self.hi))

    def pdf(self, x):
        return 1.0 / float(self.hi - self.lo) if float(self.lo) <= x <= float(self.hi) else 0.0

    def cdf(self, x):
        return min(1.0, max(0.0, (x - float(self.lo)) / float(self.hi - self.lo)))

    def mass(self, lo, hi):
        a = self.lo if lo == -INF else max(self.lo, Fraction(lo))
        b = self.hi if hi == INF else min(self.hi, Fraction(hi))
        if a >= b:
            return ClosedForm.const(0)
        return ClosedForm.const((b - a) / (self.hi - self.lo))

    def polynomial_pieces(self):
        return [((self.lo, self.hi), (1 / (self.hi - self.lo),))]

    def sample(self, rng, n):
        return rng.uniform(float(self.lo), float(self.hi), n)

    def __str__(self):
        return f"uniform({_fmt(self.lo)}, {_fmt(self.hi)})"


@dataclass(frozen=True)
class Beta(Density):
    a: Fraction
    b: Fraction
    kind = "beta"

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError("beta: shape parameters must be positive")

    @property
    def integer_shapes(self) -> bool:
        return self.a.denominator == 1 and self.b.denominator == 1

    def support(self):
        return (0.0, 1.0)

    def pdf(self, x):
        if not 0 <= x <= 1:
            return 0.0
        a, b = float(self.a), float(self.b)
        return math.exp((a - 1) * math.log(x) + (b - 1) * math.log1p(-x) - special.betaln(a, b)) if 0 < x < 1 else (
            0.0 if (x == 0 and a > 1) or (x == 1 and b > 1) else math.inf)

    def cdf(self, x):
        if x <= 0:
            return 0.0
        if x >= 1:
            return 1.0
        return float(special.betainc(float(self.a), float(self.b), x))

    def mass(self, lo, hi):
        if self.integer_shapes:
            return self.as_polynomial().mass(lo, hi)
        lo_c = ClosedForm.const(0) if lo == -INF else ClosedForm.betai(lo, self.a, self.b)
        hi_c = ClosedForm.const(1) if hi == INF else ClosedForm.betai(hi, self.a, self.b)
        if not lo < hi:
            return ClosedForm.const(0)
        return hi_c - lo_c

    def as_polynomial(self) -> "PiecewisePolynomial":
        """Integer shapes only: x^(a-1) (1-x)^(b-1) / B(a, b) expanded."""
        a, b = int(self.a), int(self.b)
        norm = Fraction(math.factorial(a + b - 1), math.factorial(a - 1) * math.factorial(b - 1))
        coeffs = [Fraction(0)] * (a + b - 1)
        for k in range(b):
            coeffs[a - 1 + k] += norm * math.comb(b - 1, k) * (-1) ** k
        return PiecewisePolynomial(((Fraction(0), Fraction(1), tuple(coeffs)),))

    def polynomial_pieces(self):
        return self.as_polynomial().polynomial_pieces() if self.integer_shapes else None

    def sample(self, rng, n):
        return rng.beta(float(self.a), float(self.b), n)

    def __str__(self):
        return f"beta({_fmt(self.a)}, {_fmt(self.b)})"


def _poly_antiderivative(coeffs, x: Fraction) -> Fraction:
    return sum((c * x ** (k + 1) / (k + 1) for k, c in enumerate(coeffs)), Fraction(0))


def _poly_eval(coeffs, x: float) -> float:
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * x + float(c)
    return acc


@dataclass(frozen=True)
class PiecewisePolynomial(Density):
    """Pieces ``(lo, hi, coeffs)``; ``coeffs[k]`` multiplies ``x**k``."""

    pieces: tuple[tuple[Fraction, Fraction, tuple[Fraction, ...]], ...]
    kind = "piecewise"

    def __post_init__(self):
        if not self.pieces:
            raise ValueError("piecewise: at least one piece required")
        ordered = sorted(self.pieces)
        for (lo, hi, _), nxt in zip(ordered, ordered[1:] + [None]):
            if not lo < hi:
                raise ValueError("piecewise: empty piece interval")
            if nxt is not None and nxt[0] < hi:
                raise ValueError("piecewise: overlapping pieces")
        total = sum((_poly_antiderivative(c, hi) - _poly_antiderivative(c, lo) for lo, hi, c in self.pieces),
                    Fraction(0))
        if abs(total - 1) > Fraction(1, 10**12):
            raise ValueError(f"piecewise: total mass {float(total)} is not 1")

    def support(self):
        return (float(min(p[0] for p in self.pieces)), float(max(p[1] for p in self.pieces)))

    def pdf(self, x):
        for lo, hi, c in self.pieces:
            if float(lo) <= x <= float(hi):
                return _poly_eval(c, x)
        return 0.0

    def cdf(self, x):
        return float(self.mass(-INF, x).rational()) if x != INF else 1.0

    def mass(self, lo, hi):
        total = Fraction(0)
        for plo, phi, c in self.pieces:
            a = plo if lo == -INF else max(plo, Fraction(lo))
            b = phi if hi == INF else min(phi, Fraction(hi))
            if a < b:
                total += _poly_antiderivative(c, b) - _poly_antiderivative(c, a)
        return ClosedForm.const(total)

    def polynomial_pieces(self):
        return [((lo, hi), c) for lo, hi, c in self.pieces]

    def sample(self, rng, n):
        # pick a piece by mass, then invert its CDF by bisection
        pieces = sorted(self.pieces)
        masses = np.array([float(_poly_antiderivative(c, hi) - _poly_antiderivative(c, lo)) for lo, hi, c in pieces])
        which = rng.choice(len(pieces), size=n, p=masses / masses.sum())
        u = rng.random(n)
        out = np.empty(n)
        for k, (lo, hi, c) in enumerate(pieces):
            sel = which == k
            if not sel.any():
                continue
            anti = np.array([0.0] + [float(q) / (j + 1) for j, q in enumerate(c)])
            base = np.polyval(anti[::-1], float(lo))
            target = base + u[sel] * masses[k]
            a = np.full(target.shape, float(lo))
            b = np.full(target.shape, float(hi))
            for _ in range(60):
                mid = 0.5 * (a + b)
                below = np.polyval(anti[::-1], mid) < target
                a = np.where(below, mid, a)
                b = np.where(below, b, mid)
            out[sel] = 0.5 * (a + b)
        return out

    def __str__(self):
        parts = []
        for lo, hi, c in self.pieces:
            poly = " ".join(_fmt(x) for x in c)
            parts.append(f"[{_fmt(lo)}, {_fmt(hi)}]: {poly}")
        return "piecewise(" + "; ".join(parts) + ")"


def make_density(name: str, args) -> Density:
    args = [Fraction(a) for a in args]
    if name == "normal" and len(args) == 2:
        return Normal(*args)
    if name == "uniform" and len(args) == 2:
        return Uniform(*args)
    if name == "beta" and len(args) == 2:
        return Beta(*args)
    raise ValueError(f"unknown distribution {name}/{len(args)}")
