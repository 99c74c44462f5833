"""Ground truth by brute force: model enumeration and forward sampling.

Nothing here uses the compiler, the circuit evaluator or the integrator.
Monte-Carlo draws come from counter-based Philox streams, one per chunk of
``CHUNK`` samples, so estimates do not depend on how chunks are scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product

import numpy as np

from .densities import Beta, Density, Normal, PiecewisePolynomial, Uniform
from .formula import And, Formula, eval_formula
from .kernels import Tape, eval_tape

CHUNK = 1 << 16
MAX_ENUM_VARS = 22


class OracleLimit(ValueError):
    pass


def enumerate_amc(f: Formula, alpha, semiring, variables=None):
    """Sum over satisfying assignments of the product of literal labels."""
    names = sorted(set(variables or ()) | f.bool_vars)
    if len(names) > MAX_ENUM_VARS:
        raise OracleLimit(f"{len(names)} variables exceed the enumeration cap of {MAX_ENUM_VARS}")
    total = semiring.zero
    for bits in product((False, True), repeat=len(names)):
        a = dict(zip(names, bits))
        if not eval_formula(f, a):
            continue
        w = semiring.one
        for n in names:
            w = semiring.mul(w, alpha(n, a[n]))
        total = semiring.add(total, w)
    return total


def enumerate_probability(f: Formula, weights, evidence: Formula | None = None) -> Fraction:
    """Exact P(f | evidence) over Boolean weights by listing every world."""
    names = sorted(f.bool_vars | (evidence.bool_vars if evidence is not None else frozenset()))
    if len(names) > MAX_ENUM_VARS:
        raise OracleLimit(f"{len(names)} variables exceed the enumeration cap of {MAX_ENUM_VARS}")
    num = den = Fraction(0)
    for bits in product((False, True), repeat=len(names)):
        a = dict(zip(names, bits))
        w = Fraction(1)
        for n, b in a.items():
            p = weights.bool_weights[n]
            w *= p if b else 1 - p
        if evidence is None or eval_formula(evidence, a):
            den += w
            if eval_formula(f, a):
                num += w
    return num / den if den else Fraction(0)


# --------------------------------------------------------------------------- sampling


# high key bit keeps oracle streams disjoint from the integrator's Philox keys [seed, k]
_ORACLE_DOMAIN = 1 << 63


def _rng(seed: int, chunk: int, stream: int = 0) -> np.random.Generator:
    key = np.array([seed, _ORACLE_DOMAIN | (stream << 40) | chunk], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sample_density(d: Density, rng: np.random.Generator, n: int, normal_scale: str = "sd") -> np.ndarray:
    """Independent draws, written separately from the integrator's samplers.

    ``normal_scale="variance"`` reads the second normal parameter as a
    variance instead of a standard deviation.
    """
    if isinstance(d, Normal):
        scale = float(d.sigma) if normal_scale == "sd" else math.sqrt(float(d.sigma))
        return float(d.mu) + scale * rng.standard_normal(n)
    if isinstance(d, Uniform):
        return float(d.lo) + float(d.hi - d.lo) * rng.random(n)
    if isinstance(d, Beta):
        x = rng.standard_gamma(float(d.a), n)
        y = rng.standard_gamma(float(d.b), n)
        return x / (x + y)
    if isinstance(d, PiecewisePolynomial):
        return _rejection(d, rng, n)
    raise TypeError(f"cannot sample {d}")


def _rejection(d: PiecewisePolynomial, rng, n):
    lo, hi = d.support()
    grid = np.linspace(lo, hi, 4097)
    cap = max(d.pdf(x) for x in grid) * 1.05 + 1e-12
    out = np.empty(0)
    while out.size < n:
        x = lo + (hi - lo) * rng.random(2 * n)
        u = cap * rng.random(2 * n)
        keep = x[u < np.array([d.pdf(v) for v in x])]
        out = np.concatenate([out, keep])
    return out[:n]


@dataclass
class McEstimate:
    estimate: float
    std_error: float
    n: int

    def __iter__(self):
        yield self.estimate
        yield self.std_error


def _ratio_estimate(hits_qe: np.ndarray, hits_e: np.ndarray | None, n: int) -> McEstimate:
    if hits_e is None:
        p = hits_qe.mean() if n else 0.0
        return McEstimate(float(p), float(math.sqrt(max(p * (1 - p), 0.0) / n)) if n else 0.0, n)
    se = hits_e.sum()
    if se == 0:
        return McEstimate(float("nan"), float("inf"), n)
    r = hits_qe.sum() / se
    resid = hits_qe.astype(float) - r * hits_e.astype(float)
    err = math.sqrt(float((resid ** 2).sum())) / float(se)
    return McEstimate(float(r), err, n)


def mc_wmi(model, n_samples: int = 1_000_000, seed: int = 0, query: str | None = None,
           backend: str | None = None, normal_scale: str = "sd") -> McEstimate:
    """Forward-sampling estimate of a query's probability (conditioned on evidence if present).

    Every declared variable is drawn independently from its weight; guarded
    copies of one continuous variable are separate columns.  `mc_program`
    samples a ground program directly instead and is used when one is given.
    """
    if hasattr(model, "cons_clauses"):
        return mc_program(model, n_samples, seed, query)
    query = query or model.queries[0]
    f = model.formulas[query]
    ev = model.evidence
    bools = sorted(model.registry.bools)
    reals = sorted(model.registry.reals)
    bidx = {b: i for i, b in enumerate(bools)}
    ridx = {r: i for i, r in enumerate(reals)}
    tape_q = Tape(And(f, ev) if ev is not None else f, bidx, ridx)
    tape_e = Tape(ev, bidx, ridx) if ev is not None else None
    if not f.bool_vars and not f.real_vars and ev is None:
        val = bool(eval_formula(f, {}))
        return McEstimate(1.0 if val else 0.0, 0.0, n_samples)
    qs, es = [], []
    done = k = 0
    while done < n_samples:
        m = min(CHUNK, n_samples - done)
        rng = _rng(seed, k)
        B = np.empty((m, len(bools)), dtype=np.bool_)
        for i, b in enumerate(bools):
            B[:, i] = rng.random(m) < float(model.weights.bool_weights[b])
        R = np.empty((m, len(reals)))
        for i, r in enumerate(reals):
            R[:, i] = sample_density(model.weights.densities[r], rng, m, normal_scale)
        qs.append(eval_tape(tape_q, B, R, backend))
        if tape_e is not None:
            es.append(eval_tape(tape_e, B, R, backend))
        done += m
        k += 1
    return _ratio_estimate(np.concatenate(qs), np.concatenate(es) if es else None, n_samples)


# --------------------------------------------------------------------------- ground programs


class _WorldEvaluator:
    """Least-model truth of ground atoms, vectorized over a batch of worlds."""

    def __init__(self, g, coins: dict, values: dict):
        self.g = g
        self.coins = coins  # fact index / rule index -> bool array
        self.values = values  # symbolic value name -> float array
        self.memo: dict = {}
        self.n = len(next(iter(coins.values()))) if coins else len(next(iter(values.values()), np.zeros(1)))
        self.facts: dict = {}
        for i, (a, p) in enumerate(g.facts):
            self.facts.setdefault(a, []).append(i)
        self.rules: dict = {}
        for j, r in enumerate(g.rules):
            self.rules.setdefault(r.head, []).append(j)
        self.base_cache: dict = {}

    def atom(self, a):
        hit = self.memo.get(a)
        if hit is not None:
            return hit
        self.memo[a] = np.zeros(self.n, dtype=bool)  # provisional, acyclic programs never read it
        acc = np.zeros(self.n, dtype=bool)
        for i in self.facts.get(a, ()):
            acc |= self.coins[("f", i)]
        for j in self.rules.get(a, ()):
            r = self.g.rules[j]
            body = self.coins[("r", j)].copy() if r.prob is not None else np.ones(self.n, dtype=bool)
            for b, pos in r.body:
                v = self.cons(b) if hasattr(b, "condition") else self.atom(b)
                body &= v if pos else ~v
            acc |= body
        self.memo[a] = acc
        return acc

    def base_value(self, base: str) -> np.ndarray:
        hit = self.base_cache.get(base)
        if hit is not None:
            return hit
        out = np.full(self.n, np.nan)
        for v in self.g.values.get(base, ()):
            holds = np.ones(self.n, dtype=bool)
            for a, pos in v.guard:
                t = self.atom(a)
                holds &= t if pos else ~t
            out = np.where(holds, self.values[v.name], out)
        self.base_cache[base] = out
        return out

    def cons(self, c) -> np.ndarray:
        f = c.condition
        if f.op == "const":
            return np.full(self.n, bool(f.payload))
        positive = True
        while f.op == "not":
            f, positive = f.args[0], not positive
        a = f.payload
        lhs = np.zeros(self.n)
        for coef, var, p in a.terms:
            x = self.base_value(var)
            lhs = lhs + float(coef) * _np_pow(x, p)
        with np.errstate(invalid="ignore"):
            if a.comparator == "<":
                t = lhs < float(a.bound)
            elif a.comparator == "<=":
                t = lhs <= float(a.bound)
            else:
                t = lhs == float(a.bound)
        # an undefined value makes both the condition and its complement fail
        defined = ~np.isnan(lhs)
        return (t if positive else ~t) & defined


def _np_pow(x, p: Fraction):
    if p.denominator == 1:
        return x ** p.numerator
    with np.errstate(invalid="ignore"):
        mag = np.abs(x) ** float(p)
        if p.denominator % 2 == 0:
            return np.where(x >= 0, mag, np.nan)
        return np.where(x >= 0, mag, -mag if p.numerator % 2 else mag)


def _coin_table(g):
    out = []
    for i, (a, p) in enumerate(g.facts):
        out.append((("f", i), Fraction(1) if p is None else Fraction(p)))
    for j, r in enumerate(g.rules):
        if r.prob is not None:
            out.append((("r", j), Fraction(r.prob)))
    return out


def mc_program(g, n_samples: int = 1_000_000, seed: int = 0, query=None) -> McEstimate:
    coins = _coin_table(g)
    q = query if query is not None else g.queries[0]
    q = str(q)
    qs, es = [], []
    done = k = 0
    while done < n_samples:
        m = min(CHUNK, n_samples - done)
        rng = _rng(seed, k, stream=1)
        draws = {key: rng.random(m) < float(p) for key, p in coins}
        values = {}
        for base in sorted(g.values):
            for v in g.values[base]:
                values[v.name] = sample_density(v.density, rng, m)
        if not draws:
            draws = {("dummy", 0): np.ones(m, dtype=bool)}
        ev = _WorldEvaluator(g, draws, values)
        target = next((a for a in g.atoms if str(a) == q), None)
        qv = ev.atom(target) if target is not None else np.zeros(m, dtype=bool)
        if g.evidence:
            e = np.ones(m, dtype=bool)
            for a, val in g.evidence:
                t = ev.atom(a)
                e &= t if val else ~t
            qs.append(qv & e)
            es.append(e)
        else:
            qs.append(qv)
        done += m
        k += 1
    return _ratio_estimate(np.concatenate(qs), np.concatenate(es) if es else None, n_samples)


def enumerate_program(g, query=None) -> Fraction:
    """Exact query probability of a discrete ground program by listing all coin outcomes."""
    if any(g.values.values()):
        raise OracleLimit("world enumeration needs a program without continuous variables")
    coins = [(k, p) for k, p in _coin_table(g) if p not in (0, 1)]
    fixed = {k: p == 1 for k, p in _coin_table(g) if p in (0, 1)}
    if len(coins) > MAX_ENUM_VARS:
        raise OracleLimit(f"{len(coins)} probabilistic choices exceed the cap of {MAX_ENUM_VARS}")
    n = 1 << len(coins)
    idx = np.arange(n, dtype=np.int64)
    draws = {k: ((idx >> i) & 1).astype(bool) for i, (k, _) in enumerate(coins)}
    for k, v in fixed.items():
        draws[k] = np.full(n, v)
    ev = _WorldEvaluator(g, draws, {})
    q = str(query if query is not None else g.queries[0])
    target = next((a for a in g.atoms if str(a) == q), None)
    qv = ev.atom(target) if target is not None else np.zeros(n, dtype=bool)
    e = np.ones(n, dtype=bool)
    for a, val in g.evidence:
        t = ev.atom(a)
        e &= t if val else ~t
    # integer weights: prod over coins of numerator or (denominator - numerator)
    w = np.ones(n, dtype=object)
    for i, (_, p) in enumerate(coins):
        bit = ((idx >> i) & 1).astype(bool)
        w = w * np.where(bit, p.numerator, p.denominator - p.numerator).astype(object)
    num = int(w[qv & e].sum()) if (qv & e).any() else 0
    tot = int(w[e].sum()) if e.any() else 0
    if tot == 0:
        return Fraction(0)
    return Fraction(num, tot)
