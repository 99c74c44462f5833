"""Benchmark harness: compile and evaluation time per bundled problem, checked against an oracle."""

from __future__ import annotations

import dataclasses
import random
import statistics
import time
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path

from .formula import And, WeightSpec
from .oracle import enumerate_program, mc_program
from .pipeline import CompiledQuery, SolveTimeout, load_file, solve_query

# (row name, file, domain); discrete rows are D, hybrid rows H
SUITE = [
    ("BurglarAlarm", "burglar_alarm.halpl", "D"),
    ("CoinBias", "coin_bias.halpl", "H"),
    ("Grass", "grass.halpl", "D"),
    ("NoisyOR", "noisy_or.halpl", "D"),
    ("TwoCoins", "two_coins.halpl", "D"),
    ("ClickGraph", "click_graph.halpl", "H"),
    ("ClinicalTrial", "clinical_trial.halpl", "H"),
    ("AddFun/max", "addfun_max.halpl", "H"),
    ("AddFun/sum", "addfun_sum.halpl", "H"),
    ("MurderMystery", "murder_mystery.halpl", "D"),
]
EXPECTED_TIMEOUTS = {"ClickGraph"}


def suite_dir() -> Path:
    return Path(str(resources.files("hwmi") / "models" / "bench"))


@dataclass
class BenchRow:
    name: str
    domain: str
    kc_ms: float | None = None
    eval_ms: float | None = None
    value: float | None = None
    oracle: float | None = None
    oracle_err: float = 0.0
    runs: int = 0
    timed_out: bool = False

    @property
    def tolerance(self) -> float:
        return 1e-12 if self.domain == "D" else max(3 * self.oracle_err, 1e-3)

    @property
    def ok(self) -> bool:
        if self.timed_out:
            return self.name in EXPECTED_TIMEOUTS
        return self.value is not None and self.oracle is not None and abs(self.value - self.oracle) <= self.tolerance


def oracle_value(lm, domain: str, samples: int, seed: int) -> tuple[float, float]:
    if domain == "D":
        return float(enumerate_program(lm.ground)), 0.0
    est = mc_program(lm.ground, samples, seed)
    return est.estimate, est.std_error


def run_benchmark(name, path, domain, runs=50, timeout=15.0, seed=0, oracle_samples=1_000_000,
                  with_oracle=True) -> BenchRow:
    lm = load_file(path)
    row = BenchRow(name, domain)
    q = lm.model.queries[0]
    kc, ev = [], []
    for _ in range(runs):
        try:
            r = solve_query(lm.model, q, timeout=timeout, seed=seed, ground_ms=lm.ground_ms)
        except SolveTimeout:
            row.timed_out = True
            break
        kc.append(r.timings.kc_ms)
        ev.append(r.timings.eval_ms + r.timings.integrate_ms)
        row.value = r.value
    row.runs = len(kc)
    if kc:
        row.kc_ms = statistics.fmean(kc)
        row.eval_ms = statistics.fmean(ev)
    if with_oracle and not row.timed_out:
        row.oracle, row.oracle_err = oracle_value(lm, domain, oracle_samples, seed)
    return row


def run_suite(runs=50, timeout=15.0, seed=0, oracle_samples=1_000_000, only=None, progress=None) -> list[BenchRow]:
    rows = []
    base = suite_dir()
    for name, fname, domain in SUITE:
        if only and name not in only:
            continue
        row = run_benchmark(name, base / fname, domain, runs, timeout, seed, oracle_samples)
        if progress:
            progress(row)
        rows.append(row)
    return rows


def _cell(x, fmt="{:.1f}"):
    return "--" if x is None else fmt.format(x)


def format_table(rows: list[BenchRow]) -> str:
    head = f"{'Benchmark':<15}{'KC (ms)':>10}{'Eval (ms)':>11}{'value':>12}{'oracle':>12}  Domain  check"
    lines = [head, "-" * len(head)]
    for r in rows:
        check = "timeout" if r.timed_out else ("ok" if r.ok else "MISMATCH")
        lines.append(f"{r.name:<15}{_cell(r.kc_ms):>10}{_cell(r.eval_ms, '{:.2f}'):>11}"
                     f"{_cell(r.value, '{:.6f}'):>12}{_cell(r.oracle, '{:.6f}'):>12}  {r.domain:^6}  {check}")
    return "\n".join(lines)


# --------------------------------------------------------------------------- compile once, evaluate many


def random_weight_specs(weights: WeightSpec, n: int, seed: int = 0) -> list[WeightSpec]:
    """``n`` variants of ``weights`` with every Boolean probability redrawn (densities kept)."""
    rng = random.Random(seed)
    out = []
    for _ in range(n):
        bw = {k: Fraction(rng.randint(1, 99), 100) for k in weights.bool_weights}
        out.append(WeightSpec(bw, dict(weights.densities)))
    return out


@dataclass
class ReuseReport:
    matches: bool
    evaluate_s: float  # relabel + evaluate on the one circuit, all specs
    recompile_s: float  # knowledge compilation of the fresh solves, all specs


def compile_once_economy(path, n_specs: int = 10, seed: int = 0) -> ReuseReport:
    lm = load_file(path)
    model = lm.model
    q = model.queries[0]
    target = model.formulas[q] if model.evidence is None else And(model.formulas[q], model.evidence)
    cq = CompiledQuery(target, model)
    specs = random_weight_specs(model.weights, n_specs, seed)
    matches = True
    eval_s = comp_s = 0.0
    for spec in specs:
        t0 = time.perf_counter()
        reused = cq.evaluate(spec)
        eval_s += time.perf_counter() - t0
        fresh_model = dataclasses.replace(model, weights=spec)
        fresh = CompiledQuery(target, fresh_model)
        comp_s += fresh.kc_ms / 1e3
        matches &= fresh.evaluate() == reused
    return ReuseReport(matches, eval_s, comp_s)
