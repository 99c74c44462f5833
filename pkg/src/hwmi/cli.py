"""``hwmi`` command line: solve, compile, check and bench.

Exit codes: 0 success, 1 parse error, 2 semantic error, 3 timeout,
4 oracle disagreement (``check``).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .compiler import CompileError, CompileTimeout, compile_formula, verify_ddnnf, write_circuit
from .formula import And, abstract
from .lexer import ParseError
from .pipeline import SolveTimeout, load_file, solve_query

EXIT_PARSE, EXIT_SEMANTIC, EXIT_TIMEOUT, EXIT_MISMATCH = 1, 2, 3, 4


def _order(text: str | None):
    if text is None or text in ("frequency", "lex"):
        return text
    return [v.strip() for v in text.split(",") if v.strip()]


def resolve_path(path: str) -> Path:
    """The file itself, else a bundled model of that name (``broken.hwmi``, ``bench/grass.halpl``)."""
    p = Path(path)
    if p.exists():
        return p
    from importlib import resources

    root = Path(str(resources.files("hwmi") / "models"))
    for cand in (root / p.name, root / "bench" / p.name):
        if cand.exists():
            return cand
    raise FileNotFoundError(path)


def _timeout(args) -> float | None:
    return args.timeout_ms / 1e3 if args.timeout_ms else None


def _pretty(r) -> str:
    d = r.to_json()
    t = d["timings"]
    lines = [f"query {d['query']}", f"  value    {d['value']:.12g}"]
    if d["exact"] is not None:
        lines.append(f"  exact    {d['exact']}")
    lines.append(f"  method   {d['method']} (error bound {d['error_bound']:.3g})")
    lines.append(f"  timings  ground {t['ground_ms']:.2f} ms, kc {t['kc_ms']:.2f} ms, "
                 f"eval {t['eval_ms']:.2f} ms, integrate {t['integrate_ms']:.2f} ms")
    for w in r.result.warnings:
        lines.append(f"  warning  {w}")
    return "\n".join(lines)


def cmd_solve(args) -> int:
    lm = load_file(resolve_path(args.path))
    if args.dump_ground:
        if lm.ground is not None:
            print(lm.ground.dump().rstrip("\n"))
        else:
            from .model import format_model

            print(format_model(lm.model))
        if args.format == "pretty":
            print()
    queries = [args.query] if args.query else lm.model.queries
    results = [solve_query(lm.model, q, semiring=args.semiring, order=_order(args.var_order),
                           timeout=_timeout(args), mc_samples=args.mc_samples, seed=args.seed,
                           ground_ms=lm.ground_ms) for q in queries]
    if args.format == "json":
        print(json.dumps([r.to_json() for r in results], indent=2))
    else:
        print("\n".join(_pretty(r) for r in results))
    return 0


def cmd_compile(args) -> int:
    lm = load_file(resolve_path(args.path))
    m = lm.model
    q = args.query or m.queries[0]
    target = m.formulas[q] if m.evidence is None else And(m.formulas[q], m.evidence)
    prop, amap = abstract(target)
    c = compile_formula(prop, order=_order(args.var_order), timeout=_timeout(args) or 60.0)
    text = write_circuit(c)
    if args.output:
        Path(args.output).write_text(text)
    else:
        print(text, end="")
    rep = verify_ddnnf(c)
    print(f"{len(c.nodes)} nodes, {c.n_vars} variables, d-DNNF check: {'ok' if rep.ok else 'FAILED'}",
          file=sys.stderr)
    return 0


def cmd_check(args) -> int:
    from .oracle import enumerate_probability, enumerate_program, mc_program, mc_wmi

    lm = load_file(resolve_path(args.path))
    m = lm.model
    status = 0
    for q in ([args.query] if args.query else m.queries):
        r = solve_query(m, q, timeout=_timeout(args), mc_samples=args.mc_samples, seed=args.seed)
        if not m.registry.reals:
            if lm.ground is not None:
                o = float(enumerate_program(lm.ground, q))
            else:
                o = float(enumerate_probability(m.formulas[q], m.weights, m.evidence))
            err, tol, how = 0.0, 1e-12, "enumeration"
        else:
            est = mc_program(lm.ground, args.oracle_samples, args.seed, q) if lm.ground is not None \
                else mc_wmi(m, args.oracle_samples, args.seed, q)
            o, err = est.estimate, est.std_error
            tol, how = max(3 * err, 1e-3), f"monte-carlo, {args.oracle_samples} samples"
        ok = abs(r.value - o) <= tol
        status = status or (0 if ok else EXIT_MISMATCH)
        print(f"{q}: pipeline {r.value:.10g} ({r.result.method}), oracle {o:.10g} ({how}, se {err:.2g}) "
              f"-> {'agree' if ok else 'DISAGREE'}")
    return status


def cmd_bench(args) -> int:
    from .bench import format_table, run_suite

    rows = run_suite(runs=args.runs, timeout=(_timeout(args) or 15.0), seed=args.seed,
                     oracle_samples=args.oracle_samples, only=args.only)
    if args.format == "json":
        print(json.dumps([{
            "name": r.name, "domain": r.domain, "kc_ms": r.kc_ms, "eval_ms": r.eval_ms, "value": r.value,
            "oracle": r.oracle, "oracle_std_error": r.oracle_err, "runs": r.runs, "timed_out": r.timed_out,
            "ok": r.ok} for r in rows], indent=2))
    else:
        print(format_table(rows))
    return 0 if all(r.ok for r in rows) else EXIT_MISMATCH


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hwmi", description="Weighted model integration by algebraic model counting.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--mc-samples", type=int, default=100_000, help="samples for Monte-Carlo integration")
    common.add_argument("--timeout-ms", type=int, default=None)
    common.add_argument("--format", choices=("json", "pretty"), default="pretty")
    common.add_argument("--var-order", default=None,
                        help="'frequency' (default), 'lex', or a comma-separated variable list")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", parents=[common], help="solve every query of a model")
    s.add_argument("path")
    s.add_argument("--query")
    s.add_argument("--semiring", choices=("density", "probability", "counting"), default="density")
    s.add_argument("--dump-ground", action="store_true", help="print the ground program first")
    s.set_defaults(fn=cmd_solve)

    c = sub.add_parser("compile", parents=[common], help="write the d-DNNF circuit of a query")
    c.add_argument("path")
    c.add_argument("--query")
    c.add_argument("-o", "--output")
    c.set_defaults(fn=cmd_compile)

    k = sub.add_parser("check", parents=[common], help="compare the pipeline against an oracle")
    k.add_argument("path")
    k.add_argument("--query")
    k.add_argument("--oracle-samples", type=int, default=1_000_000)
    k.set_defaults(fn=cmd_check)

    b = sub.add_parser("bench", parents=[common], help="run the bundled benchmark suite")
    b.add_argument("--runs", type=int, default=50)
    b.add_argument("--only", nargs="*")
    b.add_argument("--oracle-samples", type=int, default=1_000_000)
    b.set_defaults(fn=cmd_bench)
    return p


def main(argv=None) -> int:
    from .hal.parser import HalSemanticError

    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (SolveTimeout, CompileTimeout) as exc:
        print(f"timeout: {exc}", file=sys.stderr)
        return EXIT_TIMEOUT
    except (HalSemanticError, CompileError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SEMANTIC
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
