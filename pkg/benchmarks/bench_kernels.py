"""Time the numba tape kernel against the numpy fallback on the bundled models.

    python benchmarks/bench_kernels.py [--samples N] [--repeat R]
"""

import argparse
import time
from importlib import resources
from pathlib import Path

import numpy as np

from hwmi import kernels
from hwmi.kernels import Tape, eval_tape
from hwmi.pipeline import load_file

MODELS = ["broken.hwmi", "machine.halpl", "bench/addfun_sum.halpl", "bench/click_graph.halpl"]


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--samples", type=int, default=1_000_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    root = Path(str(resources.files("hwmi") / "models"))
    rng = np.random.default_rng(0)
    print(f"{'model':<28}{'atoms':>6}{'numpy (ms)':>12}{'numba (ms)':>12}{'speedup':>9}")
    for name in MODELS:
        m = load_file(root / name).model
        q = m.formulas[m.queries[0]]
        if m.evidence is not None:
            q = q & m.evidence
        bools, reals = list(m.registry.bools), list(m.registry.reals)
        tape = Tape(q, {b: i for i, b in enumerate(bools)}, {r: i for i, r in enumerate(reals)})
        B = rng.random((args.samples, len(bools))) < 0.5
        R = rng.normal(size=(args.samples, len(reals)))
        t_np = _best(lambda: eval_tape(tape, B, R, "numpy"), args.repeat)
        if kernels.HAVE_NUMBA:
            eval_tape(tape, B[:10], R[:10], "numba")  # compile outside the timing
            t_nb = _best(lambda: eval_tape(tape, B, R, "numba"), args.repeat)
            assert np.array_equal(eval_tape(tape, B, R, "numba"), eval_tape(tape, B, R, "numpy"))
            nb, speed = f"{t_nb * 1e3:12.1f}", f"{t_np / t_nb:8.1f}x"
        else:
            nb, speed = f"{'--':>12}", f"{'--':>9}"
        print(f"{name:<28}{len(tape.cmp):>6}{t_np * 1e3:12.1f}{nb}{speed}")


if __name__ == "__main__":
    main()
