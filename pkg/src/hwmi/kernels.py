"""Per-sample formula evaluation over a flat instruction tape.

A formula is flattened to postfix code.  The numba kernel and the numpy
fallback both run it as a stack machine over whole sample columns (numba
fuses each instruction into one loop); a per-sample python interpreter is
kept as the reference.  Set ``HWMI_NO_NUMBA=1`` to force the fallback.
"""

from __future__ import annotations

import os

import numpy as np

from .formula import Formula

OP_BOOL, OP_ATOM, OP_CONST, OP_NOT, OP_AND, OP_OR, OP_IMPLIES, OP_IFF = range(8)
CMP_LT, CMP_LE, CMP_EQ = 0, 1, 2
_CMP = {"<": CMP_LT, "<=": CMP_LE, "=": CMP_EQ}

try:  # pragma: no cover - exercised through whichever backend is active
    if os.environ.get("HWMI_NO_NUMBA", "") not in ("", "0"):
        raise ImportError("numba disabled by HWMI_NO_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


class Tape:
    """Postfix program plus atom tables.

    ``code`` rows are ``(op, arg)``; atom ``k`` uses terms
    ``term_start[k]:term_start[k+1]`` of ``(term_coef, term_var, term_pow)``,
    with ``term_pow`` numerator/denominator split so undefined roots are detectable.
    """

    def __init__(self, f: Formula, bool_index: dict[str, int], real_index: dict[str, int]):
        code: list[tuple[int, int]] = []
        atoms: dict = {}
        t_coef, t_var, t_num, t_den, starts, cmps, bounds = [], [], [], [], [0], [], []

        def emit(g: Formula):
            op = g.op
            if op == "const":
                code.append((OP_CONST, int(bool(g.payload))))
            elif op == "var":
                code.append((OP_BOOL, bool_index[g.payload]))
            elif op == "atom":
                a = g.payload
                k = atoms.get(a)
                if k is None:
                    k = atoms[a] = len(cmps)
                    for c, v, p in a.terms:
                        t_coef.append(float(c))
                        t_var.append(real_index[v])
                        t_num.append(p.numerator)
                        t_den.append(p.denominator)
                    starts.append(len(t_coef))
                    cmps.append(_CMP[a.comparator])
                    bounds.append(float(a.bound))
                code.append((OP_ATOM, k))
            elif op == "not":
                emit(g.args[0])
                code.append((OP_NOT, 0))
            elif op in ("and", "or"):
                for x in g.args:
                    emit(x)
                code.append((OP_AND if op == "and" else OP_OR, len(g.args)))
            else:
                emit(g.args[0])
                emit(g.args[1])
                code.append((OP_IMPLIES if op == "implies" else OP_IFF, 2))

        emit(f)
        self.code = np.array(code, dtype=np.int64).reshape(-1, 2)
        self.term_coef = np.array(t_coef, dtype=np.float64)
        self.term_var = np.array(t_var, dtype=np.int64)
        self.term_num = np.array(t_num, dtype=np.int64)
        self.term_den = np.array(t_den, dtype=np.int64)
        self.term_start = np.array(starts, dtype=np.int64)
        self.cmp = np.array(cmps, dtype=np.int64)
        self.bound = np.array(bounds, dtype=np.float64)
        depth = cur = 0
        for op, arg in code:
            if op in (OP_BOOL, OP_ATOM, OP_CONST):
                cur += 1
            elif op in (OP_AND, OP_OR, OP_IMPLIES, OP_IFF):
                cur -= arg - 1
            depth = max(depth, cur)
        self.depth = max(depth, 1)

    def args(self):
        return (self.code, self.term_coef, self.term_var, self.term_num, self.term_den, self.term_start,
                self.cmp, self.bound, self.depth)


def _real_power(x, num, den):
    if den == 1:
        return x ** num
    if x >= 0:
        return x ** (num / den)
    if den % 2 == 0:
        return np.nan
    mag = (-x) ** (num / den)
    return -mag if num % 2 else mag


def _eval_tape_py(bools, reals, code, coef, tvar, tnum, tden, tstart, cmp, bound, depth):
    n = bools.shape[0]
    out = np.empty(n, dtype=np.bool_)
    stack = np.empty(depth, dtype=np.bool_)
    for s in range(n):
        sp = 0
        for pc in range(code.shape[0]):
            op = code[pc, 0]
            arg = code[pc, 1]
            if op == OP_BOOL:
                stack[sp] = bools[s, arg]
                sp += 1
            elif op == OP_CONST:
                stack[sp] = arg != 0
                sp += 1
            elif op == OP_ATOM:
                lhs = 0.0
                for t in range(tstart[arg], tstart[arg + 1]):
                    lhs += coef[t] * _real_power(reals[s, tvar[t]], tnum[t], tden[t])
                c = cmp[arg]
                if lhs != lhs:
                    v = False
                elif c == CMP_LT:
                    v = lhs < bound[arg]
                elif c == CMP_LE:
                    v = lhs <= bound[arg]
                else:
                    v = lhs == bound[arg]
                stack[sp] = v
                sp += 1
            elif op == OP_NOT:
                stack[sp - 1] = not stack[sp - 1]
            elif op == OP_AND:
                v = True
                for k in range(sp - arg, sp):
                    v = v and stack[k]
                sp -= arg
                stack[sp] = v
                sp += 1
            elif op == OP_OR:
                v = False
                for k in range(sp - arg, sp):
                    v = v or stack[k]
                sp -= arg
                stack[sp] = v
                sp += 1
            elif op == OP_IMPLIES:
                v = (not stack[sp - 2]) or stack[sp - 1]
                sp -= 1
                stack[sp - 1] = v
            else:
                v = stack[sp - 2] == stack[sp - 1]
                sp -= 1
                stack[sp - 1] = v
        out[s] = stack[0]
    return out


if HAVE_NUMBA:  # pragma: no cover - compiled path
    @njit(cache=False)
    def _pow_nb(x, num, den):
        if den == 1:
            if num == 1:
                return x
            if num == 2:
                return x * x
            return x ** num
        if x >= 0:
            return x ** (num / den)
        if den % 2 == 0:
            return np.nan
        mag = (-x) ** (num / den)
        return -mag if num % 2 else mag

    @njit(cache=False)
    def _eval_tape_nb(bools, reals, code, coef, tvar, tnum, tden, tstart, cmp, bound, depth):
        # column-wise: each instruction is one fused loop over all samples
        n = bools.shape[0]
        stack = np.empty((depth, n), dtype=np.bool_)
        lhs = np.empty(n)
        sp = 0
        for pc in range(code.shape[0]):
            op = code[pc, 0]
            arg = code[pc, 1]
            if op == 0:
                for s in range(n):
                    stack[sp, s] = bools[s, arg]
                sp += 1
            elif op == 2:
                stack[sp, :] = arg != 0
                sp += 1
            elif op == 1:
                lhs[:] = 0.0
                for t in range(tstart[arg], tstart[arg + 1]):
                    c, v, num, den = coef[t], tvar[t], tnum[t], tden[t]
                    for s in range(n):
                        lhs[s] += c * _pow_nb(reals[s, v], num, den)
                c = cmp[arg]
                b = bound[arg]
                for s in range(n):
                    x = lhs[s]
                    if x != x:
                        stack[sp, s] = False
                    elif c == 0:
                        stack[sp, s] = x < b
                    elif c == 1:
                        stack[sp, s] = x <= b
                    else:
                        stack[sp, s] = x == b
                sp += 1
            elif op == 3:
                for s in range(n):
                    stack[sp - 1, s] = not stack[sp - 1, s]
            elif op == 4 or op == 5:
                lo = sp - arg
                for k in range(lo + 1, sp):
                    for s in range(n):
                        if op == 4:
                            stack[lo, s] = stack[lo, s] and stack[k, s]
                        else:
                            stack[lo, s] = stack[lo, s] or stack[k, s]
                sp = lo + 1
            elif op == 6:
                for s in range(n):
                    stack[sp - 2, s] = (not stack[sp - 2, s]) or stack[sp - 1, s]
                sp -= 1
            else:
                for s in range(n):
                    stack[sp - 2, s] = stack[sp - 2, s] == stack[sp - 1, s]
                sp -= 1
        return stack[0].copy()


def _np_power(x, num, den):
    if den == 1:
        return x ** num
    with np.errstate(invalid="ignore"):
        mag = np.abs(x) ** (num / den)
        if den % 2 == 0:
            return np.where(x >= 0, mag, np.nan)
        return np.where(x >= 0, mag, -mag if num % 2 else mag)


def eval_tape_numpy(tape: Tape, bools: np.ndarray, reals: np.ndarray) -> np.ndarray:
    """Column-wise evaluation of the tape (the fallback backend)."""
    n = bools.shape[0]
    stack: list[np.ndarray] = []
    for op, arg in tape.code:
        if op == OP_BOOL:
            stack.append(bools[:, arg])
        elif op == OP_CONST:
            stack.append(np.full(n, arg != 0))
        elif op == OP_ATOM:
            lhs = np.zeros(n)
            for t in range(tape.term_start[arg], tape.term_start[arg + 1]):
                lhs = lhs + tape.term_coef[t] * _np_power(reals[:, tape.term_var[t]], tape.term_num[t],
                                                          tape.term_den[t])
            b = tape.bound[arg]
            with np.errstate(invalid="ignore"):
                v = lhs < b if tape.cmp[arg] == CMP_LT else lhs <= b if tape.cmp[arg] == CMP_LE else lhs == b
            stack.append(v)
        elif op == OP_NOT:
            stack[-1] = ~stack[-1]
        elif op in (OP_AND, OP_OR):
            parts = stack[-arg:]
            del stack[-arg:]
            acc = parts[0].copy()
            for p in parts[1:]:
                if op == OP_AND:
                    acc &= p
                else:
                    acc |= p
            stack.append(acc)
        elif op == OP_IMPLIES:
            b = stack.pop()
            a = stack.pop()
            stack.append(~a | b)
        else:
            b = stack.pop()
            a = stack.pop()
            stack.append(a == b)
    return stack[0]


def eval_tape(tape: Tape, bools: np.ndarray, reals: np.ndarray, backend: str | None = None) -> np.ndarray:
    """Truth value of the taped formula for every sample row."""
    backend = backend or ("numba" if HAVE_NUMBA else "numpy")
    bools = np.ascontiguousarray(bools, dtype=np.bool_)
    reals = np.ascontiguousarray(reals, dtype=np.float64)
    if backend == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba backend unavailable")
        return _eval_tape_nb(bools, reals, *tape.args())
    if backend == "python":
        return _eval_tape_py(bools, reals, *tape.args())
    return eval_tape_numpy(tape, bools, reals)
