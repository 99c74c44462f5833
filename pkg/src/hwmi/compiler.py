"""Exhaustive-DPLL compilation of propositional formulas into d-DNNF circuits.

Circuits are node tables; children always precede parents, the root is the
last node.  Node tuples:

    ("T",) ("F",) ("L", var, positive) ("A", children)
    ("O", var, low, high)   decision node: (~var & low) | (var & high)
    ("O", 0, left, right)   plain disjunction (only from hand-built or loaded circuits)

Variables are numbered from 1; ``var_names[i]`` is the formula name of ``i``.
"""

from __future__ import annotations

import time
from collections import Counter
from dataclasses import dataclass, field
from itertools import product

from .formula import FALSE, TRUE, And, Formula, Not, Or, Var, eval_formula


class CompileError(Exception):
    pass


class CompileTimeout(CompileError):
    pass


@dataclass
class DdnnfCircuit:
    nodes: list[tuple]
    root: int
    var_names: list[str]  # index 0 unused

    @property
    def n_vars(self) -> int:
        return len(self.var_names) - 1

    def var_index(self) -> dict[str, int]:
        return {n: i for i, n in enumerate(self.var_names) if i}

    def node_vars(self) -> list[frozenset[int]]:
        out: list[frozenset[int]] = []
        for node in self.nodes:
            kind = node[0]
            if kind in ("T", "F"):
                out.append(frozenset())
            elif kind == "L":
                out.append(frozenset((node[1],)))
            elif kind == "A":
                s = frozenset()
                for c in node[1]:
                    s |= out[c]
                out.append(s)
            else:
                s = out[node[2]] | out[node[3]]
                out.append(s | {node[1]} if node[1] else s)
        return out

    def reachable(self) -> list[bool]:
        seen = [False] * len(self.nodes)
        seen[self.root] = True
        for i in range(len(self.nodes) - 1, -1, -1):
            if not seen[i]:
                continue
            node = self.nodes[i]
            if node[0] == "A":
                for c in node[1]:
                    seen[c] = True
            elif node[0] == "O":
                seen[node[2]] = seen[node[3]] = True
        return seen

    def evaluate(self, assignment: dict[str, bool]) -> bool:
        idx = self.var_index()
        vals = {i: bool(assignment[n]) for n, i in idx.items() if n in assignment}
        return self.evaluate_indexed(vals)

    def evaluate_indexed(self, vals: dict[int, bool]) -> bool:
        out: list[bool] = []
        for node in self.nodes:
            kind = node[0]
            if kind == "T":
                out.append(True)
            elif kind == "F":
                out.append(False)
            elif kind == "L":
                out.append(vals[node[1]] == node[2])
            elif kind == "A":
                out.append(all(out[c] for c in node[1]))
            elif node[1]:
                out.append(out[node[3]] if vals[node[1]] else out[node[2]])
            else:
                out.append(out[node[2]] or out[node[3]])
        return out[self.root]

    def __len__(self):
        return len(self.nodes)


class CircuitBuilder:
    """Unique-table node factory; ``collapse`` folds ``O(v, x, x)`` to ``x``."""

    def __init__(self, collapse: bool = True):
        self.nodes: list[tuple] = []
        self.table: dict[tuple, int] = {}
        self.collapse = collapse

    def _add(self, node: tuple) -> int:
        nid = self.table.get(node)
        if nid is None:
            nid = len(self.nodes)
            self.nodes.append(node)
            self.table[node] = nid
        return nid

    def true(self) -> int:
        return self._add(("T",))

    def false(self) -> int:
        return self._add(("F",))

    def lit(self, var: int, positive: bool) -> int:
        return self._add(("L", var, bool(positive)))

    def conj(self, children) -> int:
        kids = []
        for c in children:
            kind = self.nodes[c][0]
            if kind == "F":
                return self.false()
            if kind == "T":
                continue
            kids.append(c)
        if not kids:
            return self.true()
        if len(kids) == 1:
            return kids[0]
        return self._add(("A", tuple(sorted(set(kids)))))

    def decision(self, var: int, low: int, high: int) -> int:
        if self.collapse:
            if low == high:
                return low
            if self.nodes[low][0] == "F" and self.nodes[high][0] == "F":
                return low
        return self._add(("O", var, low, high))

    def disj(self, left: int, right: int) -> int:
        return self._add(("O", 0, left, right))

    def finish(self, root: int, var_names) -> DdnnfCircuit:
        circuit = DdnnfCircuit(list(self.nodes), root, list(var_names))
        return compact(circuit)


def compact(c: DdnnfCircuit) -> DdnnfCircuit:
    """Drop unreachable nodes, keeping topological order."""
    seen = c.reachable()
    if all(seen):
        return c
    remap = {}
    nodes = []
    for i, node in enumerate(c.nodes):
        if not seen[i]:
            continue
        if node[0] == "A":
            node = ("A", tuple(remap[x] for x in node[1]))
        elif node[0] == "O":
            node = ("O", node[1], remap[node[2]], remap[node[3]])
        remap[i] = len(nodes)
        nodes.append(node)
    return DdnnfCircuit(nodes, remap[c.root], c.var_names)


# --------------------------------------------------------------------------- conditioning


def _normalize(f: Formula) -> Formula:
    """Implications rewritten as disjunctions, constants folded; everything else kept."""
    memo: dict[int, Formula] = {}

    def go(g: Formula) -> Formula:
        hit = memo.get(id(g))
        if hit is not None:
            return hit
        op = g.op
        if op in ("const", "var"):
            r = g
        elif op == "atom":
            raise CompileError("formula still contains arithmetic constraints; abstract it first")
        elif op == "not":
            r = simplify_not(go(g.args[0]))
        elif op in ("and", "or"):
            r = _fold_nary(op, [go(a) for a in g.args])
        elif op == "implies":
            r = _fold_nary("or", [simplify_not(go(g.args[0])), go(g.args[1])])
        else:
            r = simplify_iff(go(g.args[0]), go(g.args[1]))
        memo[id(g)] = r
        return r

    return go(f)


def condition(f: Formula, assignment: dict[str, bool]) -> Formula:
    """Plug truth values in and fold constants."""
    if not assignment or not (f.bool_vars & assignment.keys()):
        return f
    memo: dict[int, Formula] = {}

    def go(g: Formula) -> Formula:
        if not (g.bool_vars & assignment.keys()):
            return g
        hit = memo.get(id(g))
        if hit is not None:
            return hit
        op = g.op
        if op == "var":
            r = TRUE if assignment[g.payload] else FALSE
        elif op == "not":
            r = simplify_not(go(g.args[0]))
        elif op in ("and", "or"):
            r = _fold_nary(op, (go(a) for a in g.args))
        else:  # iff
            r = simplify_iff(go(g.args[0]), go(g.args[1]))
        memo[id(g)] = r
        return r

    return go(f)


def _fold_nary(op: str, kids) -> Formula:
    absorbing, neutral = (FALSE, TRUE) if op == "and" else (TRUE, FALSE)
    out = []
    for x in kids:
        if x is absorbing:
            return absorbing
        if x is not neutral:
            out.append(x)
    return And(*out) if op == "and" else Or(*out)


def simplify_not(x: Formula) -> Formula:
    if x is TRUE:
        return FALSE
    if x is FALSE:
        return TRUE
    if x.op == "not":
        return x.args[0]
    return Not(x)


def simplify_iff(a: Formula, b: Formula) -> Formula:
    if a is TRUE:
        return b
    if a is FALSE:
        return simplify_not(b)
    if b is TRUE:
        return a
    if b is FALSE:
        return simplify_not(a)
    if a is b:
        return TRUE
    return Formula("iff", (a, b))


def _literal(f: Formula):
    if f.op == "var":
        return f.payload, True
    if f.op == "not" and f.args[0].op == "var":
        return f.args[0].payload, False
    return None


def default_order(f: Formula) -> list[str]:
    """Frequency-descending (references in the formula DAG), ties broken lexicographically."""
    counts: Counter = Counter()
    seen = set()
    stack = [f]
    while stack:
        g = stack.pop()
        if id(g) in seen:
            continue
        seen.add(id(g))
        for a in g.args:
            if a.op == "var":
                counts[a.payload] += 1
        if g.op == "var":
            counts[g.payload] += 0
        stack.extend(g.args)
    return sorted(counts, key=lambda v: (-counts[v], v))


def _components(children):
    """Group conjuncts into classes of transitively shared variables."""
    parent = list(range(len(children)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner: dict[str, int] = {}
    for i, c in enumerate(children):
        for v in c.bool_vars:
            if v in owner:
                a, b = find(i), find(owner[v])
                if a != b:
                    parent[a] = b
            else:
                owner[v] = i
    groups: dict[int, list] = {}
    for i, c in enumerate(children):
        groups.setdefault(find(i), []).append(c)
    return list(groups.values())


@dataclass
class CompileStats:
    cache_hits: int = 0
    decisions: int = 0
    decompositions: int = 0
    seconds: float = 0.0


class Compiler:
    """Exhaustive Shannon expansion with unit propagation, components and a residual cache.

    ``order`` is a variable list (unlisted variables follow lexicographically),
    ``"frequency"`` (the default) or ``"lex"``.
    """

    def __init__(self, order: list[str] | str | None = None, max_vars: int = 64, timeout: float = 60.0,
                 cache: bool = True):
        self.order = order
        self.max_vars = max_vars
        self.timeout = timeout
        self.use_cache = cache
        self.stats = CompileStats()

    def compile(self, f: Formula, variables=None) -> DdnnfCircuit:
        start = time.perf_counter()
        self.deadline = start + self.timeout if self.timeout else None
        f = _normalize(f)
        names = sorted(set(variables or ()) | f.bool_vars)
        if len(names) > self.max_vars:
            raise CompileError(f"{len(names)} variables exceed the compiler cap of {self.max_vars}")
        if self.order in (None, "frequency"):
            order = default_order(f)
        elif self.order == "lex":
            order = []
        else:
            order = list(self.order)
        order += sorted(v for v in names if v not in order)
        self.rank = {v: i for i, v in enumerate(order)}
        self.index = {n: i + 1 for i, n in enumerate(names)}
        self.builder = CircuitBuilder()
        self.cache: dict[Formula, int] = {}
        root = self._compile(f)
        self.stats.seconds = time.perf_counter() - start
        return self.builder.finish(root, [""] + names)

    def _tick(self):
        if self.deadline is not None and time.perf_counter() > self.deadline:
            raise CompileTimeout(f"compilation exceeded {self.timeout} s")

    def _compile(self, f: Formula) -> int:
        b = self.builder
        if f is TRUE:
            return b.true()
        if f is FALSE:
            return b.false()
        if self.use_cache:
            hit = self.cache.get(f)
            if hit is not None:
                self.stats.cache_hits += 1
                return hit
        self._tick()
        lit = _literal(f)
        if lit is not None:
            nid = b.lit(self.index[lit[0]], lit[1])
        elif f.op == "and":
            nid = self._compile_and(f)
        else:
            nid = self._branch(f)
        if self.use_cache:
            self.cache[f] = nid
        return nid

    def _compile_and(self, f: Formula) -> int:
        b = self.builder
        units: dict[str, bool] = {}
        rest = []
        for child in f.args:
            lit = _literal(child)
            if lit is None:
                rest.append(child)
            elif units.get(lit[0], lit[1]) != lit[1]:
                return b.false()
            else:
                units[lit[0]] = lit[1]
        if units:
            residual = condition(And(*rest), units) if rest else TRUE
            if residual is FALSE:
                return b.false()
            kids = [b.lit(self.index[v], pol) for v, pol in sorted(units.items())]
            kids.append(self._compile(residual))
            return b.conj(kids)
        groups = _components(f.args)
        if len(groups) > 1:
            self.stats.decompositions += 1
            return b.conj([self._compile(And(*g)) for g in groups])
        return self._branch(f)

    def _branch(self, f: Formula) -> int:
        var = min(f.bool_vars, key=self.rank.__getitem__)
        self.stats.decisions += 1
        low = self._compile(condition(f, {var: False}))
        high = self._compile(condition(f, {var: True}))
        return self.builder.decision(self.index[var], low, high)


def compile_formula(f: Formula, order=None, variables=None, max_vars: int = 64, timeout: float = 60.0,
                    cache: bool = True) -> DdnnfCircuit:
    """Compile a propositional formula to d-DNNF."""
    return Compiler(order=order, max_vars=max_vars, timeout=timeout, cache=cache).compile(f, variables)


# --------------------------------------------------------------------------- verification


@dataclass
class VerifyReport:
    decomposable: bool = True
    deterministic: bool = True
    violations: list[str] = field(default_factory=list)
    method: str = "certificate"

    @property
    def ok(self) -> bool:
        return self.decomposable and self.deterministic


def _enumerate_disjoint(c: DdnnfCircuit, a: int, b: int, vars_: frozenset[int]) -> bool:
    sub_a = DdnnfCircuit(c.nodes, a, c.var_names)
    sub_b = DdnnfCircuit(c.nodes, b, c.var_names)
    order = sorted(vars_)
    for bits in product((False, True), repeat=len(order)):
        vals = dict(zip(order, bits))
        if sub_a.evaluate_indexed(vals) and sub_b.evaluate_indexed(vals):
            return False
    return True


def verify_ddnnf(c: DdnnfCircuit, enumeration_limit: int = 20) -> VerifyReport:
    """Check decomposability of every AND and determinism of every OR node."""
    report = VerifyReport()
    vs = c.node_vars()
    seen = c.reachable()
    for i, node in enumerate(c.nodes):
        if not seen[i]:
            continue
        if node[0] == "A":
            total = 0
            union = set()
            for ch in node[1]:
                total += len(vs[ch])
                union |= vs[ch]
            if total != len(union):
                report.decomposable = False
                report.violations.append(f"node {i}: AND children share variables")
        elif node[0] == "O":
            var, lo, hi = node[1], node[2], node[3]
            if var:
                if var in vs[lo] or var in vs[hi]:
                    report.decomposable = False
                    report.violations.append(f"node {i}: decision variable {var} reappears below")
            else:
                scope = vs[lo] | vs[hi]
                if len(scope) > enumeration_limit:
                    report.deterministic = False
                    report.violations.append(f"node {i}: plain OR over {len(scope)} variables not certifiable")
                    continue
                report.method = "enumeration"
                if not _enumerate_disjoint(c, lo, hi, scope):
                    report.deterministic = False
                    report.violations.append(f"node {i}: OR children are jointly satisfiable")
    return report


# --------------------------------------------------------------------------- smoothing & counting


def smooth(c: DdnnfCircuit, scope=None) -> DdnnfCircuit:
    """Pad OR branches (and the root) with ``v | ~v`` gadgets so they mention equal variables."""
    idx = c.var_index()
    if scope is None:
        target = frozenset(range(1, c.n_vars + 1))
    else:
        target = frozenset(idx[v] if isinstance(v, str) else v for v in scope)
    vs = c.node_vars()
    b = CircuitBuilder(collapse=False)
    new: dict[int, int] = {}
    seen = c.reachable()

    def pad(nid: int, have: frozenset, want: frozenset) -> int:
        missing = sorted(want - have)
        if not missing:
            return nid
        gadgets = [b.decision(v, b.true(), b.true()) for v in missing]
        return b.conj([nid] + gadgets)

    for i, node in enumerate(c.nodes):
        if not seen[i]:
            continue
        kind = node[0]
        if kind == "T":
            new[i] = b.true()
        elif kind == "F":
            new[i] = b.false()
        elif kind == "L":
            new[i] = b.lit(node[1], node[2])
        elif kind == "A":
            new[i] = b.conj([new[ch] for ch in node[1]])
        else:
            var, lo, hi = node[1], node[2], node[3]
            both = vs[lo] | vs[hi]
            nlo = pad(new[lo], vs[lo], both)
            nhi = pad(new[hi], vs[hi], both)
            new[i] = b.decision(var, nlo, nhi) if var else b.disj(nlo, nhi)
    root = pad(new[c.root], vs[c.root], target | vs[c.root])
    return b.finish(root, c.var_names)


def is_smooth(c: DdnnfCircuit) -> bool:
    """Every OR's branches mention the same variables (a FALSE branch has no models and is exempt)."""
    vs = c.node_vars()
    seen = c.reachable()

    def ok(n):
        lo, hi = c.nodes[n[2]], c.nodes[n[3]]
        return vs[n[2]] == vs[n[3]] or lo == ("F",) or hi == ("F",)

    return all(ok(n) for i, n in enumerate(c.nodes) if seen[i] and n[0] == "O")


def model_count(c: DdnnfCircuit, n_vars: int | None = None) -> int:
    """Exact number of models over ``n_vars`` variables (default: the circuit's)."""
    if not is_smooth(c):
        raise ValueError("circuit not smoothed")
    n_vars = c.n_vars if n_vars is None else n_vars
    counts: list[int] = []
    for node in c.nodes:
        kind = node[0]
        if kind == "T":
            counts.append(1)
        elif kind == "F":
            counts.append(0)
        elif kind == "L":
            counts.append(1)
        elif kind == "A":
            acc = 1
            for ch in node[1]:
                acc *= counts[ch]
            counts.append(acc)
        else:
            counts.append(counts[node[2]] + counts[node[3]])
    covered = len(c.node_vars()[c.root])
    if covered > n_vars:
        raise ValueError(f"circuit mentions {covered} variables, more than n_vars={n_vars}")
    return counts[c.root] * 2 ** (n_vars - covered)


# --------------------------------------------------------------------------- file format


def write_circuit(c: DdnnfCircuit) -> str:
    """Line format: header ``ddnnf <nodes> <vars>``, ``c var <i> <name>`` comments, nodes, root last."""
    c = _root_last(c)
    lines = [f"ddnnf {len(c.nodes)} {c.n_vars}"]
    for i, name in enumerate(c.var_names):
        if i:
            lines.append(f"c var {i} {name}")
    for node in c.nodes:
        kind = node[0]
        if kind in ("T", "F"):
            lines.append(kind)
        elif kind == "L":
            lines.append(f"L {node[1] if node[2] else -node[1]}")
        elif kind == "A":
            lines.append("A " + " ".join([str(len(node[1]))] + [str(x) for x in node[1]]))
        else:
            lines.append(f"O {node[1]} {node[2]} {node[3]}")
    return "\n".join(lines) + "\n"


def _root_last(c: DdnnfCircuit) -> DdnnfCircuit:
    c = compact(c)
    if c.root == len(c.nodes) - 1:
        return c
    # the root is the only node without parents once compacted, so it can move to the end
    order = [i for i in range(len(c.nodes)) if i != c.root] + [c.root]
    remap = {old: new for new, old in enumerate(order)}
    nodes = []
    for old in order:
        node = c.nodes[old]
        if node[0] == "A":
            node = ("A", tuple(remap[x] for x in node[1]))
        elif node[0] == "O":
            node = ("O", node[1], remap[node[2]], remap[node[3]])
        nodes.append(node)
    return DdnnfCircuit(nodes, len(nodes) - 1, c.var_names)


def read_circuit(text: str, validate: bool = True) -> DdnnfCircuit:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("ddnnf "):
        raise ValueError("missing 'ddnnf <n_nodes> <n_vars>' header")
    try:
        _, n_nodes, n_vars = lines[0].split()
        n_nodes, n_vars = int(n_nodes), int(n_vars)
    except ValueError:
        raise ValueError("malformed header") from None
    names = [""] + [f"x{i}" for i in range(1, n_vars + 1)]
    nodes: list[tuple] = []
    for lineno, ln in enumerate(lines[1:], start=2):
        parts = ln.split()
        if parts[0] == "c":
            if len(parts) >= 4 and parts[1] == "var":
                i = int(parts[2])
                if not 1 <= i <= n_vars:
                    raise ValueError(f"line {lineno}: variable {i} out of range")
                names[i] = ln.split(None, 3)[3]
            continue
        kind = parts[0]
        n = len(nodes)

        def child(x):
            x = int(x)
            if not 0 <= x < n:
                raise ValueError(f"line {lineno}: child {x} does not precede node {n}")
            return x

        if kind in ("T", "F") and len(parts) == 1:
            nodes.append((kind,))
        elif kind == "L" and len(parts) == 2:
            v = int(parts[1])
            if v == 0 or abs(v) > n_vars:
                raise ValueError(f"line {lineno}: literal {v} out of range")
            nodes.append(("L", abs(v), v > 0))
        elif kind == "A" and len(parts) >= 2:
            k = int(parts[1])
            if len(parts) != k + 2:
                raise ValueError(f"line {lineno}: AND arity mismatch")
            nodes.append(("A", tuple(child(x) for x in parts[2:])))
        elif kind == "O" and len(parts) == 4:
            v = int(parts[1])
            if not 0 <= v <= n_vars:
                raise ValueError(f"line {lineno}: decision variable {v} out of range")
            nodes.append(("O", v, child(parts[2]), child(parts[3])))
        else:
            raise ValueError(f"line {lineno}: cannot parse {ln!r}")
    if len(nodes) != n_nodes:
        raise ValueError(f"header announces {n_nodes} nodes, found {len(nodes)}")
    if not nodes:
        raise ValueError("empty circuit")
    c = DdnnfCircuit(nodes, len(nodes) - 1, names)
    if validate:
        report = verify_ddnnf(c)
        if not report.ok:
            raise ValueError("invalid d-DNNF: " + "; ".join(report.violations))
    return c


def circuit_to_formula(c: DdnnfCircuit) -> Formula:
    """Formula with the same models (used by equivalence tests)."""
    out: list[Formula] = []
    for node in c.nodes:
        kind = node[0]
        if kind == "T":
            out.append(TRUE)
        elif kind == "F":
            out.append(FALSE)
        elif kind == "L":
            v = Var(c.var_names[node[1]])
            out.append(v if node[2] else Not(v))
        elif kind == "A":
            out.append(And(*(out[ch] for ch in node[1])))
        elif node[1]:
            v = Var(c.var_names[node[1]])
            out.append(Or(And(Not(v), out[node[2]]), And(v, out[node[3]])))
        else:
            out.append(Or(out[node[2]], out[node[3]]))
    return out[c.root]


def equivalent_on_all_assignments(f: Formula, c: DdnnfCircuit) -> bool:
    names = sorted(f.bool_vars | set(c.var_names[1:]))
    for bits in product((False, True), repeat=len(names)):
        a = dict(zip(names, bits))
        if eval_formula(f, a) != c.evaluate(a):
            return False
    return True
