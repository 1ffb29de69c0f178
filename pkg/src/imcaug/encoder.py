"""Transition-system construction and bit-level CNF encoding.

One transition is one complete loop iteration (large-block encoding). If the
loop condition is false the transition stutters, which keeps ``trans`` total
without adding states: a state whose loop can exit is already checked by
``safe`` at that same time step.

Formulas are bit-blasted through Tseitin templates. A template is the CNF of
one formula over local variable numbers; instantiating it at a time step maps
its inputs onto the timed variable blocks and gives every auxiliary variable
a fresh number, so auxiliaries never cross an A/B partition boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from . import formula as F
from . import lang
from .formula import Node

NONDET_PREFIX = "?nd"
EXIT_PREFIX = "?ex"


def primed(name: str) -> str:
    return name + "'"


@dataclass
class TransitionSystem:
    state_vars: list[tuple[str, int]]
    init: Node
    trans: Node
    safe: Node
    exit_guard: Node
    trans_inputs: list[tuple[str, int]] = field(default_factory=list)
    exit_inputs: list[tuple[str, int]] = field(default_factory=list)
    next_state: dict[str, Node] = field(default_factory=dict)
    program: lang.Program | None = None

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.state_vars]

    @property
    def width(self) -> int:
        return self.state_vars[0][1]

    @property
    def bad(self) -> Node:
        return F.mk_not(self.safe)

    def state_formula(self, state: Mapping[str, int]) -> Node:
        return F.conj(F.eq(F.var(n, w), F.const(state[n], w)) for n, w in self.state_vars)


# -- program -> transition system -------------------------------------------

class _SymExec:
    def __init__(self, p: lang.Program, nondet_prefix: str):
        self.p = p
        self.w = p.width
        self.prefix = nondet_prefix
        self.used: dict[int, int] = {}

    def nd(self, index: int, is_bool: bool) -> Node:
        self.used[index] = 0 if is_bool else self.w
        name = f"{self.prefix}{index}"
        return F.bvar(name) if is_bool else F.var(name, self.w)

    def int_expr(self, e, env) -> Node:
        if isinstance(e, lang.Const):
            return F.const(e.value, self.w)
        if isinstance(e, lang.Var):
            return env[e.name]
        if isinstance(e, lang.Nondet):
            return self.nd(e.index, False)
        a = self.int_expr(e.left, env)
        b = self.int_expr(e.right, env)
        return {"+": F.add, "-": F.sub, "*": F.mul, "/": F.udiv, "%": F.urem}[e.op](a, b)

    def bool_expr(self, e, env) -> Node:
        if isinstance(e, lang.BoolConst):
            return F.boolean(e.value)
        if isinstance(e, lang.BoolNondet):
            return self.nd(e.index, True)
        if isinstance(e, lang.Not):
            return F.mk_not(self.bool_expr(e.arg, env))
        if isinstance(e, lang.BoolOp):
            a = self.bool_expr(e.left, env)
            b = self.bool_expr(e.right, env)
            return F.mk_and(a, b) if e.op == "&&" else F.mk_or(a, b)
        a = self.int_expr(e.left, env)
        b = self.int_expr(e.right, env)
        return {"==": F.eq, "!=": F.ne, "<": F.ult, "<=": F.ule,
                ">": F.ugt, ">=": F.uge}[e.op](a, b)

    def block(self, stmts, env: dict) -> dict:
        for st in stmts:
            if isinstance(st, lang.Assign):
                env = dict(env)
                env[st.name] = self.int_expr(st.expr, env)
            else:
                c = self.bool_expr(st.cond, env)
                t = self.block(st.then, env)
                e = self.block(st.els, env)
                env = {n: F.ite(c, t[n], e[n]) for n in env}
        return env

    def inputs(self) -> list[tuple[str, int]]:
        return [(f"{self.prefix}{i}", w) for i, w in sorted(self.used.items())]


def build_ts(p: lang.Program) -> TransitionSystem:
    w = p.width
    cur = {n: F.var(n, w) for n in p.names}
    tx = _SymExec(p, NONDET_PREFIX)
    cond = tx.bool_expr(p.loop_condition, cur)
    body = tx.block(p.loop_body, cur)
    nxt = {n: F.ite(cond, body[n], cur[n]) for n in p.names}
    trans = F.conj(F.eq(F.var(primed(n), w), nxt[n]) for n in p.names)

    ex = _SymExec(p, EXIT_PREFIX)
    exit_guard = F.mk_not(ex.bool_expr(p.loop_condition, cur))
    post = F.conj(ex.bool_expr(a, cur) for a in p.post_assertions)
    safe = F.mk_or(F.mk_not(exit_guard), post)

    init = F.conj(F.eq(cur[v.name], F.const(v.init, w)) for v in p.variables)
    return TransitionSystem(
        state_vars=[(n, w) for n in p.names],
        init=init,
        trans=trans,
        safe=safe,
        exit_guard=exit_guard,
        trans_inputs=tx.inputs(),
        exit_inputs=ex.inputs(),
        next_state=nxt,
        program=p,
    )


# -- timed variables --------------------------------------------------------

def _nbits(width: int) -> int:
    return max(width, 1)


class TimedVariableMap:
    """CNF variable blocks for every (symbol, time) pair of a k-step unrolling.

    Allocation is eager and in a fixed order, so the map is identical for
    identical (ts, k) and every query built on it numbers its auxiliary
    variables after ``num_vars``.
    """

    def __init__(self, ts: TransitionSystem, k: int):
        self.ts = ts
        self.k = k
        self.blocks: dict[tuple[str, int], list[int]] = {}
        self.owner: dict[int, tuple[str, int, int]] = {}
        self.num_vars = 0
        for t in range(k + 1):
            for name, w in ts.state_vars:
                self._alloc(name, t, w)
        for t in range(k):
            for name, w in ts.trans_inputs:
                self._alloc(name, t, w)
        for t in range(k + 1):
            for name, w in ts.exit_inputs:
                self._alloc(name, t, w)

    def _alloc(self, name: str, t: int, width: int):
        block = []
        for j in range(_nbits(width)):
            self.num_vars += 1
            block.append(self.num_vars)
            self.owner[self.num_vars] = (name, t, j)
        self.blocks[(name, t)] = block

    def block(self, name: str, t: int) -> list[int]:
        return self.blocks[(name, t)]

    def env(self, t: int) -> dict[str, list[int]]:
        """Symbol environment of a formula instantiated at time ``t``:
        plain names at t, primed names and transition inputs of step t."""
        out = {}
        for name, _ in self.ts.state_vars:
            out[name] = self.blocks[(name, t)]
            if (name, t + 1) in self.blocks:
                out[primed(name)] = self.blocks[(name, t + 1)]
        for name, _ in self.ts.trans_inputs:
            if (name, t) in self.blocks:
                out[name] = self.blocks[(name, t)]
        for name, _ in self.ts.exit_inputs:
            out[name] = self.blocks[(name, t)]
        return out

    def state_var_at(self, v: int, t: int) -> tuple[str, int] | None:
        """(state variable, bit) if CNF variable ``v`` belongs to s_t."""
        info = self.owner.get(v)
        if info is None or info[1] != t:
            return None
        name, _, j = info
        if name not in self.ts.names:
            return None
        return name, j


# -- CNF instances ----------------------------------------------------------

@dataclass
class CnfInstance:
    num_vars: int
    clauses: list[tuple[int, ...]] = field(default_factory=list)
    labels: list[str] = field(default_factory=list)
    origins: list[str] = field(default_factory=list)
    tvm: TimedVariableMap | None = None
    cut: int = 1  # time index of the shared A/B state block

    def new_var(self) -> int:
        self.num_vars += 1
        return self.num_vars

    def add(self, clause: Sequence[int], label: str = "A", origin: str = ""):
        self.clauses.append(tuple(clause))
        self.labels.append(label)
        self.origins.append(origin)

    def part(self, label: str) -> list[tuple[int, ...]]:
        return [c for c, l in zip(self.clauses, self.labels) if l == label]

    def to_dimacs(self) -> str:
        lines = [f"p cnf {self.num_vars} {len(self.clauses)}"]
        for c, lab, org in zip(self.clauses, self.labels, self.origins):
            lines.append(f"c partition {lab} {org}".rstrip())
            lines.append(" ".join(map(str, c)) + " 0")
        return "\n".join(lines) + "\n"


# -- bit-blasting -----------------------------------------------------------

def _neg(a):
    return (not a) if a is True or a is False else -a


class _Blaster:
    """Tseitin encoder over local variable numbers. Bits are ``True``,
    ``False`` or nonzero ints; constants are folded eagerly."""

    def __init__(self, inputs: dict[str, int]):
        self.n = 0
        self.input_bits: dict[str, list[int]] = {}
        for name in sorted(inputs):
            bits = []
            for _ in range(inputs[name]):
                self.n += 1
                bits.append(self.n)
            self.input_bits[name] = bits
        self.num_inputs = self.n
        self.clauses: list[tuple[int, ...]] = []
        self.gates: dict = {}
        self.memo: dict[int, object] = {}

    def fresh(self) -> int:
        self.n += 1
        return self.n

    # gates
    def and_n(self, lits):
        s = set()
        for l in lits:
            if l is False:
                return False
            if l is True:
                continue
            if -l in s:
                return False
            s.add(l)
        if not s:
            return True
        if len(s) == 1:
            return next(iter(s))
        key = ("and", tuple(sorted(s)))
        g = self.gates.get(key)
        if g is None:
            g = self.fresh()
            for l in key[1]:
                self.clauses.append((-g, l))
            self.clauses.append((g,) + tuple(-l for l in key[1]))
            self.gates[key] = g
        return g

    def or_n(self, lits):
        return _neg(self.and_n([_neg(l) for l in lits]))

    def xor2(self, a, b):
        if a is False:
            return b
        if a is True:
            return _neg(b)
        if b is False:
            return a
        if b is True:
            return _neg(a)
        if a == b:
            return False
        if a == -b:
            return True
        flip = (a < 0) != (b < 0)
        x, y = sorted((abs(a), abs(b)))
        key = ("xor", x, y)
        g = self.gates.get(key)
        if g is None:
            g = self.fresh()
            self.clauses += [(-g, x, y), (-g, -x, -y), (g, -x, y), (g, x, -y)]
            self.gates[key] = g
        return -g if flip else g

    def mux(self, c, t, e):
        if c is True:
            return t
        if c is False:
            return e
        if t is e or (type(t) is int and type(e) is int and t == e):
            return t
        if t is True:
            return self.or_n([c, e])
        if t is False:
            return self.and_n([-c, e])
        if e is True:
            return self.or_n([-c, t])
        if e is False:
            return self.and_n([c, t])
        if t == -e:
            return self.xor2(c, -t)
        if c < 0:
            c, t, e = -c, e, t
        key = ("mux", c, t, e)
        g = self.gates.get(key)
        if g is None:
            g = self.fresh()
            self.clauses += [(-c, -t, g), (-c, t, -g), (c, -e, g), (c, e, -g),
                             (-t, -e, g), (t, e, -g)]
            self.gates[key] = g
        return g

    # arithmetic
    def adder(self, a, b, cin):
        out = []
        c = cin
        for x, y in zip(a, b):
            xy = self.xor2(x, y)
            out.append(self.xor2(xy, c))
            c = self.or_n([self.and_n([x, y]), self.and_n([c, xy])])
        return out, c

    def subtract(self, a, b):
        """(a - b, carry) where carry is true iff a >= b (unsigned)."""
        return self.adder(a, [_neg(y) for y in b], True)

    def multiply(self, a, b):
        w = len(a)
        acc = [False] * w
        for i in range(w):
            if b[i] is False:
                continue
            part = [False] * i + [self.and_n([a[j], b[i]]) for j in range(w - i)]
            acc, _ = self.adder(acc, part, False)
        return acc

    def divide(self, a, b):
        """Restoring division; b = 0 gives all-ones quotient, remainder a."""
        w = len(a)
        rem = [False] * w
        quot = [False] * w
        bx = list(b) + [False]
        for i in range(w - 1, -1, -1):
            shifted = [a[i]] + rem
            diff, ge = self.subtract(shifted, bx)
            quot[i] = ge
            rem = [self.mux(ge, d, s) for d, s in zip(diff[:w], shifted[:w])]
        return quot, rem

    def ult(self, a, b):
        _, ge = self.subtract(a, b)
        return _neg(ge)

    def equal(self, a, b):
        return self.and_n([_neg(self.xor2(x, y)) for x, y in zip(a, b)])

    # formulas
    def bits(self, n: Node) -> list:
        r = self.memo.get(n.id)
        if r is not None:
            return r
        op = n.op
        if op == "const":
            r = [bool((n.val >> j) & 1) for j in range(n.width)]
        elif op == "var":
            r = self.input_bits[n.val][: n.width]
        elif op == "ite":
            c = self.lit(n.args[0])
            t = self.bits(n.args[1])
            e = self.bits(n.args[2])
            r = [self.mux(c, x, y) for x, y in zip(t, e)]
        else:
            a = self.bits(n.args[0])
            b = self.bits(n.args[1])
            if op == "add":
                r, _ = self.adder(a, b, False)
            elif op == "sub":
                r, _ = self.subtract(a, b)
            elif op == "mul":
                r = self.multiply(a, b)
            elif op == "udiv":
                r = self.divide(a, b)[0]
            elif op == "urem":
                r = self.divide(a, b)[1]
            else:
                raise ValueError(f"not a bitvector op: {op}")
        self.memo[n.id] = r
        return r

    def lit(self, n: Node):
        if n.id in self.memo:
            return self.memo[n.id]
        op = n.op
        if op == "true":
            r = True
        elif op == "false":
            r = False
        elif op == "bvar":
            r = self.input_bits[n.val][0]
        elif op == "bit":
            r = self.input_bits[n.val[0]][n.val[1]]
        elif op == "not":
            r = _neg(self.lit(n.args[0]))
        elif op == "and":
            r = self.and_n([self.lit(a) for a in n.args])
        elif op == "or":
            r = self.or_n([self.lit(a) for a in n.args])
        elif op == "eq":
            r = self.equal(self.bits(n.args[0]), self.bits(n.args[1]))
        elif op == "ult":
            r = self.ult(self.bits(n.args[0]), self.bits(n.args[1]))
        elif op == "ule":
            r = _neg(self.ult(self.bits(n.args[1]), self.bits(n.args[0])))
        else:
            raise ValueError(f"not a Boolean op: {op}")
        self.memo[n.id] = r
        return r

    def unit(self, l):
        if l is True:
            return
        self.clauses.append(() if l is False else (l,))

    def assert_node(self, n: Node):
        op = n.op
        if op == "and":
            for a in n.args:
                self.assert_node(a)
        elif op == "eq" and not n.args[0].is_bool:
            for x, y in zip(self.bits(n.args[0]), self.bits(n.args[1])):
                xb, yb = type(x) is bool, type(y) is bool
                if xb and yb:
                    if x != y:
                        self.clauses.append(())
                elif xb:
                    self.unit(y if x else -y)
                elif yb:
                    self.unit(x if y else -x)
                elif x != y:
                    self.clauses += [(-x, y), (x, -y)]
        elif op == "or":
            lits = []
            for a in n.args:
                l = self.lit(a)
                if l is True:
                    return
                if l is not False:
                    lits.append(l)
            self.clauses.append(tuple(lits))
        elif op == "not" and n.args[0].op == "or":
            for a in n.args[0].args:
                self.assert_node(F.mk_not(a))
        else:
            self.unit(self.lit(n))


@dataclass
class Template:
    inputs: list[tuple[str, int]]  # (symbol, number of bits) in local order
    num_local: int
    num_inputs: int
    clauses: list[tuple[int, ...]]
    out: object = None  # output bit for literal-mode templates


def _input_widths(n: Node) -> dict[str, int]:
    need: dict[str, int] = {}
    for m in F.topo(n):
        if m.op == "var":
            need[m.val] = max(need.get(m.val, 0), m.width)
        elif m.op == "bvar":
            need[m.val] = max(need.get(m.val, 0), 1)
        elif m.op == "bit":
            need[m.val[0]] = max(need.get(m.val[0], 0), m.val[1] + 1)
    return need


_TEMPLATES: dict[tuple[str, int], Template] = {}


def compile_template(n: Node, mode: str = "assert") -> Template:
    key = (mode, n.id)
    t = _TEMPLATES.get(key)
    if t is not None:
        return t
    widths = _input_widths(n)
    bl = _Blaster(widths)
    out = None
    if mode == "assert":
        bl.assert_node(n)
    else:
        out = bl.lit(n)
    t = Template(inputs=[(name, widths[name]) for name in sorted(widths)],
                 num_local=bl.n, num_inputs=bl.num_inputs, clauses=bl.clauses, out=out)
    _TEMPLATES[key] = t
    return t


def instantiate(t: Template, env: Mapping[str, Sequence[int]], cnf: CnfInstance,
                label: str, origin: str):
    """Add ``t``'s clauses to ``cnf`` with inputs bound to ``env`` blocks.
    Returns the output literal (or constant) for literal-mode templates."""
    m = [0] * (t.num_local + 1)
    i = 1
    for name, nb in t.inputs:
        block = env[name]
        for j in range(nb):
            m[i] = block[j]
            i += 1
    for j in range(t.num_inputs + 1, t.num_local + 1):
        m[j] = cnf.new_var()
    for c in t.clauses:
        cnf.add([m[l] if l > 0 else -m[-l] for l in c], label, origin)
    out = t.out
    if type(out) is int:
        return m[out] if out > 0 else -m[-out]
    return out


def encode(cnf: CnfInstance, n: Node, env: Mapping[str, Sequence[int]], label: str = "A",
           origin: str = ""):
    instantiate(compile_template(n, "assert"), env, cnf, label, origin)


def encode_lit(cnf: CnfInstance, n: Node, env: Mapping[str, Sequence[int]], label: str = "A",
               origin: str = ""):
    return instantiate(compile_template(n, "lit"), env, cnf, label, origin)


# -- queries ----------------------------------------------------------------

def bmc_formula(ts: TransitionSystem, start: Node, k: int, tvm: TimedVariableMap,
                start_origin: str = "init") -> CnfInstance:
    """start(s0) & T(s0,s1) [A]  &  T(s1,s2) ... T(sk-1,sk) & OR_i !P(si) [B]."""
    if k < 1:
        raise ValueError("k must be positive")
    if tvm.k != k:
        raise ValueError("timed variable map built for a different bound")
    cnf = CnfInstance(tvm.num_vars, tvm=tvm, cut=1)
    encode(cnf, start, tvm.env(0), "A", start_origin)
    encode(cnf, ts.trans, tvm.env(0), "A", "trans 0")
    for i in range(1, k):
        encode(cnf, ts.trans, tvm.env(i), "B", f"trans {i}")
    bads = []
    for i in range(1, k + 1):
        l = encode_lit(cnf, ts.bad, tvm.env(i), "B", "property")
        if l is True:
            bads = None
            break
        if l is not False:
            bads.append(l)
    if bads is not None:
        cnf.add(bads, "B", "property")
    return cnf


def zero_step_check(ts: TransitionSystem) -> CnfInstance:
    tvm = TimedVariableMap(ts, 0)
    cnf = CnfInstance(tvm.num_vars, tvm=tvm, cut=0)
    encode(cnf, ts.init, tvm.env(0), "A", "init")
    encode(cnf, ts.bad, tvm.env(0), "A", "property")
    return cnf


def implication_check(lhs: Node, rhs: Node, ts: TransitionSystem,
                      origin: str = "fixed-point-check") -> CnfInstance:
    """CNF of lhs & !rhs at one time index; UNSAT iff lhs => rhs."""
    tvm = TimedVariableMap(ts, 0)
    cnf = CnfInstance(tvm.num_vars, tvm=tvm, cut=0)
    encode(cnf, lhs, tvm.env(0), "A", origin)
    encode(cnf, F.mk_not(rhs), tvm.env(0), "A", origin)
    return cnf


def consecution_check(pre: Node, post: Node, ts: TransitionSystem,
                      origin: str = "consecution") -> CnfInstance:
    """CNF of pre(s) & T(s,s') & !post(s'); UNSAT iff post is closed under
    one transition from pre."""
    tvm = TimedVariableMap(ts, 1)
    cnf = CnfInstance(tvm.num_vars, tvm=tvm, cut=1)
    encode(cnf, pre, tvm.env(0), "A", origin)
    encode(cnf, ts.trans, tvm.env(0), "A", "trans 0")
    encode(cnf, F.mk_not(post), tvm.env(1), "B", origin)
    return cnf


def _decode(model, block: Sequence[int]) -> int:
    v = 0
    for j, var in enumerate(block):
        if model[var]:
            v |= 1 << j
    return v


def extract_state(model, tvm: TimedVariableMap, i: int) -> dict[str, int]:
    """Decode the s_i blocks of a satisfying assignment (indexable by
    variable number) into a concrete state."""
    return {name: _decode(model, tvm.block(name, i)) for name, _ in tvm.ts.state_vars}


def extract_inputs(model, tvm: TimedVariableMap, i: int, exit_side: bool = False) -> dict[int, int]:
    """Nondet values drawn at time ``i``, keyed by occurrence index."""
    prefix, inputs = (EXIT_PREFIX, tvm.ts.exit_inputs) if exit_side else (NONDET_PREFIX, tvm.ts.trans_inputs)
    out = {}
    for name, _ in inputs:
        if (name, i) in tvm.blocks:
            out[int(name[len(prefix):])] = _decode(model, tvm.block(name, i))
    return out
