"""Interval data-flow analysis at the loop head.

Per-variable unsigned intervals, with join at the loop head, delayed
widening and a short narrowing phase. Any arithmetic result that may leave
[0, 2^W) is sent to the full range, which keeps the analysis sound under
wrap-around. Published invariants pass an inductiveness check by SAT before
the model checker sees them.
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, field
from typing import Mapping

from . import formula as F
from . import lang, sat
from .encoder import TransitionSystem, consecution_check, implication_check
from .formula import Node

log = logging.getLogger(__name__)

MAX_LEVEL = 3
NARROWING_STEPS = 2

# An environment maps every variable to (lo, hi); None is bottom.
Interval = tuple[int, int]


def widening_delay(level: int) -> int:
    return 4 * (level + 1)


def iteration_bound(level: int, num_vars: int) -> int:
    """Upper bound on ascending iterations performed by ``analyze``."""
    return widening_delay(level) + 2 * num_vars + 1


def top_env(p: lang.Program) -> dict[str, Interval]:
    m = (1 << p.width) - 1
    return {n: (0, m) for n in p.names}


def join(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return {n: (min(a[n][0], b[n][0]), max(a[n][1], b[n][1])) for n in a}


def meet(a, b):
    if a is None or b is None:
        return None
    out = {}
    for n in a:
        lo, hi = max(a[n][0], b[n][0]), min(a[n][1], b[n][1])
        if lo > hi:
            return None
        out[n] = (lo, hi)
    return out


def leq(a, b) -> bool:
    """a is contained in b."""
    if a is None:
        return True
    if b is None:
        return False
    return all(b[n][0] <= a[n][0] and a[n][1] <= b[n][1] for n in a)


# -- abstract expressions ---------------------------------------------------

def eval_interval(e: lang.IntExpr, env: Mapping[str, Interval], w: int) -> Interval:
    m = (1 << w) - 1
    if isinstance(e, lang.Const):
        return (e.value, e.value)
    if isinstance(e, lang.Var):
        return env[e.name]
    if isinstance(e, lang.Nondet):
        return (0, m)
    (alo, ahi) = eval_interval(e.left, env, w)
    (blo, bhi) = eval_interval(e.right, env, w)
    op = e.op
    if op == "+":
        lo, hi = alo + blo, ahi + bhi
    elif op == "-":
        lo, hi = alo - bhi, ahi - blo
    elif op == "*":
        lo, hi = alo * blo, ahi * bhi
    elif op == "/":
        if bhi == 0:
            return (m, m)
        lo = alo // bhi
        hi = m if blo == 0 else ahi // blo
    else:
        if bhi == 0:
            return (alo, ahi)
        if blo > 0 and ahi < blo:
            return (alo, ahi)
        hi = min(ahi, bhi - 1) if blo > 0 else max(ahi, bhi - 1)
        return (0, hi)
    if lo < 0 or hi > m:
        return (0, m)
    return (lo, hi)


_FLIP = {"<": ">", "<=": ">=", ">": "<", ">=": "<=", "==": "==", "!=": "!="}
_NEGATE = {"<": ">=", "<=": ">", ">": "<=", ">=": "<", "==": "!=", "!=": "=="}


def _definitely_false(op: str, a: Interval, b: Interval) -> bool:
    if op == "==":
        return a[1] < b[0] or b[1] < a[0]
    if op == "!=":
        return a[0] == a[1] == b[0] == b[1]
    if op == "<":
        return a[0] >= b[1]
    if op == "<=":
        return a[0] > b[1]
    if op == ">":
        return a[1] <= b[0]
    return a[1] < b[0]


def _refine(iv: Interval, op: str, other: Interval) -> Interval | None:
    """Narrow ``iv`` by ``iv op other``; None when empty."""
    lo, hi = iv
    olo, ohi = other
    if op == "==":
        lo, hi = max(lo, olo), min(hi, ohi)
    elif op == "!=":
        if olo == ohi:
            if lo == olo:
                lo += 1
            if hi == olo:
                hi -= 1
    elif op == "<":
        hi = min(hi, ohi - 1)
    elif op == "<=":
        hi = min(hi, ohi)
    elif op == ">":
        lo = max(lo, olo + 1)
    else:
        lo = max(lo, olo)
    return (lo, hi) if lo <= hi else None


def assume(cond: lang.BoolExpr, env, w: int):
    """Restrict ``env`` to states that may satisfy ``cond``."""
    if env is None:
        return None
    if isinstance(cond, lang.BoolConst):
        return env if cond.value else None
    if isinstance(cond, lang.BoolNondet):
        return env
    if isinstance(cond, lang.BoolOp):
        if cond.op == "&&":
            return assume(cond.right, assume(cond.left, env, w), w)
        return join(assume(cond.left, env, w), assume(cond.right, env, w))
    if isinstance(cond, lang.Not):
        return assume(_push_not(cond.arg), env, w)
    a = eval_interval(cond.left, env, w)
    b = eval_interval(cond.right, env, w)
    if _definitely_false(cond.op, a, b):
        return None
    out = dict(env)
    if isinstance(cond.left, lang.Var):
        r = _refine(out[cond.left.name], cond.op, b)
        if r is None:
            return None
        out[cond.left.name] = r
    if isinstance(cond.right, lang.Var):
        a = eval_interval(cond.left, out, w)
        r = _refine(out[cond.right.name], _FLIP[cond.op], a)
        if r is None:
            return None
        out[cond.right.name] = r
    return out


def _push_not(e: lang.BoolExpr) -> lang.BoolExpr:
    if isinstance(e, lang.BoolConst):
        return lang.BoolConst(not e.value)
    if isinstance(e, lang.BoolNondet):
        return e
    if isinstance(e, lang.Not):
        return e.arg
    if isinstance(e, lang.BoolOp):
        op = "||" if e.op == "&&" else "&&"
        return lang.BoolOp(op, lang.Not(e.left), lang.Not(e.right))
    return lang.Cmp(_NEGATE[e.op], e.left, e.right)


def transfer(env, body, w: int):
    """Abstract post-image of one execution of ``body``."""
    if env is None:
        return None
    for st in body:
        if env is None:
            return None
        if isinstance(st, lang.Assign):
            env = dict(env)
            env[st.name] = eval_interval(st.expr, env, w)
        else:
            t = transfer(assume(st.cond, env, w), st.then, w)
            e = transfer(assume(lang.Not(st.cond), env, w), st.els, w)
            env = join(t, e)
    return env


@dataclass
class AnalysisResult:
    env: dict
    iterations: int
    widened: bool


def analyze_full(p: lang.Program, level: int = 0) -> AnalysisResult:
    w = p.width
    m = (1 << w) - 1
    init = {n: (v, v) for n, v in p.initial_state.items()}

    def post(head):
        return transfer(assume(p.loop_condition, head, w), p.loop_body, w)

    head = init
    delay = widening_delay(level)
    iterations = 0
    widened = False
    while True:
        iterations += 1
        new = join(head, post(head))
        if new == head:
            break
        if iterations > delay:
            widened = True
            new = {n: (0 if new[n][0] < head[n][0] else new[n][0],
                       m if new[n][1] > head[n][1] else new[n][1]) for n in new}
        head = new
    for _ in range(NARROWING_STEPS):
        narrowed = meet(head, join(init, post(head)))
        if narrowed is None or narrowed == head:
            break
        head = narrowed
    return AnalysisResult(head, iterations, widened)


def analyze(p: lang.Program, level: int = 0) -> dict[str, Interval]:
    """Loop-head interval environment closed under one abstract iteration."""
    return analyze_full(p, level).env


# -- invariants -------------------------------------------------------------

def env_formula(env: Mapping[str, Interval], widths: Mapping[str, int]) -> Node:
    parts = []
    for name in sorted(env):
        lo, hi = env[name]
        w = widths[name]
        v = F.var(name, w)
        parts.append(F.ule(F.const(lo, w), v))
        parts.append(F.ule(v, F.const(hi, w)))
    return F.conj(parts)


@dataclass
class AuxiliaryInvariant:
    env: dict | None
    formula: Node
    refinement_level: int = -1
    certified_inductive: bool = False

    @property
    def trivial(self) -> bool:
        return self.formula is F.TRUE

    def to_text(self) -> str:
        if self.env is None or self.trivial:
            return "true\n"
        return "".join(f"{n} in [{lo}, {hi}]\n" for n, (lo, hi) in sorted(self.env.items()))


def top_invariant() -> AuxiliaryInvariant:
    return AuxiliaryInvariant(env=None, formula=F.TRUE, refinement_level=-1, certified_inductive=True)


def make_invariant(env, ts: TransitionSystem, level: int = 0) -> AuxiliaryInvariant:
    widths = dict(ts.state_vars)
    m = (1 << ts.width) - 1
    tight = {n: iv for n, iv in env.items() if iv != (0, m)}
    return AuxiliaryInvariant(env=dict(env), formula=env_formula(tight, widths), refinement_level=level)


def gate_inductive(inv: AuxiliaryInvariant, ts: TransitionSystem, seed: int = 42,
                   conflict_budget: int = 100_000) -> AuxiliaryInvariant:
    """Certify I => inv and inv & T => inv' by SAT; fall back to true."""
    if inv.trivial:
        return AuxiliaryInvariant(inv.env, F.TRUE, inv.refinement_level, True)
    init_q = implication_check(ts.init, inv.formula, ts, origin="invariant")
    cons_q = consecution_check(inv.formula, inv.formula, ts, origin="invariant")
    for q in (init_q, cons_q):
        r = sat.solve(q, seed=seed, conflict_budget=conflict_budget)
        if not r.unsat:
            log.info("invariant %s rejected (%s)", F.to_str(inv.formula), r.status)
            return top_invariant()
    return AuxiliaryInvariant(inv.env, inv.formula, inv.refinement_level, True)


def parse_invariant_text(text: str, ts: TransitionSystem) -> AuxiliaryInvariant:
    """Read ``name in [lo, hi]`` lines (or ``true``) into an invariant."""
    m = (1 << ts.width) - 1
    env = {n: (0, m) for n in ts.names}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line or line == "true":
            continue
        try:
            name, rng = line.split(" in ", 1)
            lo, hi = rng.strip().strip("[]").split(",")
            name, lo, hi = name.strip(), int(lo), int(hi)
        except ValueError as exc:
            raise ValueError(f"bad invariant line: {raw!r}") from exc
        if name not in env or not 0 <= lo <= hi <= m:
            raise ValueError(f"bad invariant line: {raw!r}")
        env[name] = (max(env[name][0], lo), min(env[name][1], hi))
    return make_invariant(env, ts, level=-1)


class InvariantGenerator:
    """Continuously refining invariant source.

    ``sync`` mode runs all levels up to ``max_level`` before returning from
    ``start``; ``async`` mode runs them on a worker thread. ``snapshot``
    returns the meet of every certified invariant published so far, so
    successive snapshots never get weaker.
    """

    def __init__(self, program: lang.Program, ts: TransitionSystem, max_level: int = 0,
                 mode: str = "sync", budget: float | None = None, seed: int = 42):
        if mode not in ("sync", "async"):
            raise ValueError(f"unknown mode {mode!r}")
        self.program = program
        self.ts = ts
        self.max_level = max(0, min(max_level, MAX_LEVEL))
        self.mode = mode
        self.budget = budget
        self.seed = seed
        self._lock = threading.Lock()
        self._current = top_invariant()
        self._thread: threading.Thread | None = None
        self.history: list[AuxiliaryInvariant] = []
        self.started = False

    def start(self) -> "InvariantGenerator":
        if self.started:
            return self
        self.started = True
        if self.mode == "sync":
            self._run()
        else:
            self._thread = threading.Thread(target=self._run, daemon=True)
            self._thread.start()
        return self

    def _run(self):
        deadline = None if self.budget is None else time.monotonic() + self.budget
        for level in range(self.max_level + 1):
            if deadline is not None and time.monotonic() > deadline:
                break
            env = analyze(self.program, level)
            cand = gate_inductive(make_invariant(env, self.ts, level), self.ts, self.seed)
            if cand.trivial:
                continue
            self._publish(cand)

    def _publish(self, cand: AuxiliaryInvariant):
        with self._lock:
            cur = self._current
            if cur.trivial:
                merged = cand
            else:
                env = meet(cur.env, cand.env)
                if env is None:
                    return
                merged = gate_inductive(make_invariant(env, self.ts, cand.refinement_level),
                                        self.ts, self.seed)
                if merged.trivial:
                    return
            self._current = merged
            self.history.append(merged)

    def wait(self, timeout: float | None = None):
        if self._thread is not None:
            self._thread.join(timeout)

    def snapshot(self) -> AuxiliaryInvariant:
        with self._lock:
            return self._current


class FixedInvariant:
    """Snapshot provider for an externally supplied invariant."""

    def __init__(self, inv: AuxiliaryInvariant, ts: TransitionSystem, seed: int = 42):
        self.inv = gate_inductive(inv, ts, seed)

    def snapshot(self) -> AuxiliaryInvariant:
        return self.inv
