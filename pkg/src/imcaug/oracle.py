"""Brute-force explicit-state reachability for small widths.

Loop-head states are packed into integers and expanded breadth-first; the
loop body is evaluated with numpy over every (frontier state, nondet
choice) pair at once. Breadth-first order makes the returned counterexample
a shortest one.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import lang

MAX_STATE_BITS = 24
MAX_CHOICES = 1 << 16


class TooLarge(Exception):
    pass


@dataclass
class ReachableSet:
    program: lang.Program
    codes: np.ndarray  # packed loop-head states, sorted
    safe: bool
    trace: list | None = None  # shortest counterexample when unsafe
    depth: int = 0
    # state code -> BFS layer
    layers: dict = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.codes)

    def states(self) -> list[dict[str, int]]:
        return [unpack(self.program, int(c)) for c in self.codes]

    def __contains__(self, state) -> bool:
        c = pack(self.program, state)
        i = np.searchsorted(self.codes, c)
        return bool(i < len(self.codes) and self.codes[i] == c)


def pack(p: lang.Program, state) -> int:
    w = p.width
    code = 0
    for i, n in enumerate(p.names):
        code |= int(state[n]) << (w * i)
    return code


def unpack(p: lang.Program, code: int) -> dict[str, int]:
    w = p.width
    m = (1 << w) - 1
    return {n: (code >> (w * i)) & m for i, n in enumerate(p.names)}


# -- vectorized semantics ---------------------------------------------------

def _ev_int(e, S, N, w):
    with np.errstate(over="ignore"):
        return _ev_int_raw(e, S, N, w)


def _ev_int_raw(e, S, N, w):
    m = np.uint64((1 << w) - 1)
    if isinstance(e, lang.Const):
        return np.uint64(e.value)
    if isinstance(e, lang.Var):
        return S[e.name]
    if isinstance(e, lang.Nondet):
        return N[e.index]
    x = _ev_int_raw(e.left, S, N, w)
    y = _ev_int_raw(e.right, S, N, w)
    op = e.op
    if op == "+":
        return (x + y) & m
    if op == "-":
        return (x - y) & m
    if op == "*":
        return (x * y) & m
    x, y = np.broadcast_arrays(np.asarray(x, dtype=np.uint64), np.asarray(y, dtype=np.uint64))
    safe_y = np.where(y == 0, np.uint64(1), y)
    if op == "/":
        return np.where(y == 0, m, x // safe_y)
    return np.where(y == 0, x, x % safe_y)


def _ev_bool(e, S, N, w):
    if isinstance(e, lang.BoolConst):
        return np.bool_(e.value)
    if isinstance(e, lang.BoolNondet):
        return N[e.index] != 0
    if isinstance(e, lang.Not):
        return ~np.asarray(_ev_bool(e.arg, S, N, w), dtype=bool)
    if isinstance(e, lang.BoolOp):
        a = np.asarray(_ev_bool(e.left, S, N, w), dtype=bool)
        b = np.asarray(_ev_bool(e.right, S, N, w), dtype=bool)
        return (a & b) if e.op == "&&" else (a | b)
    x = _ev_int(e.left, S, N, w)
    y = _ev_int(e.right, S, N, w)
    return {"==": np.equal, "!=": np.not_equal, "<": np.less, "<=": np.less_equal,
            ">": np.greater, ">=": np.greater_equal}[e.op](x, y)


def _exec(stmts, S, N, w):
    for st in stmts:
        if isinstance(st, lang.Assign):
            S = dict(S)
            S[st.name] = _ev_int(st.expr, S, N, w)
        else:
            c = _ev_bool(st.cond, S, N, w)
            t = _exec(st.then, S, N, w)
            e = _exec(st.els, S, N, w)
            S = {n: np.where(c, t[n], e[n]) for n in S}
    return S


def nondet_choices(p: lang.Program) -> list[dict[int, int]]:
    """Every assignment to the program's nondet occurrences."""
    ranges = [range(2) if k == "bool" else range(1 << p.width) for k in p.nondet_kinds]
    total = 1
    for r in ranges:
        total *= len(r)
    if total > MAX_CHOICES:
        raise TooLarge(f"{total} nondet choices per iteration")
    return [dict(enumerate(vals)) for vals in itertools.product(*ranges)]


def _choice_arrays(p: lang.Program, choices):
    return {i: np.array([c[i] for c in choices], dtype=np.uint64)[None, :]
            for i in range(len(p.nondet_kinds))}


def _expand(p: lang.Program, codes: np.ndarray, N):
    """Successor codes and continue/violation masks, shape (states, choices)."""
    w = p.width
    m = np.uint64((1 << w) - 1)
    col = codes.astype(np.uint64)[:, None]
    S = {n: (col >> np.uint64(w * i)) & m for i, n in enumerate(p.names)}
    shape = (len(codes), next(iter(N.values())).shape[1] if N else 1)
    cont = np.broadcast_to(np.asarray(_ev_bool(p.loop_condition, S, N, w), dtype=bool), shape)
    post = np.ones(len(codes), dtype=bool)[:, None]
    for a in p.post_assertions:
        post = post & np.asarray(_ev_bool(a, S, {}, w), dtype=bool)
    post = np.broadcast_to(post, shape)
    T = _exec(p.loop_body, S, N, w)
    succ = np.zeros(shape, dtype=np.uint64)
    for i, n in enumerate(p.names):
        succ |= np.broadcast_to(np.asarray(T[n], dtype=np.uint64), shape) << np.uint64(w * i)
    return succ, cont, (~cont) & (~post)


def explore(p: lang.Program, max_state_bits: int = MAX_STATE_BITS) -> ReachableSet:
    """All loop-head states reachable from the initial state."""
    if p.width * len(p.names) > max_state_bits:
        raise TooLarge(f"state space of 2^{p.width * len(p.names)} states")
    choices = nondet_choices(p)
    N = _choice_arrays(p, choices)
    init = pack(p, p.initial_state)
    parent: dict[int, tuple[int, int]] = {init: (-1, -1)}
    layers = {init: 0}
    frontier = np.array([init], dtype=np.uint64)
    depth = 0
    while len(frontier):
        succ, cont, bad = _expand(p, frontier, N)
        hit = np.flatnonzero(bad.any(axis=1))
        if len(hit):
            row = int(hit[0])
            col = int(np.flatnonzero(bad[row])[0])
            trace = _trace(p, parent, int(frontier[row]), choices, col)
            codes = np.array(sorted(parent), dtype=np.uint64)
            return ReachableSet(p, codes, False, trace, depth, layers)
        flat = succ[cont]
        if flat.size == 0:
            break
        rows, cols = np.nonzero(cont)
        uniq, first = np.unique(flat, return_index=True)
        new = []
        for c, idx in zip(uniq.tolist(), first.tolist()):
            if c not in parent:
                parent[c] = (int(frontier[rows[idx]]), int(cols[idx]))
                layers[c] = depth + 1
                new.append(c)
        frontier = np.array(new, dtype=np.uint64)
        depth += 1
    codes = np.array(sorted(parent), dtype=np.uint64)
    return ReachableSet(p, codes, True, None, depth, layers)


def _trace(p, parent, last: int, choices, exit_choice: int):
    chain = []
    code = last
    while code != -1:
        prev, ch = parent[code]
        chain.append((code, ch))
        code = prev
    chain.reverse()
    trace = []
    # entry i holds the choice that led from state i to state i+1
    for (code, _), (_, ch) in zip(chain, chain[1:]):
        trace.append((unpack(p, code), dict(choices[ch])))
    trace.append((unpack(p, last), dict(choices[exit_choice])))
    return trace


def successors(p: lang.Program, state) -> set[tuple]:
    """Concrete successor states (as value tuples) over every nondet choice;
    includes ``state`` itself when the loop may exit there."""
    out = set()
    for nd in nondet_choices(p):
        if lang.loop_continues(p, state, nd):
            s = lang.step(p, state, nd)
            out.add(tuple(s[n] for n in p.names))
        else:
            out.add(tuple(state[n] for n in p.names))
    return out


def hull(rs: ReachableSet) -> dict[str, tuple[int, int]]:
    p = rs.program
    w = p.width
    m = np.uint64((1 << w) - 1)
    out = {}
    for i, n in enumerate(p.names):
        vals = (rs.codes >> np.uint64(w * i)) & m
        out[n] = (int(vals.min()), int(vals.max()))
    return out
