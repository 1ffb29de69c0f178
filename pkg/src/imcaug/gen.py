"""Seed-deterministic random single-loop programs for differential testing."""

from __future__ import annotations

import random
from dataclasses import dataclass

from . import lang
from .lang import (Assign, BinOp, BoolConst, BoolNondet, BoolOp, Cmp, Const, IfElse, Nondet, Not,
                   Program, Var, VarDecl)

_NAMES = ("x", "y", "z")
_ARITH = ("+", "+", "-", "*", "/", "%")
_CMP = ("==", "!=", "<", "<=", ">", ">=")


@dataclass
class GenConfig:
    width: int = 4
    max_vars: int = 3
    max_stmts: int = 6
    max_nondets: int = 2
    max_depth: int = 2


class _Gen:
    def __init__(self, rng: random.Random, cfg: GenConfig, names):
        self.rng = rng
        self.cfg = cfg
        self.names = names
        self.nondets: list[str] = []
        self.stmts = 0

    def _nondet(self, kind: str):
        if len(self.nondets) >= self.cfg.max_nondets:
            return None
        self.nondets.append(kind)
        idx = len(self.nondets) - 1
        return Nondet(idx) if kind == "int" else BoolNondet(idx)

    def const(self):
        m = (1 << self.cfg.width) - 1
        return Const(self.rng.choice([0, 1, 1, 2, 3, m, self.rng.randint(0, m)]))

    def atom(self):
        r = self.rng.random()
        if r < 0.55:
            return Var(self.rng.choice(self.names))
        if r < 0.62:
            nd = self._nondet("int")
            if nd is not None:
                return nd
        return self.const()

    def iexpr(self, depth: int = 0):
        if depth >= self.cfg.max_depth or self.rng.random() < 0.45:
            return self.atom()
        return BinOp(self.rng.choice(_ARITH), self.iexpr(depth + 1), self.iexpr(depth + 1))

    def cmp(self):
        return Cmp(self.rng.choice(_CMP), Var(self.rng.choice(self.names)), self.iexpr(1))

    def cond(self, depth: int = 0):
        r = self.rng.random()
        if r < 0.1:
            nd = self._nondet("bool")
            if nd is not None:
                return nd
        if depth < 1 and r < 0.3:
            return BoolOp(self.rng.choice(("&&", "||")), self.cond(depth + 1), self.cond(depth + 1))
        if depth < 1 and r < 0.38:
            return Not(self.cmp())
        return self.cmp()

    def stmt(self, nested: bool):
        self.stmts += 1
        room = self.cfg.max_stmts - self.stmts
        if not nested and room >= 1 and self.rng.random() < 0.3:
            then = self.block(min(room, 2), True)
            els = self.block(min(self.cfg.max_stmts - self.stmts, 1), True) if self.rng.random() < 0.4 else ()
            return IfElse(self.cond(), then, els)
        return Assign(self.rng.choice(self.names), self.iexpr())

    def block(self, budget: int, nested: bool):
        out = []
        n = self.rng.randint(1, max(1, budget))
        for _ in range(n):
            if self.stmts >= self.cfg.max_stmts:
                break
            out.append(self.stmt(nested))
        return tuple(out)


def random_program(seed: int, cfg: GenConfig | None = None) -> Program:
    """A random program: every run with the same seed and config returns
    the same program."""
    cfg = cfg or GenConfig()
    rng = random.Random(seed)
    nvars = rng.randint(1, cfg.max_vars)
    names = list(_NAMES[:nvars])
    m = (1 << cfg.width) - 1
    decls = tuple(VarDecl(n, cfg.width, rng.choice([0, 0, 1, rng.randint(0, m)])) for n in names)
    g = _Gen(rng, cfg, names)
    if rng.random() < 0.5:
        loop_cond = g._nondet("bool")
    else:
        loop_cond = g.cond()
    body = g.block(cfg.max_stmts, False)
    # assertions cannot draw nondets
    g.nondets, saved = list(range(cfg.max_nondets)), g.nondets
    posts = tuple(g.cmp() for _ in range(rng.randint(1, 2)))
    g.nondets = saved
    prog = Program(variables=decls, loop_condition=loop_cond, loop_body=body,
                   post_assertions=posts, nondet_kinds=tuple(saved))
    # a round trip numbers nondets in source order
    return lang.parse(lang.pretty(prog))


def random_source(seed: int, cfg: GenConfig | None = None) -> str:
    return lang.pretty(random_program(seed, cfg))


def write_corpus(directory: str, seed: int, count: int, cfg: GenConfig | None = None) -> list[str]:
    import os

    os.makedirs(directory, exist_ok=True)
    rng = random.Random(seed)
    paths = []
    for i in range(count):
        src = random_source(rng.getrandbits(32), cfg)
        path = os.path.join(directory, f"task{i:04d}.slp")
        with open(path, "w") as fh:
            fh.write(src)
        paths.append(path)
    return paths
