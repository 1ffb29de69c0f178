"""Single-loop input language: AST, parser, pretty-printer and simulator.

A program declares unsigned fixed-width variables, runs one ``while`` loop
and checks assertions after the loop exits::

    var x:8 = 0;
    while (nondet()) { x = x + 2; }
    assert (x % 2 == 0);

Every syntactic ``nondet()`` gets an index in source order. Indices are
per iteration: each loop iteration draws fresh values for all of them.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence, Union

WIDTHS = (4, 8, 16, 32)


class ParseError(Exception):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {msg}" if line else msg)
        self.msg = msg
        self.line = line
        self.col = col


# -- AST --------------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: int


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Nondet:
    index: int


@dataclass(frozen=True)
class BinOp:
    op: str  # + - * / %
    left: "IntExpr"
    right: "IntExpr"


IntExpr = Union[Const, Var, Nondet, BinOp]


@dataclass(frozen=True)
class BoolConst:
    value: bool


@dataclass(frozen=True)
class BoolNondet:
    index: int


@dataclass(frozen=True)
class Cmp:
    op: str  # == != < <= > >=
    left: IntExpr
    right: IntExpr


@dataclass(frozen=True)
class BoolOp:
    op: str  # && ||
    left: "BoolExpr"
    right: "BoolExpr"


@dataclass(frozen=True)
class Not:
    arg: "BoolExpr"


BoolExpr = Union[BoolConst, BoolNondet, Cmp, BoolOp, Not]


@dataclass(frozen=True)
class Assign:
    name: str
    expr: IntExpr


@dataclass(frozen=True)
class IfElse:
    cond: BoolExpr
    then: tuple = ()
    els: tuple = ()


Stmt = Union[Assign, IfElse]


@dataclass(frozen=True)
class VarDecl:
    name: str
    width: int
    init: int


@dataclass(frozen=True)
class Program:
    variables: tuple[VarDecl, ...]
    loop_condition: BoolExpr
    loop_body: tuple[Stmt, ...]
    post_assertions: tuple[BoolExpr, ...] = ()
    # index -> "int" | "bool", in source order
    nondet_kinds: tuple[str, ...] = field(default=(), compare=True)

    @property
    def width(self) -> int:
        return self.variables[0].width if self.variables else 8

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    @property
    def initial_state(self) -> dict[str, int]:
        return {v.name: v.init for v in self.variables}

    def with_width(self, width: int) -> "Program":
        """Re-target every variable to ``width`` bits (constants must fit)."""
        if width not in WIDTHS:
            raise ParseError(f"unsupported width {width}")
        decls = tuple(replace(v, width=width) for v in self.variables)
        prog = replace(self, variables=decls)
        _check_constants(prog)
        return prog


ConcreteState = dict  # variable name -> unsigned value


# -- parser -----------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<num>\d+)
  | (?P<id>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>==|!=|<=|>=|&&|\|\||[-+*/%<>!=(){};:])
""", re.VERBOSE)

_KEYWORDS = {"var", "while", "if", "else", "assert", "nondet", "true", "false"}


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _lex(src: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ParseError(f"unexpected character {src[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        text = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            if kind == "id" and text in _KEYWORDS:
                kind = "kw"
            toks.append(_Tok(kind, text, line, pos - line_start + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, src: str):
        self.toks = _lex(src)
        self.i = 0
        self.nondets: list[str] = []
        self.declared: dict[str, VarDecl] = {}

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg: str, tok: _Tok | None = None):
        tok = tok or self.tok
        raise ParseError(msg, tok.line, tok.col)

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("op", "kw")

    def expect(self, text: str) -> _Tok:
        if not self.at(text):
            self.error(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        tok = self.tok
        self.i += 1
        return tok

    def ident(self) -> _Tok:
        if self.tok.kind != "id":
            self.error(f"expected identifier, found {self.tok.text!r}")
        tok = self.tok
        self.i += 1
        return tok

    def number(self) -> int:
        if self.tok.kind != "num":
            self.error(f"expected number, found {self.tok.text!r}")
        v = int(self.tok.text)
        self.i += 1
        return v

    # program := decl* while assert*
    def program(self) -> Program:
        while self.at("var"):
            self.decl()
        if not self.at("while"):
            self.error("expected a while loop")
        self.expect("while")
        self.expect("(")
        cond = self.bexpr()
        self.expect(")")
        body = self.block()
        asserts = []
        in_asserts = len(self.nondets)
        while self.at("assert"):
            self.expect("assert")
            self.expect("(")
            asserts.append(self.bexpr())
            self.expect(")")
            self.expect(";")
        if self.at("while"):
            self.error("multiple loops are not supported")
        if self.tok.kind != "eof":
            self.error(f"unexpected {self.tok.text!r}")
        if len(self.nondets) != in_asserts:
            raise ParseError("nondet() is not allowed in assertions")
        return Program(tuple(self.declared.values()), cond, body, tuple(asserts), tuple(self.nondets))

    def decl(self):
        self.expect("var")
        name_tok = self.ident()
        self.expect(":")
        width = self.number()
        self.expect("=")
        init = self.number()
        self.expect(";")
        if name_tok.text in self.declared:
            self.error(f"variable {name_tok.text!r} declared twice", name_tok)
        if width not in WIDTHS:
            self.error(f"unsupported width {width}", name_tok)
        if init >= 1 << width:
            self.error(f"constant {init} does not fit in {width} bits", name_tok)
        self.declared[name_tok.text] = VarDecl(name_tok.text, width, init)

    def block(self) -> tuple:
        self.expect("{")
        stmts = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                self.error("unterminated block")
            stmts.append(self.stmt())
        self.expect("}")
        return tuple(stmts)

    def stmt(self) -> Stmt:
        if self.at("while"):
            self.error("nested loops are not supported")
        if self.at("if"):
            return self.if_stmt()
        name_tok = self.ident()
        if name_tok.text not in self.declared:
            self.error(f"undeclared variable {name_tok.text!r}", name_tok)
        self.expect("=")
        e = self.iexpr()
        self.expect(";")
        return Assign(name_tok.text, e)

    def if_stmt(self) -> IfElse:
        self.expect("if")
        self.expect("(")
        cond = self.bexpr()
        self.expect(")")
        then = self.block()
        els: tuple = ()
        if self.at("else"):
            self.expect("else")
            els = (self.if_stmt(),) if self.at("if") else self.block()
        return IfElse(cond, then, els)

    # Boolean expressions
    def bexpr(self) -> BoolExpr:
        e = self.band()
        while self.at("||"):
            self.i += 1
            e = BoolOp("||", e, self.band())
        return e

    def band(self) -> BoolExpr:
        e = self.bnot()
        while self.at("&&"):
            self.i += 1
            e = BoolOp("&&", e, self.bnot())
        return e

    def bnot(self) -> BoolExpr:
        if self.at("!"):
            self.i += 1
            return Not(self.bnot())
        return self.batom()

    def batom(self) -> BoolExpr:
        if self.at("true") or self.at("false"):
            v = self.tok.text == "true"
            self.i += 1
            return BoolConst(v)
        # a comparison, unless it turns out not to be one
        save_i, save_nd = self.i, len(self.nondets)
        first_error = None
        try:
            left = self.iexpr()
            if self.tok.text in ("==", "!=", "<", "<=", ">", ">="):
                op = self.tok.text
                self.i += 1
                return Cmp(op, left, self.iexpr())
        except ParseError as exc:
            first_error = exc
        self.i, self.nondets[save_nd:] = save_i, []
        if self.at("nondet"):
            self.nondet_call()
            self.nondets.append("bool")
            return BoolNondet(len(self.nondets) - 1)
        if self.at("("):
            self.i += 1
            e = self.bexpr()
            self.expect(")")
            return e
        if first_error is not None:
            raise first_error
        self.error(f"expected a condition, found {self.tok.text!r}")

    def nondet_call(self):
        self.expect("nondet")
        self.expect("(")
        self.expect(")")

    # integer expressions
    def iexpr(self) -> IntExpr:
        e = self.term()
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            op = self.tok.text
            self.i += 1
            e = BinOp(op, e, self.term())
        return e

    def term(self) -> IntExpr:
        e = self.factor()
        while self.tok.text in ("*", "/", "%") and self.tok.kind == "op":
            op = self.tok.text
            self.i += 1
            e = BinOp(op, e, self.factor())
        return e

    def factor(self) -> IntExpr:
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Const(int(tok.text))
        if tok.kind == "id":
            if tok.text not in self.declared:
                self.error(f"undeclared variable {tok.text!r}")
            self.i += 1
            return Var(tok.text)
        if self.at("nondet"):
            self.nondet_call()
            self.nondets.append("int")
            return Nondet(len(self.nondets) - 1)
        if self.at("("):
            self.i += 1
            e = self.iexpr()
            self.expect(")")
            return e
        self.error(f"expected an expression, found {tok.text or 'end of input'!r}")


def _constants(e) -> list[int]:
    if isinstance(e, Const):
        return [e.value]
    if isinstance(e, (BinOp, Cmp, BoolOp)):
        return _constants(e.left) + _constants(e.right)
    if isinstance(e, Not):
        return _constants(e.arg)
    return []


def _stmt_constants(stmts) -> list[int]:
    out = []
    for s in stmts:
        if isinstance(s, Assign):
            out += _constants(s.expr)
        else:
            out += _constants(s.cond) + _stmt_constants(s.then) + _stmt_constants(s.els)
    return out


def _check_constants(p: Program):
    w = p.width
    for d in p.variables:
        if d.init >= 1 << w:
            raise ParseError(f"initial value {d.init} of {d.name!r} does not fit in {w} bits")
    consts = _constants(p.loop_condition) + _stmt_constants(p.loop_body)
    for a in p.post_assertions:
        consts += _constants(a)
    for c in consts:
        if c >= 1 << w:
            raise ParseError(f"constant {c} does not fit in {w} bits")


def parse(source: str, width: int | None = None) -> Program:
    """Parse and validate a program; ``width`` re-targets all variables."""
    prog = _Parser(source).program()
    if not prog.variables:
        raise ParseError("program declares no variables")
    widths = {v.width for v in prog.variables}
    if len(widths) != 1:
        raise ParseError(f"all variables must share one width, found {sorted(widths)}")
    _check_constants(prog)
    if width is not None and width != prog.width:
        prog = prog.with_width(width)
    return prog


# -- pretty-printer ---------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "%": 2}


def format_int(e: IntExpr, prec: int = 0) -> str:
    if isinstance(e, Const):
        return str(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Nondet):
        return "nondet()"
    p = _PREC[e.op]
    # left-associative: the right operand needs parens at equal precedence
    s = f"{format_int(e.left, p)} {e.op} {format_int(e.right, p + 1)}"
    return f"({s})" if p < prec else s


def format_bool(e: BoolExpr, prec: int = 0) -> str:
    if isinstance(e, BoolConst):
        return "true" if e.value else "false"
    if isinstance(e, BoolNondet):
        return "nondet()"
    if isinstance(e, Cmp):
        return f"{format_int(e.left)} {e.op} {format_int(e.right)}"
    if isinstance(e, Not):
        return f"!{format_bool(e.arg, 3)}"
    p = 1 if e.op == "||" else 2
    s = f"{format_bool(e.left, p)} {e.op} {format_bool(e.right, p + 1)}"
    return f"({s})" if p < prec or (prec == 3) else s


def _format_block(stmts, indent: int) -> list[str]:
    pad = "  " * indent
    lines = []
    for s in stmts:
        if isinstance(s, Assign):
            lines.append(f"{pad}{s.name} = {format_int(s.expr)};")
        else:
            lines.append(f"{pad}if ({format_bool(s.cond)}) {{")
            lines += _format_block(s.then, indent + 1)
            if s.els:
                lines.append(f"{pad}}} else {{")
                lines += _format_block(s.els, indent + 1)
            lines.append(f"{pad}}}")
    return lines


def pretty(p: Program) -> str:
    lines = [f"var {v.name}:{v.width} = {v.init};" for v in p.variables]
    lines.append(f"while ({format_bool(p.loop_condition)}) {{")
    lines += _format_block(p.loop_body, 1)
    lines.append("}")
    lines += [f"assert ({format_bool(a)});" for a in p.post_assertions]
    return "\n".join(lines) + "\n"


# -- concrete semantics -----------------------------------------------------

def _udiv(x: int, y: int, w: int) -> int:
    return (1 << w) - 1 if y == 0 else x // y


def _urem(x: int, y: int) -> int:
    return x if y == 0 else x % y


def eval_int(e: IntExpr, s: Mapping[str, int], nd: Mapping[int, int], w: int) -> int:
    m = (1 << w) - 1
    if isinstance(e, Const):
        return e.value & m
    if isinstance(e, Var):
        return s[e.name]
    if isinstance(e, Nondet):
        return nd[e.index] & m
    x = eval_int(e.left, s, nd, w)
    y = eval_int(e.right, s, nd, w)
    op = e.op
    if op == "+":
        return (x + y) & m
    if op == "-":
        return (x - y) & m
    if op == "*":
        return (x * y) & m
    if op == "/":
        return _udiv(x, y, w)
    return _urem(x, y)


def eval_bool(e: BoolExpr, s: Mapping[str, int], nd: Mapping[int, int], w: int) -> bool:
    if isinstance(e, BoolConst):
        return e.value
    if isinstance(e, BoolNondet):
        return bool(nd[e.index])
    if isinstance(e, Not):
        return not eval_bool(e.arg, s, nd, w)
    if isinstance(e, BoolOp):
        # both sides are evaluated: every nondet() on the path is drawn
        a = eval_bool(e.left, s, nd, w)
        b = eval_bool(e.right, s, nd, w)
        return (a and b) if e.op == "&&" else (a or b)
    x = eval_int(e.left, s, nd, w)
    y = eval_int(e.right, s, nd, w)
    return {"==": x == y, "!=": x != y, "<": x < y, "<=": x <= y,
            ">": x > y, ">=": x >= y}[e.op]


def _exec(stmts, s: dict, nd, w: int):
    for st in stmts:
        if isinstance(st, Assign):
            s[st.name] = eval_int(st.expr, s, nd, w)
        elif eval_bool(st.cond, s, nd, w):
            _exec(st.then, s, nd, w)
        else:
            _exec(st.els, s, nd, w)


def step(p: Program, s: Mapping[str, int], nondet_values: Mapping[int, int]) -> ConcreteState:
    """State after one full execution of the loop body (the loop condition
    is assumed to hold)."""
    out = dict(s)
    _exec(p.loop_body, out, nondet_values, p.width)
    return out


def loop_continues(p: Program, s: Mapping[str, int], nondet_values: Mapping[int, int]) -> bool:
    return eval_bool(p.loop_condition, s, nondet_values, p.width)


def check_post(p: Program, s: Mapping[str, int]) -> bool:
    return all(eval_bool(a, s, {}, p.width) for a in p.post_assertions)


def replay(p: Program, trace: Sequence[tuple[Mapping[str, int], Mapping[int, int]]]) -> bool:
    """Check that ``trace`` is a real counterexample.

    Each entry is (loop-head state, nondet values drawn at that head). All but
    the last entry must enter the loop and step to the next state; the last
    must leave the loop and violate an assertion.
    """
    if not trace:
        return False
    w = p.width
    try:
        first = dict(trace[0][0])
        if first != p.initial_state:
            return False
        for (s, nd), (t, _) in zip(trace, trace[1:]):
            if any(not 0 <= v < 1 << w for v in s.values()):
                return False
            if not loop_continues(p, s, nd):
                return False
            if step(p, s, nd) != dict(t):
                return False
        last, nd = trace[-1]
        if set(last) != set(p.names):
            return False
        return not loop_continues(p, last, nd) and not check_post(p, last)
    except (KeyError, TypeError):
        return False


def nondet_indices(e) -> list[int]:
    if isinstance(e, (Nondet, BoolNondet)):
        return [e.index]
    if isinstance(e, (BinOp, Cmp, BoolOp)):
        return nondet_indices(e.left) + nondet_indices(e.right)
    if isinstance(e, Not):
        return nondet_indices(e.arg)
    if isinstance(e, Assign):
        return nondet_indices(e.expr)
    if isinstance(e, IfElse):
        out = nondet_indices(e.cond)
        for s in e.then + e.els:
            out += nondet_indices(s)
        return out
    return []


def body_nondets(p: Program) -> list[int]:
    out = []
    for s in p.loop_body:
        out += nondet_indices(s)
    return out


def count_statements(stmts) -> int:
    n = 0
    for s in stmts:
        n += 1
        if isinstance(s, IfElse):
            n += count_statements(s.then) + count_statements(s.els)
    return n
