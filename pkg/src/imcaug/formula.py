"""Hash-consed symbolic formulas over named fixed-width bitvectors.

Every node is interned, so structurally equal formulas are the same object
and equality checks are identity checks. Width 0 marks a Boolean node.

Boolean ops: true, false, bvar, bit, not, and, or, eq, ult, ule.
Bitvector ops: const, var, add, sub, mul, udiv, urem, ite.
"""

from __future__ import annotations

from typing import Iterable, Mapping

BOOL = 0


class Node:
    __slots__ = ("op", "args", "width", "val", "id", "__weakref__")

    def __init__(self, op: str, args: tuple, width: int, val, nid: int):
        self.op = op
        self.args = args
        self.width = width
        self.val = val
        self.id = nid

    @property
    def is_bool(self) -> bool:
        return self.width == BOOL

    def __repr__(self) -> str:
        return f"Node({to_str(self)})"

    def __str__(self) -> str:
        return to_str(self)

    # nodes are interned: identity is structural equality
    def __hash__(self) -> int:
        return self.id

    def __eq__(self, other) -> bool:
        return self is other

    def __reduce__(self):
        return (_rebuild, (self.op, tuple(self.args), self.width, self.val))


_table: dict = {}


def _intern(op: str, args: tuple, width: int, val=None) -> Node:
    key = (op, tuple(a.id for a in args), width, val)
    node = _table.get(key)
    if node is None:
        node = Node(op, args, width, val, len(_table) + 1)
        _table[key] = node
    return node


def _rebuild(op, args, width, val):
    return _intern(op, args, width, val)


TRUE = _intern("true", (), BOOL)
FALSE = _intern("false", (), BOOL)


def mask(width: int) -> int:
    return (1 << width) - 1


# -- leaves -----------------------------------------------------------------

def const(value: int, width: int) -> Node:
    return _intern("const", (), width, value & mask(width))


def var(name: str, width: int) -> Node:
    return _intern("var", (), width, name)


def bvar(name: str) -> Node:
    return _intern("bvar", (), BOOL, name)


def bit(name: str, index: int) -> Node:
    """Bit ``index`` (LSB = 0) of the bitvector variable ``name``."""
    return _intern("bit", (), BOOL, (name, index))


def boolean(value: bool) -> Node:
    return TRUE if value else FALSE


# -- Boolean connectives ----------------------------------------------------

def mk_not(a: Node) -> Node:
    if a is TRUE:
        return FALSE
    if a is FALSE:
        return TRUE
    if a.op == "not":
        return a.args[0]
    return _intern("not", (a,), BOOL)


def _neg_of(a: Node) -> Node | None:
    if a.op == "not":
        return a.args[0]
    return None


def _nary(op: str, args: Iterable[Node]) -> Node:
    unit, zero = (TRUE, FALSE) if op == "and" else (FALSE, TRUE)
    dual = "or" if op == "and" else "and"
    flat: dict[int, Node] = {}
    stack = list(args)
    while stack:
        a = stack.pop()
        if a is unit:
            continue
        if a is zero:
            return zero
        if a.op == op:
            stack.extend(a.args)
            continue
        flat[a.id] = a
    if not flat:
        return unit
    for a in flat.values():
        n = _neg_of(a)
        if n is not None and n.id in flat:
            return zero
    if len(flat) > 1:
        # absorption: a AND (a OR b) == a
        members = set(flat)
        for key in list(flat):
            a = flat[key]
            if a.op == dual and any(b.id in members and b.id != key for b in a.args):
                del flat[key]
                members.discard(key)
    items = sorted(flat.values(), key=lambda n: n.id)
    if len(items) == 1:
        return items[0]
    return _intern(op, tuple(items), BOOL)


def mk_and(*args: Node) -> Node:
    return _nary("and", args)


def mk_or(*args: Node) -> Node:
    return _nary("or", args)


def conj(args: Iterable[Node]) -> Node:
    return _nary("and", args)


def disj(args: Iterable[Node]) -> Node:
    return _nary("or", args)


def mk_implies(a: Node, b: Node) -> Node:
    return mk_or(mk_not(a), b)


# -- bitvector terms --------------------------------------------------------

def _check_same(a: Node, b: Node) -> int:
    if a.width != b.width or a.width == BOOL:
        raise TypeError(f"width mismatch: {a.width} vs {b.width}")
    return a.width


def _udiv(x: int, y: int, w: int) -> int:
    return mask(w) if y == 0 else x // y


def _urem(x: int, y: int) -> int:
    return x if y == 0 else x % y


def _binop(op: str, a: Node, b: Node) -> Node:
    w = _check_same(a, b)
    if a.op == "const" and b.op == "const":
        x, y = a.val, b.val
        if op == "add":
            r = x + y
        elif op == "sub":
            r = x - y
        elif op == "mul":
            r = x * y
        elif op == "udiv":
            r = _udiv(x, y, w)
        else:
            r = _urem(x, y)
        return const(r, w)
    if op == "add":
        if a.op == "const" and a.val == 0:
            return b
        if b.op == "const" and b.val == 0:
            return a
        if a.id > b.id:
            a, b = b, a
    elif op == "sub":
        if b.op == "const" and b.val == 0:
            return a
        if a is b:
            return const(0, w)
    elif op == "mul":
        for p, q in ((a, b), (b, a)):
            if p.op == "const" and p.val == 0:
                return p
            if p.op == "const" and p.val == 1:
                return q
        if a.id > b.id:
            a, b = b, a
    elif op == "udiv":
        if b.op == "const" and b.val == 1:
            return a
    elif op == "urem":
        if b.op == "const" and b.val == 1:
            return const(0, w)
    return _intern(op, (a, b), w)


def add(a: Node, b: Node) -> Node:
    return _binop("add", a, b)


def sub(a: Node, b: Node) -> Node:
    return _binop("sub", a, b)


def mul(a: Node, b: Node) -> Node:
    return _binop("mul", a, b)


def udiv(a: Node, b: Node) -> Node:
    return _binop("udiv", a, b)


def urem(a: Node, b: Node) -> Node:
    return _binop("urem", a, b)


def ite(c: Node, a: Node, b: Node) -> Node:
    if not c.is_bool:
        raise TypeError("ite condition must be Boolean")
    if a.width != b.width:
        raise TypeError("ite branches differ in width")
    if c is TRUE or a is b:
        return a
    if c is FALSE:
        return b
    if a.is_bool:
        return mk_or(mk_and(c, a), mk_and(mk_not(c), b))
    if c.op == "not":
        return _intern("ite", (c.args[0], b, a), a.width)
    return _intern("ite", (c, a, b), a.width)


# -- predicates -------------------------------------------------------------

def eq(a: Node, b: Node) -> Node:
    if a.is_bool and b.is_bool:
        return mk_or(mk_and(a, b), mk_and(mk_not(a), mk_not(b)))
    _check_same(a, b)
    if a is b:
        return TRUE
    if a.op == "const" and b.op == "const":
        return boolean(a.val == b.val)
    if a.id > b.id:
        a, b = b, a
    return _intern("eq", (a, b), BOOL)


def ult(a: Node, b: Node) -> Node:
    _check_same(a, b)
    if a.op == "const" and b.op == "const":
        return boolean(a.val < b.val)
    if a is b or (b.op == "const" and b.val == 0):
        return FALSE
    if a.op == "const" and a.val == mask(a.width):
        return FALSE
    return _intern("ult", (a, b), BOOL)


def ule(a: Node, b: Node) -> Node:
    _check_same(a, b)
    if a.op == "const" and b.op == "const":
        return boolean(a.val <= b.val)
    if a is b or (a.op == "const" and a.val == 0):
        return TRUE
    if b.op == "const" and b.val == mask(b.width):
        return TRUE
    return _intern("ule", (a, b), BOOL)


def ne(a: Node, b: Node) -> Node:
    return mk_not(eq(a, b))


def ugt(a: Node, b: Node) -> Node:
    return ult(b, a)


def uge(a: Node, b: Node) -> Node:
    return ule(b, a)


# -- traversal --------------------------------------------------------------

def topo(root: Node) -> list[Node]:
    """Nodes of the DAG below ``root`` in post-order (children first)."""
    order: list[Node] = []
    seen: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if node.id in seen:
            continue
        seen.add(node.id)
        stack.append((node, True))
        for a in reversed(node.args):
            if a.id not in seen:
                stack.append((a, False))
    return order


def free_names(root: Node) -> set[str]:
    names = set()
    for n in topo(root):
        if n.op in ("var", "bvar"):
            names.add(n.val)
        elif n.op == "bit":
            names.add(n.val[0])
    return names


def size(root: Node) -> int:
    return len(topo(root))


def evaluate(root: Node, env: Mapping[str, int]):
    """Concrete value of ``root``; bitvector symbols map to unsigned ints,
    Boolean symbols to bools."""
    vals: dict[int, object] = {}
    for n in topo(root):
        op = n.op
        if op == "true":
            v = True
        elif op == "false":
            v = False
        elif op == "const":
            v = n.val
        elif op == "var":
            v = env[n.val] & mask(n.width)
        elif op == "bvar":
            v = bool(env[n.val])
        elif op == "bit":
            name, j = n.val
            v = bool((env[name] >> j) & 1)
        else:
            xs = [vals[a.id] for a in n.args]
            if op == "not":
                v = not xs[0]
            elif op == "and":
                v = all(xs)
            elif op == "or":
                v = any(xs)
            elif op == "eq":
                v = xs[0] == xs[1]
            elif op == "ult":
                v = xs[0] < xs[1]
            elif op == "ule":
                v = xs[0] <= xs[1]
            elif op == "ite":
                v = xs[1] if xs[0] else xs[2]
            else:
                w = n.width
                x, y = xs
                if op == "add":
                    v = (x + y) & mask(w)
                elif op == "sub":
                    v = (x - y) & mask(w)
                elif op == "mul":
                    v = (x * y) & mask(w)
                elif op == "udiv":
                    v = _udiv(x, y, w)
                elif op == "urem":
                    v = _urem(x, y)
                else:
                    raise ValueError(f"unknown op {op}")
        vals[n.id] = v
    return vals[root.id]


def substitute(root: Node, mapping: Mapping[str, str]) -> Node:
    """Rename free symbols (variables, Boolean symbols and bit selections)."""
    if not mapping:
        return root
    out: dict[int, Node] = {}
    for n in topo(root):
        op = n.op
        if op == "var":
            r = var(mapping.get(n.val, n.val), n.width)
        elif op == "bvar":
            r = bvar(mapping.get(n.val, n.val))
        elif op == "bit":
            r = bit(mapping.get(n.val[0], n.val[0]), n.val[1])
        elif not n.args:
            r = n
        else:
            r = rebuild(n, [out[a.id] for a in n.args])
        out[n.id] = r
    return out[root.id]


def rebuild(n: Node, args: list[Node]) -> Node:
    op = n.op
    if op == "not":
        return mk_not(args[0])
    if op == "and":
        return conj(args)
    if op == "or":
        return disj(args)
    if op == "eq":
        return eq(*args)
    if op == "ult":
        return ult(*args)
    if op == "ule":
        return ule(*args)
    if op == "ite":
        return ite(*args)
    return _binop(op, *args)


# -- printing ---------------------------------------------------------------

_INFIX = {"add": "+", "sub": "-", "mul": "*", "udiv": "/", "urem": "%",
          "eq": "==", "ult": "<", "ule": "<="}


def to_str(root: Node) -> str:
    memo: dict[int, str] = {}
    for n in topo(root):
        op = n.op
        if op == "true":
            s = "true"
        elif op == "false":
            s = "false"
        elif op == "const":
            s = str(n.val)
        elif op in ("var", "bvar"):
            s = n.val
        elif op == "bit":
            s = f"{n.val[0]}[{n.val[1]}]"
        else:
            xs = [memo[a.id] for a in n.args]
            if op == "not":
                s = f"!{xs[0]}"
            elif op == "and":
                s = "(" + " && ".join(xs) + ")"
            elif op == "or":
                s = "(" + " || ".join(xs) + ")"
            elif op == "ite":
                s = f"({xs[0]} ? {xs[1]} : {xs[2]})"
            else:
                s = f"({xs[0]} {_INFIX[op]} {xs[1]})"
        memo[n.id] = s
    return memo[root.id]
