"""Craig interpolants from resolution refutations of A/B-partitioned CNF.

Labeled-resolution construction: an A leaf contributes the disjunction of
its literals over variables that also occur in B, a B leaf contributes
true, and a resolution step joins the two partial interpolants with OR when
the pivot is local to A and with AND otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import formula as F
from . import sat
from .encoder import CnfInstance, encode
from .formula import Node


class InterpolationError(Exception):
    pass


@dataclass
class Interpolant:
    formula: Node
    source_k: int = 0
    index: int = 0
    strengthened: bool = False
    query: CnfInstance | None = field(default=None, repr=False, compare=False)


def _shared_env(cnf: CnfInstance) -> dict[str, list[int]]:
    """Symbol environment of the shared cut: state names at the cut time
    (for unrolling queries) or ``v<n>`` names for raw CNF."""
    if cnf.tvm is not None:
        return {name: cnf.tvm.block(name, cnf.cut) for name in cnf.tvm.ts.names}
    return {f"v{v}": [v] for v in range(1, cnf.num_vars + 1)}


def _lift_var(cnf: CnfInstance, v: int) -> Node:
    if cnf.tvm is None:
        return F.bvar(f"v{v}")
    owner = cnf.tvm.state_var_at(v, cnf.cut)
    if owner is None:
        raise InterpolationError(f"shared variable {v} is not a state bit at time {cnf.cut}")
    name, j = owner
    return F.bit(name, j)


def partition_vars(cnf: CnfInstance) -> tuple[set[int], set[int]]:
    a_vars: set[int] = set()
    b_vars: set[int] = set()
    for c, lab in zip(cnf.clauses, cnf.labels):
        target = a_vars if lab == "A" else b_vars
        target.update(abs(l) for l in c)
    return a_vars, b_vars


def derive(proof: sat.ProofLog, cnf: CnfInstance, tvm=None, *, source_k: int = 0,
           index: int = 0, seed: int = 42, check: bool = True, certify_result: bool = True,
           conflict_budget: int = sat.DEFAULT_CONFLICT_BUDGET) -> Interpolant:
    """Interpolant of the refutation ``proof`` of ``cnf``'s A and B parts.

    The result is lifted from CNF literals at the cut to bare state-variable
    bits. With ``certify_result`` the three interpolant conditions are
    re-checked by fresh SAT queries and a failure raises.
    """
    if tvm is not None and cnf.tvm is None:
        cnf.tvm = tvm
    if check and not sat.check_proof(proof, cnf):
        raise InterpolationError("malformed resolution proof")
    _, b_vars = partition_vars(cnf)
    lifted: dict[int, Node] = {}

    def lit_node(l: int) -> Node:
        v = abs(l)
        node = lifted.get(v)
        if node is None:
            node = lifted[v] = _lift_var(cnf, v)
        return node if l > 0 else F.mk_not(node)

    part: dict[int, Node] = {}
    for i, c in proof.leaves.items():
        if proof.labels[i] == "A":
            part[i] = F.disj(lit_node(l) for l in c if abs(l) in b_vars)
        else:
            part[i] = F.TRUE
    base = proof.num_inputs
    for j, (pivot, left, right) in enumerate(proof.nodes):
        if pivot in b_vars:
            part[base + j] = F.mk_and(part[left], part[right])
        else:
            part[base + j] = F.mk_or(part[left], part[right])
    itp = Interpolant(part[proof.root], source_k=source_k, index=index, query=cnf)
    if certify_result and not certify(itp, cnf, seed=seed, conflict_budget=conflict_budget):
        raise InterpolationError("derived interpolant failed certification")
    return itp


def vocabulary_ok(itp: Interpolant | Node, cnf: CnfInstance) -> bool:
    f = itp.formula if isinstance(itp, Interpolant) else itp
    names = F.free_names(f)
    if cnf.tvm is not None:
        return names <= set(cnf.tvm.ts.names)
    a_vars, b_vars = partition_vars(cnf)
    shared = {f"v{v}" for v in a_vars & b_vars}
    return names <= shared


def certify(itp: Interpolant | Node, cnf: CnfInstance, seed: int = 42,
            conflict_budget: int = sat.DEFAULT_CONFLICT_BUDGET) -> bool:
    """True iff A => itp, itp & B is UNSAT and itp uses shared symbols only."""
    f = itp.formula if isinstance(itp, Interpolant) else itp
    if not vocabulary_ok(f, cnf):
        return False
    env = _shared_env(cnf)
    for side, neg in (("A", True), ("B", False)):
        q = CnfInstance(cnf.num_vars, tvm=cnf.tvm, cut=cnf.cut)
        for c, lab, org in zip(cnf.clauses, cnf.labels, cnf.origins):
            if lab == side:
                q.add(c, lab, org)
        encode(q, F.mk_not(f) if neg else f, env, side, "interpolant")
        if not sat.solve(q, seed=seed, conflict_budget=conflict_budget).unsat:
            return False
    return True


def strengthen(itp: Interpolant, inv: Node) -> Interpolant:
    return Interpolant(F.mk_and(inv, itp.formula), source_k=itp.source_k, index=itp.index,
                       strengthened=True, query=itp.query)
