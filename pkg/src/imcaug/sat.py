"""CDCL SAT solver with resolution-proof logging.

Each learned clause remembers the linear resolution chain that derived it
(first-UIP analysis plus the resolution steps that remove level-0 literals).
On UNSAT the chains reachable from the empty clause are expanded into a
binary resolution DAG, which is what interpolation consumes.
"""

from __future__ import annotations

import heapq
import random
import time
from dataclasses import dataclass, field
from typing import Sequence

SAT = "SAT"
UNSAT = "UNSAT"
UNKNOWN = "UNKNOWN"  # conflict budget exhausted

DEFAULT_CONFLICT_BUDGET = 10_000_000


@dataclass
class ProofLog:
    """Resolution DAG. References below ``num_inputs`` are leaves (input
    clause indices); reference ``num_inputs + j`` is ``nodes[j]``, a triple
    (pivot variable, left reference, right reference)."""

    num_inputs: int
    leaves: dict[int, tuple[int, ...]]
    labels: dict[int, str]
    nodes: list[tuple[int, int, int]]
    root: int

    def clause_of(self) -> dict[int, frozenset]:
        """Clause of every reference, recomputed from the leaves."""
        out: dict[int, frozenset] = {i: frozenset(c) for i, c in self.leaves.items()}
        for j, (pivot, left, right) in enumerate(self.nodes):
            res = (out[left] | out[right]) - {pivot, -pivot}
            out[self.num_inputs + j] = res
        return out

    def __len__(self) -> int:
        return len(self.leaves) + len(self.nodes)


@dataclass
class SolveResult:
    status: str
    model: list[bool] | None = None
    proof: ProofLog | None = None
    stats: dict = field(default_factory=dict)

    @property
    def sat(self) -> bool:
        return self.status == SAT

    @property
    def unsat(self) -> bool:
        return self.status == UNSAT


def luby(i: int) -> int:
    """i-th element (0-based) of the Luby sequence 1 1 2 1 1 2 4 ..."""
    size, seq = 1, 0
    while size < i + 1:
        seq += 1
        size = 2 * size + 1
    while size - 1 != i:
        size = (size - 1) >> 1
        seq -= 1
        i = i % size
    return 1 << seq


class Solver:
    """One-shot CDCL solver over DIMACS-style integer clauses."""

    def __init__(self, num_vars: int, clauses: Sequence[Sequence[int]], seed: int = 42,
                 conflict_budget: int = DEFAULT_CONFLICT_BUDGET, labels: Sequence[str] | None = None):
        self.n = num_vars
        self.inputs = [tuple(c) for c in clauses]
        self.labels = list(labels) if labels is not None else ["A"] * len(self.inputs)
        self.seed = seed
        self.budget = conflict_budget
        rng = random.Random(seed)
        n = num_vars
        self.lval = [0] * (2 * n + 2)
        self.level = [0] * (n + 1)
        self.reason = [-1] * (n + 1)
        self.activity = [rng.random() * 1e-5 for _ in range(n + 1)]
        self.phase = [rng.random() < 0.5 for _ in range(n + 1)]
        self.watches: list[list[int]] = [[] for _ in range(2 * n + 2)]
        self.clauses: list[list[int]] = []
        self.chains: dict[int, list[int]] = {}
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.qhead = 0
        self.var_inc = 1.0
        self.heap = [(-self.activity[v], v) for v in range(1, n + 1)]
        heapq.heapify(self.heap)
        self.stats = {"decisions": 0, "conflicts": 0, "propagations": 0}
        self.final_chain: list[int] | None = None

    # literal codes: +v -> 2v, -v -> 2v+1
    @staticmethod
    def _code(lit: int) -> int:
        return 2 * lit if lit > 0 else -2 * lit + 1

    @staticmethod
    def _lit(code: int) -> int:
        return code >> 1 if not code & 1 else -(code >> 1)

    def _enqueue(self, code: int, reason: int):
        self.lval[code] = 1
        self.lval[code ^ 1] = -1
        v = code >> 1
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason
        self.trail.append(code)

    def _propagate(self) -> int:
        """Unit propagation; returns a conflicting clause id or -1."""
        lval = self.lval
        watches = self.watches
        clauses = self.clauses
        trail = self.trail
        level = self.level
        reason = self.reason
        cur_level = len(self.trail_lim)
        props = 0
        while self.qhead < len(trail):
            p = trail[self.qhead]
            self.qhead += 1
            props += 1
            false_lit = p ^ 1
            ws = watches[false_lit]
            keep = []
            n_ws = len(ws)
            i = 0
            while i < n_ws:
                cid = ws[i]
                i += 1
                c = clauses[cid]
                if c[0] == false_lit:
                    c[0] = c[1]
                    c[1] = false_lit
                first = c[0]
                if lval[first] == 1:
                    keep.append(cid)
                    continue
                for k in range(2, len(c)):
                    lk = c[k]
                    if lval[lk] != -1:
                        c[1] = lk
                        c[k] = false_lit
                        watches[lk].append(cid)
                        break
                else:
                    keep.append(cid)
                    if lval[first] == -1:
                        keep.extend(ws[i:])
                        watches[false_lit] = keep
                        self.stats["propagations"] += props
                        return cid
                    lval[first] = 1
                    lval[first ^ 1] = -1
                    v = first >> 1
                    level[v] = cur_level
                    reason[v] = cid
                    trail.append(first)
            watches[false_lit] = keep
        self.stats["propagations"] += props
        return -1

    def _bump(self, v: int):
        act = self.activity
        act[v] += self.var_inc
        if act[v] > 1e100:
            for u in range(1, self.n + 1):
                act[u] *= 1e-100
            self.var_inc *= 1e-100
            self._rebuild_heap()
        elif self.lval[2 * v] == 0:
            heapq.heappush(self.heap, (-act[v], v))

    def _rebuild_heap(self):
        act = self.activity
        lval = self.lval
        self.heap = [(-act[v], v) for v in range(1, self.n + 1) if lval[2 * v] == 0]
        heapq.heapify(self.heap)

    def _backtrack(self, lvl: int):
        if len(self.trail_lim) <= lvl:
            return
        lim = self.trail_lim[lvl]
        lval = self.lval
        act = self.activity
        phase = self.phase
        heap = self.heap
        push = heapq.heappush
        for code in self.trail[lim:]:
            v = code >> 1
            lval[code] = 0
            lval[code ^ 1] = 0
            phase[v] = not code & 1
            push(heap, (-act[v], v))
        del self.trail[lim:]
        del self.trail_lim[lvl:]
        self.qhead = lim
        if len(heap) > 4 * self.n + 64:
            self._rebuild_heap()

    def _zero_level_resolve(self, chain: list[int], marked: set[int]):
        """Extend ``chain`` with resolutions that remove the marked level-0
        variables, processing the trail backwards."""
        if not marked:
            return
        clauses = self.clauses
        end = self.trail_lim[0] if self.trail_lim else len(self.trail)
        for idx in range(end - 1, -1, -1):
            v = self.trail[idx] >> 1
            if v in marked:
                r = self.reason[v]
                chain.append(v)
                chain.append(r)
                for q in clauses[r]:
                    u = q >> 1
                    if u != v:
                        marked.add(u)

    def _analyze(self, confl: int):
        level = self.level
        reason = self.reason
        clauses = self.clauses
        trail = self.trail
        cur = len(self.trail_lim)
        seen = set()
        zero = set()
        learnt = [0]
        chain = [confl]
        counter = 0
        pivot = 0
        idx = len(trail) - 1
        clause = clauses[confl]
        while True:
            for q in clause:
                v = q >> 1
                if v == pivot or v in seen:
                    continue
                seen.add(v)
                lv = level[v]
                if lv == 0:
                    zero.add(v)
                    continue
                self._bump(v)
                if lv == cur:
                    counter += 1
                else:
                    learnt.append(q)
            while (trail[idx] >> 1) not in seen:
                idx -= 1
            p = trail[idx]
            idx -= 1
            pivot = p >> 1
            counter -= 1
            if counter == 0:
                break
            r = reason[pivot]
            chain.append(pivot)
            chain.append(r)
            clause = clauses[r]
        learnt[0] = p ^ 1
        self._zero_level_resolve(chain, zero)
        if len(learnt) == 1:
            bt = 0
        else:
            best = 1
            for i in range(2, len(learnt)):
                if level[learnt[i] >> 1] > level[learnt[best] >> 1]:
                    best = i
            learnt[1], learnt[best] = learnt[best], learnt[1]
            bt = level[learnt[1] >> 1]
        return learnt, chain, bt

    def _final_conflict(self, confl: int):
        chain = [confl]
        marked = {q >> 1 for q in self.clauses[confl]}
        self._zero_level_resolve(chain, marked)
        self.final_chain = chain

    def _add_input(self, idx: int, lits: tuple[int, ...]) -> bool:
        """Register an input clause; False means immediate level-0 conflict."""
        codes = []
        seen = set()
        taut = False
        for l in lits:
            c = self._code(l)
            if c in seen:
                continue
            if c ^ 1 in seen:
                taut = True
            seen.add(c)
            codes.append(c)
        self.clauses.append(codes)
        if taut:
            self.clauses[idx] = codes
            return True
        if not codes:
            self.final_chain = [idx]
            return False
        if len(codes) == 1:
            c = codes[0]
            if self.lval[c] == -1:
                self._final_conflict(idx)
                return False
            if self.lval[c] == 0:
                self._enqueue(c, idx)
            return True
        self.watches[codes[0]].append(idx)
        self.watches[codes[1]].append(idx)
        return True

    def solve(self) -> SolveResult:
        t0 = time.perf_counter()
        status = self._search()
        self.stats["solve_time"] = time.perf_counter() - t0
        self.stats["conflicts_total"] = self.stats["conflicts"]
        if status == SAT:
            model = [False] * (self.n + 1)
            for code in self.trail:
                model[code >> 1] = not code & 1
            return SolveResult(SAT, model=model, stats=dict(self.stats))
        if status == UNSAT:
            return SolveResult(UNSAT, proof=self._build_proof(), stats=dict(self.stats))
        return SolveResult(UNKNOWN, stats=dict(self.stats))

    def _search(self) -> str:
        for idx, c in enumerate(self.inputs):
            if not self._add_input(idx, c):
                return UNSAT
        lval = self.lval
        restart_i = 0
        next_restart = 64 * luby(restart_i)
        since_restart = 0
        while True:
            confl = self._propagate()
            if confl >= 0:
                self.stats["conflicts"] += 1
                if not self.trail_lim:
                    self._final_conflict(confl)
                    return UNSAT
                if self.stats["conflicts"] > self.budget:
                    return UNKNOWN
                learnt, chain, bt = self._analyze(confl)
                self._backtrack(bt)
                cid = len(self.clauses)
                self.clauses.append(learnt)
                self.chains[cid] = chain
                if len(learnt) > 1:
                    self.watches[learnt[0]].append(cid)
                    self.watches[learnt[1]].append(cid)
                self._enqueue(learnt[0], cid)
                self.var_inc *= 1.0 / 0.95
                since_restart += 1
                continue
            if since_restart >= next_restart:
                restart_i += 1
                next_restart = 64 * luby(restart_i)
                since_restart = 0
                self._backtrack(0)
                continue
            # decide
            heap = self.heap
            v = 0
            while heap:
                _, u = heapq.heappop(heap)
                if lval[2 * u] == 0:
                    v = u
                    break
            if v == 0:
                return SAT
            self.stats["decisions"] += 1
            self.trail_lim.append(len(self.trail))
            self._enqueue(2 * v if self.phase[v] else 2 * v + 1, -1)

    def _build_proof(self) -> ProofLog:
        m = len(self.inputs)
        nodes: list[tuple[int, int, int]] = []
        ref: dict[int, int] = {}
        leaves: dict[int, tuple[int, ...]] = {}

        def leaf(cid: int) -> int:
            if cid not in leaves:
                leaves[cid] = self.inputs[cid]
            return cid

        # iterative post-order over learned clauses used by the final chain
        def expand(chain: list[int]) -> int:
            cur = resolve_ref(chain[0])
            for i in range(1, len(chain), 2):
                pivot, cid = chain[i], chain[i + 1]
                nodes.append((pivot, cur, resolve_ref(cid)))
                cur = m + len(nodes) - 1
            return cur

        def resolve_ref(cid: int) -> int:
            if cid < m:
                return leaf(cid)
            return ref[cid]

        # order learned clauses so antecedents come first
        needed: list[int] = []
        visited: set[int] = set()
        todo = [c for i, c in enumerate(self.final_chain) if i % 2 == 0 and c >= m]
        while todo:
            cid = todo.pop()
            if cid in visited:
                continue
            visited.add(cid)
            needed.append(cid)
            chain = self.chains[cid]
            todo.extend(c for i, c in enumerate(chain) if i % 2 == 0 and c >= m)
        for cid in sorted(needed):
            ref[cid] = expand(self.chains[cid])
        root = expand(self.final_chain)
        labels = {cid: self.labels[cid] for cid in leaves}
        return ProofLog(num_inputs=m, leaves=leaves, labels=labels, nodes=nodes, root=root)


def solve(cnf, seed: int = 42, conflict_budget: int = DEFAULT_CONFLICT_BUDGET) -> SolveResult:
    """Solve a CnfInstance (or any object with ``num_vars``/``clauses``)."""
    labels = getattr(cnf, "labels", None)
    solver = Solver(cnf.num_vars, cnf.clauses, seed=seed, conflict_budget=conflict_budget,
                    labels=labels or None)
    return solver.solve()


def solve_clauses(num_vars: int, clauses: Sequence[Sequence[int]], seed: int = 42,
                  conflict_budget: int = DEFAULT_CONFLICT_BUDGET) -> SolveResult:
    return Solver(num_vars, clauses, seed=seed, conflict_budget=conflict_budget).solve()


def check_proof(proof: ProofLog, cnf) -> bool:
    """Validate every resolution step, the empty root and verbatim leaves."""
    clauses = cnf.clauses
    labels = getattr(cnf, "labels", None)
    if proof.num_inputs != len(clauses):
        return False
    computed: dict[int, frozenset] = {}
    for i, c in proof.leaves.items():
        if not 0 <= i < len(clauses):
            return False
        if frozenset(c) != frozenset(clauses[i]) or len(set(c)) != len(set(clauses[i])):
            return False
        if labels is not None and proof.labels.get(i) != labels[i]:
            return False
        computed[i] = frozenset(c)
    for j, (pivot, left, right) in enumerate(proof.nodes):
        a = computed.get(left)
        b = computed.get(right)
        if a is None or b is None:
            return False
        if not ((pivot in a and -pivot in b) or (-pivot in a and pivot in b)):
            return False
        computed[proof.num_inputs + j] = (a | b) - {pivot, -pivot}
    root = computed.get(proof.root)
    return root is not None and len(root) == 0


def model_satisfies(model: Sequence[bool], clauses: Sequence[Sequence[int]]) -> bool:
    return all(any(model[l] if l > 0 else not model[-l] for l in c) for c in clauses)


def proof_to_tracecheck(proof: ProofLog) -> str:
    """Dump the DAG in TraceCheck resolution-trace format."""
    clauses = proof.clause_of()
    ids = {}
    lines = []
    for i in sorted(proof.leaves):
        ids[i] = len(ids) + 1
        lines.append(f"{ids[i]} {' '.join(map(str, sorted(clauses[i], key=abs)))} 0 0".replace("  ", " "))
    for j, (_, left, right) in enumerate(proof.nodes):
        ref = proof.num_inputs + j
        ids[ref] = len(ids) + 1
        lits = " ".join(map(str, sorted(clauses[ref], key=abs)))
        lines.append(f"{ids[ref]} {lits} 0 {ids[left]} {ids[right]} 0".replace("  ", " "))
    return "\n".join(lines) + "\n"
