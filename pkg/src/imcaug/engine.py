"""Interpolation-based model checking with optional auxiliary invariants.

``run`` executes the classic interpolation loop: a zero-step check, then
for growing unrolling depth k a BMC query whose A part is re-seeded with
each new interpolant until either the interpolants reach a fixed point
(TRUE) or the query becomes satisfiable (next k). An auxiliary invariant
can strengthen the fixed-point check (IMC_F) and, additionally, every
interpolant before it is used (IMC_I).
"""

from __future__ import annotations

import enum
import logging
import os
import time
from dataclasses import dataclass, field

from . import dataflow
from . import formula as F
from . import interpolation, lang, sat
from .dataflow import AuxiliaryInvariant
from .encoder import (CnfInstance, TimedVariableMap, TransitionSystem, bmc_formula,
                      consecution_check, extract_inputs, extract_state, implication_check,
                      zero_step_check)
from .formula import Node

log = logging.getLogger(__name__)

TRUE, FALSE, UNKNOWN = "TRUE", "FALSE", "UNKNOWN"


class Algo(enum.Enum):
    BMC = "bmc"
    IMC = "imc"
    IMC_F = "imc-f"
    IMC_I = "imc-i"

    @property
    def strengthen_fpc(self) -> bool:
        return self in (Algo.IMC_F, Algo.IMC_I)

    @property
    def strengthen_itp(self) -> bool:
        return self is Algo.IMC_I

    @classmethod
    def parse(cls, s: "str | Algo") -> "Algo":
        if isinstance(s, Algo):
            return s
        key = s.strip().lower().replace("_", "-")
        for a in cls:
            if a.value == key:
                return a
        raise ValueError(f"unknown algorithm {s!r}")


class EngineError(Exception):
    """An internal contract was violated; the engine refuses to answer."""


@dataclass
class EngineConfig:
    algo: Algo = Algo.IMC
    k_max: int = 100
    seed: int = 42
    conflict_budget: int = sat.DEFAULT_CONFLICT_BUDGET
    time_budget: float | None = None
    check_contracts: bool = True
    dump_cnf: str | None = None
    dump_itp: str | None = None

    def __post_init__(self):
        self.algo = Algo.parse(self.algo)
        if self.k_max < 1:
            raise ValueError("k_max must be at least 1")

    @property
    def strengthen_fpc(self) -> bool:
        return self.algo.strengthen_fpc

    @property
    def strengthen_itp(self) -> bool:
        return self.algo.strengthen_itp


@dataclass
class Certificate:
    """What a TRUE verdict rests on: G (as its disjuncts), the last
    interpolant, the auxiliary invariant and the discharged checks."""
    disjuncts: list[Node]
    last_itp: Node
    inv: Node
    checks: dict[str, bool] = field(default_factory=dict)

    @property
    def G(self) -> Node:
        return F.disj(self.disjuncts)

    @property
    def final(self) -> Node:
        return F.mk_or(self.G, self.last_itp)


@dataclass
class ItpRecord:
    """One interpolant as used by the engine. ``certified`` is the outcome of
    the certification of ``formula`` against its generating query (None when
    contract checks are off)."""
    k: int
    index: int
    formula: Node
    strengthened: bool
    certified: bool | None
    raw: Node | None = None
    raw_certified: bool | None = None


@dataclass
class VerdictReport:
    verdict: str
    algo: Algo
    k: int = 0
    itp_queries: int = 0
    sat_queries: int = 0
    certify_queries: int = 0
    solver_time: float = 0.0
    itp_time: float = 0.0
    wall_time: float = 0.0
    seed: int = 42
    counterexample: list | None = None
    certificate: Certificate | None = None
    inv: AuxiliaryInvariant | None = None
    reason: str = ""
    interpolants: list[ItpRecord] = field(default_factory=list, repr=False)

    @property
    def stats(self) -> dict:
        return {"k": self.k, "itp_queries": self.itp_queries, "sat_queries": self.sat_queries,
                "solver_time": self.solver_time, "itp_time": self.itp_time,
                "wall_time": self.wall_time}


class _Budget(Exception):
    pass


class _Run:
    def __init__(self, ts: TransitionSystem, cfg: EngineConfig, inv_source):
        self.ts = ts
        self.cfg = cfg
        self.inv_source = inv_source
        self.t0 = time.perf_counter()
        self.deadline = None if cfg.time_budget is None else self.t0 + cfg.time_budget
        self.report = VerdictReport(UNKNOWN, cfg.algo, seed=cfg.seed)
        self.ndump = 0

    # -- bookkeeping --------------------------------------------------------

    def _check_time(self):
        if self.deadline is not None and time.perf_counter() > self.deadline:
            raise _Budget("time budget exhausted")

    def _dump(self, cnf: CnfInstance, tag: str):
        if not self.cfg.dump_cnf:
            return
        os.makedirs(self.cfg.dump_cnf, exist_ok=True)
        self.ndump += 1
        path = os.path.join(self.cfg.dump_cnf, f"q{self.ndump:04d}-{tag}.cnf")
        with open(path, "w") as fh:
            fh.write(cnf.to_dimacs())

    def solve(self, cnf: CnfInstance, tag: str) -> sat.SolveResult:
        self._check_time()
        self._dump(cnf, tag)
        t = time.perf_counter()
        r = sat.solve(cnf, seed=self.cfg.seed, conflict_budget=self.cfg.conflict_budget)
        self.report.solver_time += time.perf_counter() - t
        self.report.sat_queries += 1
        return r

    # -- algorithm steps ----------------------------------------------------

    def fixed_point_check(self, itp: Node, G: Node, inv: Node, strengthened: bool) -> bool:
        lhs = F.mk_and(inv, itp) if strengthened else itp
        if lhs is F.FALSE:
            return True
        q = implication_check(lhs, G, self.ts, origin="fixed-point-check")
        r = self.solve(q, "fpc")
        return r.unsat  # an exhausted budget counts as a failed check

    def derive(self, proof, cnf: CnfInstance, k: int, index: int) -> interpolation.Interpolant:
        t = time.perf_counter()
        try:
            itp = interpolation.derive(proof, cnf, source_k=k, index=index, seed=self.cfg.seed,
                                       check=self.cfg.check_contracts,
                                       certify_result=self.cfg.check_contracts,
                                       conflict_budget=self.cfg.conflict_budget)
        except interpolation.InterpolationError as exc:
            raise EngineError(str(exc)) from exc
        finally:
            self.report.itp_time += time.perf_counter() - t
        self.report.itp_queries += 1
        if self.cfg.check_contracts:
            self.report.certify_queries += 2
        return itp

    def strengthen(self, itp: interpolation.Interpolant, inv: Node, cnf: CnfInstance):
        out = strengthen_interpolant(itp, inv)
        certified = None
        if self.cfg.check_contracts:
            t = time.perf_counter()
            certified = interpolation.certify(out, cnf, seed=self.cfg.seed,
                                              conflict_budget=self.cfg.conflict_budget)
            self.report.itp_time += time.perf_counter() - t
            self.report.certify_queries += 2
            if not certified:
                raise EngineError("strengthened interpolant failed certification")
        return out, certified

    def counterexample(self, model, tvm: TimedVariableMap, k: int) -> list:
        p = self.ts.program
        return extract_trace(self.ts, model, tvm, k) if p is not None else []

    def run(self) -> VerdictReport:
        rep = self.report
        try:
            self._run()
        except _Budget as exc:
            rep.verdict, rep.reason = UNKNOWN, str(exc)
        rep.wall_time = time.perf_counter() - self.t0
        if self.cfg.dump_itp:
            with open(self.cfg.dump_itp, "w") as fh:
                for rec in rep.interpolants:
                    tag = " strengthened" if rec.strengthened else ""
                    fh.write(f"k={rec.k} #{rec.index}{tag}: {F.to_str(rec.formula)}\n")
        return rep

    def _false(self, model, tvm, k):
        rep = self.report
        rep.verdict, rep.k = FALSE, k
        trace = self.counterexample(model, tvm, k)
        if self.ts.program is not None and not lang.replay(self.ts.program, trace):
            raise EngineError(f"counterexample at k={k} does not replay")
        rep.counterexample = trace

    def _run(self):
        ts, cfg, rep = self.ts, self.cfg, self.report
        z = zero_step_check(ts)
        r = self.solve(z, "zero")
        if r.sat:
            self._false(r.model, z.tvm, 0)
            return
        if r.status == sat.UNKNOWN:
            raise _Budget("conflict budget exhausted")
        strengthening = cfg.strengthen_fpc or cfg.strengthen_itp
        index = 0
        for k in range(1, cfg.k_max + 1):
            rep.k = k
            tvm = TimedVariableMap(ts, k)
            cnf = bmc_formula(ts, ts.init, k, tvm)
            r = self.solve(cnf, f"bmc-k{k}")
            if r.sat:
                self._false(r.model, tvm, k)
                return
            if r.status == sat.UNKNOWN:
                raise _Budget("conflict budget exhausted")
            if cfg.algo is Algo.BMC:
                continue
            disjuncts = [ts.init]
            inv = F.TRUE
            if strengthening:
                snap = self.inv_source.snapshot() if self.inv_source is not None else None
                if snap is not None and snap.certified_inductive:
                    inv = snap.formula
                    rep.inv = snap
            while True:
                r = self.solve(cnf, f"itp-k{k}")
                if r.sat:
                    break
                if r.status == sat.UNKNOWN:
                    raise _Budget("conflict budget exhausted")
                index += 1
                raw = self.derive(r.proof, cnf, k, index)
                # derive raises on a failed certification
                raw_ok = True if cfg.check_contracts else None
                itp, certified = raw, raw_ok
                if cfg.strengthen_itp:
                    itp, certified = self.strengthen(raw, inv, cnf)
                rep.interpolants.append(ItpRecord(k, index, itp.formula, itp.strengthened,
                                                  certified, raw.formula, raw_ok))
                G = F.disj(disjuncts)
                if self.fixed_point_check(itp.formula, G, inv, cfg.strengthen_fpc):
                    rep.verdict = TRUE
                    rep.certificate = Certificate(list(disjuncts), itp.formula, inv)
                    if cfg.check_contracts:
                        if not certify_true_verdict(rep, ts, seed=cfg.seed):
                            raise EngineError("TRUE verdict failed certification")
                    return
                disjuncts.append(itp.formula)
                tvm = TimedVariableMap(ts, k)
                cnf = bmc_formula(ts, itp.formula, k, tvm, start_origin="interpolant")
        rep.reason = "k_max reached"


def run(ts: TransitionSystem, cfg: EngineConfig | None = None, inv_source=None) -> VerdictReport:
    """Verify ``ts`` with the configured algorithm.

    ``inv_source`` is anything with a ``snapshot()`` method returning an
    :class:`AuxiliaryInvariant`; it is consulted once per unrolling depth
    and only by the strengthened variants.
    """
    return _Run(ts, cfg or EngineConfig(), inv_source).run()


def strengthen_interpolant(itp: interpolation.Interpolant, inv: Node | AuxiliaryInvariant):
    f = inv.formula if isinstance(inv, AuxiliaryInvariant) else inv
    return interpolation.strengthen(itp, f)


def fixed_point_check(itp: Node, G: Node, inv: Node, strengthened: bool, ts: TransitionSystem,
                      seed: int = 42, conflict_budget: int = sat.DEFAULT_CONFLICT_BUDGET) -> bool:
    """UNSAT(inv & itp & !G) when strengthened, else UNSAT(itp & !G)."""
    lhs = F.mk_and(inv, itp) if strengthened else itp
    if lhs is F.FALSE:
        return True
    q = implication_check(lhs, G, ts, origin="fixed-point-check")
    return sat.solve(q, seed=seed, conflict_budget=conflict_budget).unsat


def check_relative_inductive(G: Node, inv: Node, ts: TransitionSystem, seed: int = 42,
                             conflict_budget: int = sat.DEFAULT_CONFLICT_BUDGET) -> dict[str, bool]:
    """Discharge I => G, inv & G & T => G' and G => P, plus inductiveness
    of inv itself."""
    def unsat(q):
        return sat.solve(q, seed=seed, conflict_budget=conflict_budget).unsat

    checks = {
        "initiation": unsat(implication_check(ts.init, G, ts, origin="initiation")),
        "consecution": unsat(consecution_check(F.mk_and(inv, G), G, ts, origin="consecution")),
        "safety": unsat(implication_check(G, ts.safe, ts, origin="safety")),
    }
    if inv is not F.TRUE:
        checks["inv-initiation"] = unsat(implication_check(ts.init, inv, ts, origin="invariant"))
        checks["inv-consecution"] = unsat(consecution_check(inv, inv, ts, origin="invariant"))
    return checks


def certify_true_verdict(report: VerdictReport, ts: TransitionSystem, seed: int = 42) -> bool:
    """Re-check by fresh SAT queries that the accepted (G or itp_n, inv)
    pair is relatively inductive and safe. Records the checks on the
    certificate."""
    cert = report.certificate
    if report.verdict != TRUE or cert is None:
        return False
    checks = check_relative_inductive(cert.final, cert.inv, ts, seed=seed)
    cert.checks = checks
    return all(checks.values())


def extract_trace(ts: TransitionSystem, model, tvm: TimedVariableMap, k: int) -> list:
    """Concrete counterexample from a satisfying BMC assignment.

    Stuttering steps (where the loop condition was false inside T) are
    dropped; the trace ends at the first state whose exit path violates an
    assertion.
    """
    p = ts.program
    all_nd = range(len(p.nondet_kinds))
    states = [extract_state(model, tvm, i) for i in range(k + 1)]
    end = None
    for i in range(k + 1):
        exit_nd = {j: 0 for j in all_nd}
        exit_nd.update(extract_inputs(model, tvm, i, exit_side=True))
        if not lang.loop_continues(p, states[i], exit_nd) and not lang.check_post(p, states[i]):
            end = i, exit_nd
            break
    if end is None:
        return []
    last, exit_nd = end
    trace = []
    for i in range(last):
        nd = {j: 0 for j in all_nd}
        nd.update(extract_inputs(model, tvm, i))
        if lang.loop_continues(p, states[i], nd):
            trace.append((states[i], nd))
    trace.append((states[last], exit_nd))
    return trace


def make_inv_source(ts: TransitionSystem, *, df_level: int = 0, df_mode: str = "sync",
                    df_budget: float | None = None, inv_text: str | None = None, seed: int = 42):
    """Invariant provider from an explicit invariant text or the interval
    analysis."""
    if inv_text is not None:
        return dataflow.FixedInvariant(dataflow.parse_invariant_text(inv_text, ts), ts, seed)
    gen = dataflow.InvariantGenerator(ts.program, ts, max_level=df_level, mode=df_mode,
                                      budget=df_budget, seed=seed)
    return gen.start()


def verify(program: lang.Program, algo="imc", **kwargs) -> VerdictReport:
    """Convenience wrapper: build the transition system, start the invariant
    generator when needed and run the engine."""
    from .encoder import build_ts

    df = {k: kwargs.pop(k) for k in ("df_level", "df_mode", "df_budget", "inv_text") if k in kwargs}
    cfg = EngineConfig(algo=algo, **kwargs)
    ts = build_ts(program)
    src = None
    if cfg.strengthen_fpc:
        src = make_inv_source(ts, seed=cfg.seed, **df)
        if getattr(src, "mode", "sync") == "sync" and hasattr(src, "wait"):
            src.wait()
    return run(ts, cfg, src)
