"""Acceptance suite: one test per criterion, each printing a pass/fail line.

The random corpus is generated from fixed seeds and every engine run on it
happens once, in the module-scoped fixture below; the individual criteria
then inspect the collected reports.
"""

import statistics
import time
from dataclasses import dataclass, field

import pytest

from imcaug import dataflow as df
from imcaug import engine, gen, lang, oracle, sat
from imcaug.encoder import build_ts, consecution_check, implication_check
from imcaug.engine import EngineConfig

from conftest import ACCEPTANCE, EVEN_SRC

CORPUS_SIZE = 500
CORPUS_SEED = 1
BMC_KMAX = 8
IMC_KMAX = 20
ALGOS = ("bmc", "imc", "imc-f", "imc-i")
SEEDS = (0, 1, 2, 3, 42)


def record(n: int, ok: bool, detail: str):
    ACCEPTANCE[n] = (ok, detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


@dataclass
class Task:
    seed: int
    program: lang.Program
    ts: object
    reach: oracle.ReachableSet
    reports: dict = field(default_factory=dict)
    top_reports: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)
    inv: df.AuxiliaryInvariant | None = None
    published: list = field(default_factory=list)


def _run(task: Task, algo: str, src, **kw):
    cfg = EngineConfig(algo=algo, k_max=BMC_KMAX if algo == "bmc" else IMC_KMAX, **kw)
    try:
        return engine.run(task.ts, cfg, src)
    except engine.EngineError as exc:
        task.errors.append((algo, str(exc)))
        return None


@pytest.fixture(scope="module")
def corpus():
    t0 = time.perf_counter()
    tasks = []
    for i in range(CORPUS_SIZE):
        seed = CORPUS_SEED * 100_000 + i
        p = gen.random_program(seed)
        ts = build_ts(p)
        task = Task(seed, p, ts, oracle.explore(p))
        generator = df.InvariantGenerator(p, ts, max_level=0).start()
        task.inv = generator.snapshot()
        task.published = list(generator.history)
        for algo in ALGOS:
            task.reports[algo] = _run(task, algo, generator)
        top = df.FixedInvariant(df.parse_invariant_text("true", ts), ts)
        for algo in ("imc-f", "imc-i"):
            task.top_reports[algo] = _run(task, algo, top)
        tasks.append(task)
    return tasks, time.perf_counter() - t0


def _reports(tasks, algos=ALGOS):
    for t in tasks:
        for a in algos:
            yield t, a, t.reports[a]


def test_criterion_01_even_golden():
    t0 = time.perf_counter()
    p = lang.parse(EVEN_SRC)
    assert p.width == 8
    ts = build_ts(p)
    gen0 = df.InvariantGenerator(p, ts, max_level=0, mode="sync").start()
    inv = gen0.snapshot()
    inv_ok = (inv.certified_inductive and inv.env is not None and inv.env["i"] == (0, 1)
              and sat.solve(implication_check(inv.formula, df.env_formula({"i": (0, 1)}, {"i": 8}), ts)).unsat)
    reps = {a: engine.run(ts, EngineConfig(algo=a), gen0) for a in ("imc", "imc-f", "imc-i")}
    verdicts_ok = all(r.verdict == engine.TRUE for r in reps.values())
    plain, aug = reps["imc"], reps["imc-i"]
    effort_ok = aug.k <= plain.k and aug.itp_queries <= plain.itp_queries
    elapsed = time.perf_counter() - t0
    ok = inv_ok and verdicts_ok and effort_ok and elapsed < 10
    detail = (f"inv {inv.to_text().strip().replace(chr(10), ', ')}; "
              + "; ".join(f"{a} {r.verdict} k={r.k} itp={r.itp_queries}" for a, r in reps.items())
              + f"; reference k/itp: plain 3/7, augmented 1/2; {elapsed:.2f}s")
    record(1, ok, detail)
    assert ok


def test_criterion_02_differential_soundness(corpus):
    tasks, elapsed = corpus
    checked = mismatches = unknown = 0
    errors = sum(len(t.errors) for t in tasks)
    for t, a, r in _reports(tasks):
        if r is None:
            continue
        if r.verdict == engine.UNKNOWN:
            unknown += 1
            continue
        checked += 1
        if (r.verdict == engine.TRUE) != t.reach.safe:
            mismatches += 1
    safe = sum(t.reach.safe for t in tasks)
    ok = mismatches == 0 and errors == 0 and elapsed < 600 and len(tasks) >= 500
    record(2, ok, f"{len(tasks)} programs ({safe} safe), {checked} conclusive verdicts, "
                  f"{mismatches} mismatches, {unknown} unknown, {errors} engine errors, {elapsed:.0f}s")
    assert ok


def test_criterion_03_interpolants_certify(corpus):
    tasks, _ = corpus
    total = failed = 0
    for t, a, r in _reports(tasks):
        if r is None:
            continue
        for rec in r.interpolants:
            total += 1
            failed += rec.raw_certified is not True
    errors = [e for t in tasks for e in t.errors if "interpolant" in e[1]]
    failed += len(errors)
    ok = failed == 0 and total > 0
    record(3, ok, f"{total} derived interpolants, {failed} certification failures")
    assert ok


def test_criterion_04_strengthened_interpolants_certify(corpus):
    tasks, _ = corpus
    total = failed = 0
    for t in tasks:
        r = t.reports["imc-i"]
        if r is None:
            continue
        for rec in r.interpolants:
            assert rec.strengthened
            total += 1
            failed += rec.certified is not True
    failed += sum(1 for t in tasks for a, e in t.errors if a == "imc-i")
    ok = failed == 0 and total > 0
    record(4, ok, f"{total} strengthened interpolants, {failed} certification failures")
    assert ok


def test_criterion_05_true_verdicts_certify(corpus):
    tasks, _ = corpus
    total = failed = 0
    for t, a, r in _reports(tasks):
        if r is None or r.verdict != engine.TRUE:
            continue
        total += 1
        # fresh queries, independent of the checks made inside the engine
        if not engine.certify_true_verdict(r, t.ts, seed=7):
            failed += 1
    ok = failed == 0 and total > 0
    record(5, ok, f"{total} TRUE verdicts, {failed} failed relative-inductiveness checks")
    assert ok


def test_criterion_06_top_invariant_reduction(corpus):
    tasks, _ = corpus
    mismatches = compared = 0
    for t in tasks:
        plain = t.reports["imc"]
        for a in ("imc-f", "imc-i"):
            r = t.top_reports[a]
            compared += 1
            if plain is None or r is None or r.verdict != plain.verdict:
                mismatches += 1
    ok = mismatches == 0
    record(6, ok, f"{compared} runs with the invariant forced to true, {mismatches} verdict mismatches")
    assert ok


def test_criterion_07_seed_robustness(corpus):
    tasks, _ = corpus
    safe = [t for t in tasks if t.reach.safe][:50]
    verdicts = {}
    proofs = {}
    budget_hits = 0
    for seed in SEEDS:
        for t in safe:
            src = df.InvariantGenerator(t.program, t.ts, max_level=0, seed=seed).start()
            for a in ("imc", "imc-f", "imc-i"):
                r = engine.run(t.ts, EngineConfig(algo=a, k_max=IMC_KMAX, seed=seed), src)
                verdicts.setdefault((t.seed, a), set()).add(r.verdict)
                proofs[(seed, a)] = proofs.get((seed, a), 0) + r.itp_queries
                budget_hits += "budget" in r.reason
    unstable = [key for key, v in verdicts.items() if len(v) > 1]
    ok = len(safe) == 50 and not unstable
    counts = ", ".join(f"{a}:" + "/".join(str(proofs[(s, a)]) for s in SEEDS)
                       for a in ("imc", "imc-f", "imc-i"))
    record(7, ok, f"{len(safe)} safe tasks x seeds {SEEDS}: {len(unstable)} unstable verdicts, "
                  f"{budget_hits} budget hits; interpolants per seed {counts}")
    assert ok


def test_criterion_08_effort_trend(corpus):
    tasks, _ = corpus
    dk, ditp = [], []
    for t in tasks:
        if not t.reach.safe or t.inv is None or t.inv.trivial:
            continue
        plain, aug = t.reports["imc"], t.reports["imc-i"]
        if plain is None or aug is None:
            continue
        if plain.verdict != engine.TRUE or aug.verdict != engine.TRUE:
            continue
        dk.append(aug.k - plain.k)
        ditp.append(aug.itp_queries - plain.itp_queries)
    if not dk:
        record(8, False, "no paired tasks")
        pytest.fail("no paired tasks")
    mk, mi = statistics.median(dk), statistics.median(ditp)
    print("paired (dk, ditp):", list(zip(dk, ditp)))
    better = sum(1 for a, b in zip(dk, ditp) if a <= 0 and b <= 0)
    ok = mk <= 0 and mi <= 0
    record(8, ok, f"{len(dk)} paired safe tasks with non-trivial invariants: median dk={mk}, "
                  f"median ditp={mi}; {better} tasks with dk<=0 and ditp<=0; "
                  f"mean dk={statistics.mean(dk):.2f}, mean ditp={statistics.mean(ditp):.2f}")
    assert ok


def test_criterion_09_invariants_sound_and_inductive(corpus):
    tasks, _ = corpus
    checked = failed = 0
    for t in tasks:
        g = df.InvariantGenerator(t.program, t.ts, max_level=df.MAX_LEVEL).start()
        published = t.published + g.history
        hull = oracle.hull(t.reach)
        states = t.reach.states()
        for inv in published:
            checked += 1
            contains = all(inv.env[n][0] <= lo and hi <= inv.env[n][1] for n, (lo, hi) in hull.items())
            holds = all(df.F.evaluate(inv.formula, s) for s in states)
            init = sat.solve(implication_check(t.ts.init, inv.formula, t.ts)).unsat
            cons = sat.solve(consecution_check(inv.formula, inv.formula, t.ts)).unsat
            if not (inv.certified_inductive and contains and holds and init and cons):
                failed += 1
    ok = failed == 0 and checked > 0
    record(9, ok, f"{checked} published invariants, {failed} unsound or non-inductive")
    assert ok


def test_criterion_10_counterexamples_replay(corpus):
    tasks, _ = corpus
    total = failed = 0
    for t, a, r in _reports(tasks):
        if r is None or r.verdict != engine.FALSE:
            continue
        total += 1
        if not lang.replay(t.program, r.counterexample):
            failed += 1
    failed += sum(1 for t in tasks for a, e in t.errors if "replay" in e)
    ok = failed == 0 and total > 0
    record(10, ok, f"{total} FALSE verdicts, {failed} traces failed replay")
    assert ok
