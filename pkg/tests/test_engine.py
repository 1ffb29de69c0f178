import itertools
import os

import pytest

from imcaug import dataflow as df
from imcaug import engine, gen, lang, oracle
from imcaug import formula as F
from imcaug.encoder import build_ts
from imcaug.engine import Algo, EngineConfig, certify_true_verdict, fixed_point_check

ALGOS = ["bmc", "imc", "imc-f", "imc-i"]


def x_even(w=8):
    return F.eq(F.urem(F.var("x", w), F.const(2, w)), F.const(0, w))


def i_le1(w=8):
    return F.ule(F.var("i", w), F.const(1, w))


@pytest.mark.parametrize("algo", ["imc", "imc-f", "imc-i"])
def test_even_is_proved(even, algo):
    r = engine.verify(even, algo)
    assert r.verdict == engine.TRUE
    assert certify_true_verdict(r, build_ts(even))
    assert all(r.certificate.checks.values())


def test_even_effort(even):
    plain = engine.verify(even, "imc")
    aug = engine.verify(even, "imc-i")
    assert aug.k <= plain.k and aug.itp_queries <= plain.itp_queries
    assert aug.inv is not None and aug.inv.env["i"] == (0, 1)


def test_even_bmc_is_inconclusive(even):
    r = engine.verify(even, "bmc", k_max=5)
    assert r.verdict == engine.UNKNOWN and r.k == 5


@pytest.mark.parametrize("algo", ALGOS)
def test_even_bad_fails_at_start(even_bad, algo):
    r = engine.verify(even_bad, algo)
    assert r.verdict == engine.FALSE and r.k == 0
    assert r.counterexample[0][0] == {"x": 0, "i": 0}
    assert len(r.counterexample) == 1
    assert lang.replay(even_bad, r.counterexample)


def test_kmax_too_small_is_unknown(even):
    r = engine.verify(even, "imc", k_max=1)
    assert r.verdict == engine.UNKNOWN


def test_fixed_point_check_examples(even_ts):
    init = even_ts.init
    assert fixed_point_check(F.FALSE, x_even(), F.TRUE, False, even_ts)
    assert fixed_point_check(init, init, F.TRUE, False, even_ts)
    assert fixed_point_check(init, init, i_le1(), True, even_ts)
    assert not fixed_point_check(x_even(), init, i_le1(), True, even_ts)
    # the counterexample states to containment, by enumeration
    outside = [(x, i) for x in range(256) for i in range(256)
               if F.evaluate(F.mk_and(i_le1(), x_even()), {"x": x, "i": i})
               and not F.evaluate(init, {"x": x, "i": i})]
    assert (2, 1) in outside


def test_strengthen_interpolant(even_ts):
    from imcaug.interpolation import Interpolant

    it = Interpolant(x_even(), source_k=1, index=1)
    assert engine.strengthen_interpolant(it, F.TRUE).formula is it.formula
    inv = df.AuxiliaryInvariant({"i": (0, 1)}, i_le1(), 0, True)
    s = engine.strengthen_interpolant(it, inv)
    assert s.strengthened
    assert s.formula is F.mk_and(i_le1(), x_even())


def _enumerated_checks(ts, G, inv):
    """Relative inductiveness of (G, inv) on the concrete semantics (W=4)."""
    p = ts.program
    states = [dict(zip(p.names, v)) for v in itertools.product(range(16), repeat=len(p.names))]
    choices = oracle.nondet_choices(p)
    ev = lambda f, s: F.evaluate(f, s)
    init = all(ev(G, s) for s in states if ev(ts.init, s))
    cons = True
    safe = True
    for s in states:
        if not ev(G, s):
            continue
        for nd in choices:
            if lang.loop_continues(p, s, nd):
                if ev(inv, s) and not ev(G, lang.step(p, s, nd)):
                    cons = False
            elif not lang.check_post(p, s):
                safe = False
    return {"initiation": init, "consecution": cons, "safety": safe}


@pytest.mark.parametrize("algo", ["imc", "imc-f", "imc-i"])
def test_certificate_matches_enumeration_and_detects_corruption(even, algo):
    p = even.with_width(4)
    ts = build_ts(p)
    r = engine.verify(p, algo)
    assert r.verdict == engine.TRUE
    cert = r.certificate
    assert certify_true_verdict(r, ts)
    assert all(_enumerated_checks(ts, cert.final, cert.inv).values())
    broken = 0
    for j in range(len(cert.disjuncts)):
        kept = cert.disjuncts[:j] + cert.disjuncts[j + 1:]
        bad = engine.Certificate(kept, cert.last_itp, cert.inv)
        rep = engine.VerdictReport(engine.TRUE, r.algo, certificate=bad)
        got = certify_true_verdict(rep, ts)
        want = all(_enumerated_checks(ts, bad.final, bad.inv).values())
        assert got == want
        broken += not got
    # without the last interpolant and all earlier ones, only I is left
    only_init = engine.Certificate([ts.init], F.FALSE, cert.inv)
    rep = engine.VerdictReport(engine.TRUE, r.algo, certificate=only_init)
    assert not certify_true_verdict(rep, ts)
    assert rep.certificate.checks["consecution"] is False


def test_certify_rejects_non_true():
    assert not certify_true_verdict(engine.VerdictReport(engine.FALSE, Algo.IMC), None)


def test_top_invariant_reduces_to_plain(even, even_ts):
    top = df.FixedInvariant(df.top_invariant(), even_ts)
    plain = engine.run(even_ts, EngineConfig(algo="imc"))
    for algo in ("imc-f", "imc-i"):
        r = engine.run(even_ts, EngineConfig(algo=algo), top)
        assert (r.verdict, r.k, r.itp_queries) == (plain.verdict, plain.k, plain.itp_queries)


def test_strengthened_interpolants_certify():
    seen = 0
    seed = 0
    while seen < 200:
        p = gen.random_program(seed)
        seed += 1
        r = engine.verify(p, "imc-i", k_max=12, df_level=1)
        recs = [x for x in r.interpolants if x.strengthened]
        assert all(x.certified for x in recs)
        seen += len(recs)


@pytest.mark.parametrize("seed", range(40))
def test_bmc_depth_matches_shortest_counterexample(seed):
    p = gen.random_program(seed)
    rs = oracle.explore(p)
    r = engine.verify(p, "bmc", k_max=12)
    if rs.safe:
        assert r.verdict == engine.UNKNOWN
        return
    shortest = len(rs.trace) - 1
    if shortest > 12:
        assert r.verdict == engine.UNKNOWN
        return
    assert r.verdict == engine.FALSE and r.k == shortest
    assert len(r.counterexample) == len(rs.trace)
    assert lang.replay(p, r.counterexample)


def test_conflict_budget_gives_unknown(even):
    r = engine.verify(even, "imc", conflict_budget=0)
    assert r.verdict in (engine.UNKNOWN, engine.TRUE)
    r = engine.verify(even, "imc", time_budget=0.0)
    assert r.verdict == engine.UNKNOWN
    assert "budget" in r.reason


def test_stats_are_consistent(even):
    r = engine.verify(even, "imc")
    assert r.itp_queries == len(r.interpolants)
    assert r.sat_queries >= r.itp_queries + 1
    assert 0 <= r.solver_time <= r.wall_time
    assert 0 <= r.itp_time <= r.wall_time
    assert r.stats["k"] == r.k


def test_dumps(even, tmp_path):
    cnf_dir = tmp_path / "cnf"
    itp_file = tmp_path / "itp.txt"
    r = engine.verify(even, "imc-i", dump_cnf=str(cnf_dir), dump_itp=str(itp_file))
    files = sorted(os.listdir(cnf_dir))
    assert len(files) == r.sat_queries
    assert open(cnf_dir / files[0]).readline().startswith("p cnf")
    lines = itp_file.read_text().splitlines()
    assert len(lines) == r.itp_queries
    assert "strengthened" in lines[0]


def test_config_validation():
    with pytest.raises(ValueError):
        EngineConfig(k_max=0)
    with pytest.raises(ValueError):
        EngineConfig(algo="pdr")
    assert EngineConfig(algo="IMC_I").algo is Algo.IMC_I
    cfg = EngineConfig(algo="imc-i")
    assert cfg.strengthen_fpc and cfg.strengthen_itp
    cfg = EngineConfig(algo="imc-f")
    assert cfg.strengthen_fpc and not cfg.strengthen_itp


def test_invariant_is_only_fetched_when_strengthening(even_ts):
    class Counting:
        calls = 0

        def snapshot(self):
            Counting.calls += 1
            return df.top_invariant()

    engine.run(even_ts, EngineConfig(algo="imc"), Counting())
    assert Counting.calls == 0
    r = engine.run(even_ts, EngineConfig(algo="imc-f"), Counting())
    assert Counting.calls == r.k
