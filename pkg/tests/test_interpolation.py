import itertools
import random

import pytest

from imcaug import formula as F
from imcaug import interpolation as itp_mod
from imcaug import sat
from imcaug.encoder import (CnfInstance, TimedVariableMap, bmc_formula, build_ts, encode)
from imcaug.interpolation import InterpolationError, certify, derive

from test_sat import brute_force_sat, random_cnf


def raw(clauses, labels, n=None):
    n = n or max((abs(l) for c in clauses for l in c), default=0)
    return CnfInstance(n, [tuple(c) for c in clauses], list(labels), [""] * len(clauses))


def _derive_raw(cnf):
    r = sat.solve(cnf)
    assert r.unsat
    return derive(r.proof, cnf)


def test_unit_pair():
    cnf = raw([(1,), (-1,)], ["A", "B"])
    it = _derive_raw(cnf)
    assert certify(it, cnf)
    assert F.free_names(it.formula) == {"v1"}
    for a in (False, True):
        assert F.evaluate(it.formula, {"v1": a}) == a


def test_a_side_unsat_alone():
    cnf = raw([(1,), (-1,), (2,), (-2, 1)], ["A", "A", "B", "B"])
    it = _derive_raw(cnf)
    assert certify(it, cnf)
    assert certify(F.FALSE, cnf)
    assert F.evaluate(it.formula, {"v1": True, "v2": True}) is False


def test_true_is_not_an_interpolant_when_b_is_sat_with_it():
    cnf = raw([(1,), (-1, 2), (-2,)], ["A", "A", "B"])
    assert not certify(F.TRUE, cnf)
    assert certify(_derive_raw(cnf), cnf)


def test_vocabulary_violation_is_rejected():
    cnf = raw([(1, 3), (-3, 1), (-1,)], ["A", "A", "B"])
    # v3 is local to A
    assert not certify(F.bvar("v3"), cnf)


def test_malformed_proof_is_a_hard_error():
    cnf = raw([(1,), (-1,)], ["A", "B"])
    proof = sat.solve(cnf).proof
    broken = sat.ProofLog(proof.num_inputs, {i: (1, 2) for i in proof.leaves}, proof.labels,
                          proof.nodes, proof.root)
    with pytest.raises(InterpolationError):
        derive(broken, cnf)


def _check_by_enumeration(it, cnf, shared):
    """A => itp and itp & B unsat, checked over every assignment of the
    shared variables by brute force on each side."""
    a_part = cnf.part("A")
    b_part = cnf.part("B")
    for bits in itertools.product((False, True), repeat=len(shared)):
        env = {f"v{v}": b for v, b in zip(shared, bits)}
        units = [(v,) if b else (-v,) for v, b in zip(shared, bits)]
        if F.evaluate(it.formula, env):
            assert not _side_sat(b_part + units)
        else:
            assert not _side_sat(a_part + units)


def _side_sat(clauses):
    """Enumeration over just the variables the clauses mention."""
    vs = sorted({abs(l) for c in clauses for l in c})
    ren = {v: j + 1 for j, v in enumerate(vs)}
    compact = [tuple(ren[abs(l)] * (1 if l > 0 else -1) for l in c) for c in clauses]
    return brute_force_sat(len(vs), compact)


def _partitioned_corpus(count, seed):
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        a = [tuple(l for l in c) for c in random_cnf(rng, 13, 40)]
        b = [tuple((abs(l) + 7) * (1 if l > 0 else -1) for l in c) for c in random_cnf(rng, 13, 40)]
        clauses = a + b
        if brute_force_sat(20, clauses):
            continue
        out.append(raw(clauses, ["A"] * len(a) + ["B"] * len(b), n=20))
    return out


def test_two_hundred_random_partitioned_instances():
    for cnf in _partitioned_corpus(200, seed=11):
        it = _derive_raw(cnf)
        assert certify(it, cnf)
        a, b = itp_mod.partition_vars(cnf)
        names = F.free_names(it.formula)
        assert names <= {f"v{v}" for v in a & b}


def test_random_interpolants_by_enumeration():
    for cnf in _partitioned_corpus(25, seed=5):
        it = _derive_raw(cnf)
        a, b = itp_mod.partition_vars(cnf)
        _check_by_enumeration(it, cnf, sorted(a & b))


@pytest.fixture
def even4(even):
    return build_ts(even.with_width(4))


def _first_itp(ts, k=1):
    tvm = TimedVariableMap(ts, k)
    cnf = bmc_formula(ts, ts.init, k, tvm)
    r = sat.solve(cnf)
    assert r.unsat
    return derive(r.proof, cnf, tvm, source_k=k, index=1), cnf


def test_even_first_interpolant(even_ts):
    it, cnf = _first_itp(even_ts)
    assert certify(it, cnf)
    assert F.free_names(it.formula) <= {"x", "i"}
    assert F.evaluate(it.formula, {"x": 2, "i": 1})
    assert it.source_k == 1 and it.index == 1 and not it.strengthened


@pytest.mark.parametrize("k", [1, 2, 3])
def test_even_interpolant_by_enumeration_w4(even4, k):
    """Contains the image of the initial state; no state in it reaches an
    error within k - 1 further steps (checked on the concrete semantics)."""
    from imcaug import lang, oracle

    p = even4.program
    it, cnf = _first_itp(even4, k)
    assert certify(it, cnf)
    s0 = p.initial_state
    for nd in oracle.nondet_choices(p):
        nxt = lang.step(p, s0, nd) if lang.loop_continues(p, s0, nd) else s0
        assert F.evaluate(it.formula, nxt)

    def reaches_error(s, depth):
        for nd in oracle.nondet_choices(p):
            if not lang.loop_continues(p, s, nd):
                if not lang.check_post(p, s):
                    return True
            elif depth and reaches_error(lang.step(p, s, nd), depth - 1):
                return True
        return False

    for x, i in itertools.product(range(16), repeat=2):
        s = {"x": x, "i": i}
        if F.evaluate(it.formula, s):
            assert not reaches_error(s, k - 1)


def test_renaming_lemma(even4):
    """The lifted interpolant means the same thing at every time index."""
    it, _ = _first_itp(even4, 2)
    tvm = TimedVariableMap(even4, 2)
    for t in (0, 1, 2):
        for x, i in itertools.product(range(16), repeat=2):
            cnf = CnfInstance(tvm.num_vars, tvm=tvm)
            encode(cnf, it.formula, tvm.env(t), "A", "interpolant")
            encode(cnf, even4.state_formula({"x": x, "i": i}), tvm.env(t), "A", "state")
            assert sat.solve(cnf).sat == F.evaluate(it.formula, {"x": x, "i": i})


def test_strengthen(even_ts):
    it, cnf = _first_itp(even_ts)
    top = itp_mod.strengthen(it, F.TRUE)
    assert top.formula is it.formula and top.strengthened
    inv = F.ule(F.var("i", 8), F.const(1, 8))
    s = itp_mod.strengthen(it, inv)
    assert s.formula is F.mk_and(inv, it.formula)
    assert certify(s, cnf)
