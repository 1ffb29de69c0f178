import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from imcaug import gen, lang, oracle
from imcaug.lang import ParseError


def test_parse_even(even):
    assert even.names == ["x", "i"]
    assert even.width == 8
    assert len(even.post_assertions) == 1
    assert even.initial_state == {"x": 0, "i": 0}
    assert isinstance(even.loop_condition, lang.BoolNondet)


def test_parse_identity(identity):
    assert identity.loop_body == (lang.Assign("x", lang.Var("x")),)


@pytest.mark.parametrize("src, needle", [
    ("var x:8 = 0; while (nondet()) { y = 1; }", "undeclared variable"),
    ("var x:8 = 0; while (x < 3) { x = x + z; }", "undeclared variable"),
    ("var x:8 = 0; while (true) { while (true) { x = 1; } }", "nested loop"),
    ("var x:8 = 0; while (true) { x = 1; } while (true) { x = 2; }", "multiple loops"),
    ("var x:4 = 16; while (true) { x = 1; }", "does not fit"),
    ("var x:4 = 0; while (true) { x = x + 20; }", "does not fit"),
    ("var x:4 = 0; var y:8 = 0; while (true) { x = 1; }", "width"),
    ("var x:8 = 0; while (true) { x = 1 }", "expected"),
    ("var x:8 = 0; var x:8 = 1; while (true) { x = 1; }", "declared twice"),
    ("var x:8 = 0; while (true) { x = 1; } assert (x == nondet());", "nondet"),
])
def test_parse_errors(src, needle):
    with pytest.raises(ParseError) as exc:
        lang.parse(src)
    assert needle in str(exc.value)


def test_parse_error_position():
    with pytest.raises(ParseError) as exc:
        lang.parse("var x:8 = 0;\nwhile (nondet()) {\n  y = 1;\n}\n")
    assert exc.value.line == 3


def test_comments_are_ignored():
    p = lang.parse("// header\nvar x:8 = 0; // init\nwhile (nondet()) { x = x + 1; }\n")
    assert p.names == ["x"]


def test_step_even(even):
    assert lang.step(even, {"x": 0, "i": 0}, {0: 1}) == {"x": 2, "i": 1}
    # i == 3 adds one more to x; i + 1 = 4 is not reset
    assert lang.step(even, {"x": 0, "i": 3}, {0: 1}) == {"x": 3, "i": 4}
    assert lang.step(even, {"x": 0, "i": 1}, {0: 1}) == {"x": 2, "i": 0}


def test_step_identity(identity):
    for x in (0, 7, 255):
        assert lang.step(identity, {"x": x}, {0: 1}) == {"x": x}


def test_step_wraps_and_divides_by_zero():
    p = lang.parse("var x:4 = 0; var y:4 = 0; while (true) { x = x - 1; y = 9 / y; x = x % y; }")
    assert lang.step(p, {"x": 0, "y": 0}, {}) == {"x": 0, "y": 15}
    p = lang.parse("var x:4 = 0; var y:4 = 0; while (true) { x = 9 % y; y = x * 3; }")
    assert lang.step(p, {"x": 0, "y": 0}, {}) == {"x": 9, "y": 11}


def test_check_post(even):
    assert lang.check_post(even, {"x": 2, "i": 1})
    assert not lang.check_post(even, {"x": 3, "i": 0})
    taut = lang.parse("var x:8 = 5; while (nondet()) { x = x + 1; } assert (0 == 0);")
    assert all(lang.check_post(taut, {"x": v}) for v in range(256))


def test_replay_examples(even, even_bad):
    assert lang.replay(even_bad, [({"x": 0, "i": 0}, {0: 0})])
    assert not lang.replay(even, [({"x": 0, "i": 0}, {0: 1}), ({"x": 2, "i": 1}, {0: 0})])
    assert not lang.replay(even_bad, [])
    # wrong initial state
    assert not lang.replay(even_bad, [({"x": 2, "i": 0}, {0: 0})])
    # the loop continues at the last entry
    assert not lang.replay(even_bad, [({"x": 0, "i": 0}, {0: 1})])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 255), st.integers(0, 255))
def test_step_is_deterministic_and_in_range(seed, a, b):
    p = gen.random_program(seed).with_width(8)
    s = dict(zip(p.names, (a, b, a ^ b)))
    nd = {i: (a + i) % 2 if k == "bool" else (b * (i + 1)) % 256 for i, k in enumerate(p.nondet_kinds)}
    t1 = lang.step(p, s, nd)
    t2 = lang.step(p, s, nd)
    assert t1 == t2
    assert all(0 <= v < 256 for v in t1.values())


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_pretty_round_trip(seed):
    p = gen.random_program(seed)
    assert lang.parse(lang.pretty(p)) == p


def test_pretty_round_trip_even(even):
    assert lang.parse(lang.pretty(even)) == even


def _small_programs():
    cfg = gen.GenConfig(max_vars=2)
    out = []
    for seed in range(400):
        p = gen.random_program(seed, cfg)
        # keep the exhaustive pair enumeration small
        if len(p.names) <= 2 and len(oracle.nondet_choices(p)) <= 32:
            out.append(p)
        if len(out) == 12:
            break
    return out


@pytest.mark.parametrize("p", _small_programs(), ids=lambda p: "|".join(lang.pretty(p).split("\n")[:1]))
def test_replay_agrees_with_oracle_transitions(p):
    """Exhaustive over traces with at most one iteration: replay accepts a
    trace iff the oracle's vectorized relation does."""
    choices = oracle.nondet_choices(p)
    N = oracle._choice_arrays(p, choices)
    init = oracle.pack(p, p.initial_state)
    succ, cont, bad = oracle._expand(p, np.array([init], dtype=np.uint64), N)
    s0 = p.initial_state
    for c, nd in enumerate(choices):
        assert lang.replay(p, [(s0, nd)]) == bool(bad[0, c])
    nstates = 1 << (p.width * len(p.names))
    all_codes = np.arange(nstates, dtype=np.uint64)
    _, _, bad_all = oracle._expand(p, all_codes, N)
    for c, nd in enumerate(choices):
        for code in range(nstates):
            t = oracle.unpack(p, code)
            for c2, nd2 in enumerate(choices):
                want = bool(cont[0, c]) and int(succ[0, c]) == code and bool(bad_all[code, c2])
                assert lang.replay(p, [(s0, nd), (t, nd2)]) == want


def test_count_statements(even):
    assert lang.count_statements(even.loop_body) == 6
