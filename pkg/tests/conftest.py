import os

import pytest

from imcaug import lang
from imcaug.encoder import build_ts

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
PROGRAMS = os.path.join(ROOT, "programs")

EVEN_SRC = open(os.path.join(PROGRAMS, "even.slp")).read()
EVEN_BAD_SRC = open(os.path.join(PROGRAMS, "even-bad.slp")).read()
IDENTITY_SRC = "var x:8 = 0; while (nondet()) { x = x; } assert (x == 0);"


@pytest.fixture
def even():
    return lang.parse(EVEN_SRC)


@pytest.fixture
def even_bad():
    return lang.parse(EVEN_BAD_SRC)


@pytest.fixture
def even_ts(even):
    return build_ts(even)


@pytest.fixture
def identity():
    return lang.parse(IDENTITY_SRC)


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
