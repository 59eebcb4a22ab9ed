import random

import pytest

from uptoind.lts import disjoint_union, parse_aut

L1_TEXT = 'des (0,4,5)\n(0,"a",1)\n(1,"b",2)\n(0,"a",3)\n(3,"c",4)\n'
L2_TEXT = 'des (0,3,4)\n(0,"a",1)\n(1,"b",2)\n(1,"c",3)\n'


@pytest.fixture
def l1():
    return parse_aut(L1_TEXT)


@pytest.fixture
def l2():
    return parse_aut(L2_TEXT)


@pytest.fixture
def classic(l1, l2):
    """L1 (a.b + a.c) beside L2 (a.(b + c)); returns (lts, s, t) with s/t mapping local indices."""
    lts, off = disjoint_union(l1, l2)
    return lts, (lambda i: i), (lambda i: i + off)


@pytest.fixture
def rng():
    return random.Random(1234)


def pytest_terminal_summary(terminalreporter):
    from .test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
