import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uptoind.lts import AutParseError, Lts, disjoint_union, enabled, parse_aut, refuses, serialize_aut, successors

from .oracles import bisimulation_classes


def test_minimal_file():
    lts = parse_aut('des (0,1,2)\n(0,"a",1)')
    assert lts.state_count == 2
    assert lts.alphabet == ("a",)
    assert list(lts.triples()) == [(0, 0, 1)]
    assert lts.initial == 0


def test_l1_shape(l1):
    assert l1.state_count == 5
    assert l1.transition_count == 4
    assert l1.alphabet == ("a", "b", "c")


def test_out_of_range_state_reports_line():
    with pytest.raises(AutParseError, match="state 3") as info:
        parse_aut('des (0,2,2)\n(0,"a",3)')
    assert info.value.line == 2


@pytest.mark.parametrize(
    "text, msg",
    [
        ("des 0,1,2\n", "malformed header"),
        ("", "missing"),
        ('des (0,2,2)\n(0,"a",1)', "declares 2 transitions"),
        ('des (0,1,2)\n(0,"a,1)', "malformed transition"),
        ('des (5,0,2)\n', "initial state"),
    ],
)
def test_parse_errors(text, msg):
    with pytest.raises(AutParseError, match=msg):
        parse_aut(text)


def test_unquoted_and_escaped_labels():
    lts = parse_aut('des (0,2,2)\n(0,tau,1)\n(1,"say \\"hi\\"",0)\n')
    assert lts.alphabet == ("tau", 'say \\"hi\\"')
    assert parse_aut(serialize_aut(lts)) == lts


def test_successors(l1, l2):
    a = l1.action("a")
    assert successors(l1, 0, a) == {1, 3}
    assert successors(l1, 2, a) == frozenset()
    assert successors(l2, 1, l2.action("b")) == {2}


def test_enabled(l1, l2):
    assert enabled(l2, 1) == {l2.action("b"), l2.action("c")}
    assert enabled(l1, 2) == frozenset()
    assert enabled(l1, 0) == {l1.action("a")}


def test_refuses(l1, l2):
    assert refuses(l1, 1, l1.action("c"))
    assert not refuses(l1, 1, l1.action("b"))
    assert refuses(l2, 1, l2.action("a"))


def test_union_counts(l1, l2):
    u, off = disjoint_union(l1, l2)
    assert (u.state_count, off) == (9, 5)
    assert u.transition_count == l1.transition_count + l2.transition_count


def test_union_with_empty(l1):
    empty = Lts((), 0)
    u, off = disjoint_union(l1, empty)
    assert off == l1.state_count
    assert u == l1


def test_two_copies_are_bisimilar(l1):
    u, off = disjoint_union(l1, l1)
    blocks = bisimulation_classes(u)
    assert u.state_count == 10
    for i in range(5):
        assert blocks[i] == blocks[i + off]


def test_immutable(l1):
    with pytest.raises(AttributeError):
        l1.state_count = 3


def random_aut(seed: int) -> str:
    from uptoind.gen import random_label

    r = random.Random(seed)
    n = r.randint(1, 6)
    labels = [random_label(r) for _ in range(r.randint(1, 4))]
    lines = []
    for _ in range(r.randint(0, 12)):
        label = r.choice(labels).replace("\\", "\\\\").replace('"', '\\"')
        lines.append(f'({r.randrange(n)},"{label}",{r.randrange(n)})')
    return f"des ({r.randrange(n)},{len(lines)},{n})\n" + "\n".join(lines)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**9))
def test_roundtrip(seed):
    first = parse_aut(random_aut(seed))
    assert parse_aut(serialize_aut(first)) == first


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**9))
def test_enabled_is_complement_of_refuses(seed):
    lts = parse_aut(random_aut(seed))
    for p in lts.states:
        assert lts.enabled(p) == {a for a in lts.actions if not lts.refuses(p, a)}


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**9), st.integers(0, 10**9))
def test_union_shifts_successors(s1, s2):
    a, b = parse_aut(random_aut(s1)), parse_aut(random_aut(s2))
    u, off = disjoint_union(a, b)
    for p in b.states:
        for mu in b.actions:
            shifted = {q + off for q in b.successors(p, mu)}
            assert set(u.successors(p + off, u.action(b.alphabet[mu]))) == shifted
    for p in a.states:
        for mu in a.actions:
            assert u.successors(p, u.action(a.alphabet[mu])) == a.successors(p, mu)
