import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uptoind.gen import random_lts
from uptoind.observables import (
    TT,
    Atom,
    Conj,
    Diamond,
    FormulaSyntaxError,
    canonical,
    diamonds,
    downward_close,
    format_formula,
    parse_formula,
    parse_obs_file,
    ready,
    ref,
    sat,
    sat_n,
    weight,
    witness_path,
)

from .oracles import holds

AB_AND_AC = Diamond("a", Conj((diamonds("b"), diamonds("c"))))


def test_sat_examples(l1, l2):
    assert sat(l2, 0, AB_AND_AC) and holds(l2, 0, AB_AND_AC)
    assert not sat(l1, 0, AB_AND_AC) and not holds(l1, 0, AB_AND_AC)
    for p in l1.states:
        assert sat(l1, p, TT)


def test_unknown_label_rejected(l1):
    with pytest.raises(KeyError):
        sat(l1, 0, diamonds("z"))


@pytest.mark.parametrize(
    "theta, w",
    [(diamonds("ab"), 2), (ref("b"), 0), (Diamond("a", Conj((ref("b"), diamonds("c")))), 2), (TT, 0)],
)
def test_weight(theta, w):
    assert weight(theta) == w


def test_sat_n(l1):
    ab = diamonds("ab")
    assert sat_n(l1, 0, ab, 2)
    assert not sat_n(l1, 0, ab, 1)
    assert sat_n(l1, 0, TT, 0)
    assert not sat_n(l1, 0, diamonds("a"), 0)


def test_parse_examples():
    assert parse_formula("<a><b>tt") == Diamond("a", Diamond("b", TT))
    assert parse_formula("ref(a)") == Atom(frozenset(), frozenset({"a"}))
    assert parse_formula("and(<a>tt, ref(b))") == Conj((Diamond("a", TT), Atom(frozenset(), frozenset({"b"}))))


def test_parse_sets_and_ready():
    assert parse_formula("ref({a, b})") == Atom(frozenset(), frozenset("ab"))
    assert parse_formula("ready({a})", ["a", "b"]) == ready("a", "ab")
    assert parse_formula("loc({a};{b})") == Atom(frozenset("a"), frozenset("b"))
    with pytest.raises(FormulaSyntaxError):
        parse_formula("ready({a})")


@pytest.mark.parametrize("text", ["<a>", "and(tt,", "<a>tt tt", "foo", "loc({a};{a})"])
def test_parse_errors(text):
    with pytest.raises((FormulaSyntaxError, ValueError)):
        parse_formula(text)


def test_parse_unknown_label():
    with pytest.raises(KeyError):
        parse_formula("<z>tt", ["a"])


def test_obs_file():
    text = "# header\n<a>tt  # trailing\n\nref(b)\n"
    assert parse_obs_file(text) == [diamonds("a"), ref("b")]


def test_downward_close():
    ab = diamonds("ab")
    assert downward_close({ab}) == {ab, diamonds("b"), TT}
    assert downward_close({TT}) == {TT}
    c = Conj((diamonds("a"), ref("b")))
    assert downward_close({c}) == {c, diamonds("a"), ref("b"), TT}


def test_canonical_flattens_and_sorts():
    a, b = diamonds("a"), ref("b")
    assert canonical(Conj((Conj((b, a)), a))) == canonical(Conj((a, b)))
    assert canonical(Conj((a,))) == a


def test_witness_path(l1):
    assert witness_path(l1, 0, diamonds("ab")) == [("a", 1), ("b", 2)]
    assert witness_path(l1, 2, diamonds("a")) is None


def random_formula(r: random.Random, labels: str, depth: int):
    roll = r.random()
    if depth == 0 or roll < 0.2:
        return r.choice([TT, ref(r.choice(labels)), Atom(frozenset(r.sample(labels, 1)), frozenset())])
    if roll < 0.7:
        return Diamond(r.choice(labels), random_formula(r, labels, depth - 1))
    return Conj(tuple(random_formula(r, labels, depth - 1) for _ in range(r.randint(0, 3))))


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**9))
def test_sat_agrees_with_rule_oracle(seed):
    r = random.Random(seed)
    lts = random_lts(r, max_states=5, max_actions=3)
    labels = "".join(lts.alphabet) or "a"
    theta = random_formula(r, labels, 3)
    if not set(labels) <= set(lts.alphabet):
        return
    for p in lts.states:
        assert sat(lts, p, theta) == holds(lts, p, theta)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**9), st.integers(0, 5))
def test_sat_n_monotone_and_measurable(seed, n):
    r = random.Random(seed)
    lts = random_lts(r, max_states=5, max_actions=3, min_states=1)
    if not lts.alphabet:
        return
    theta = random_formula(r, "".join(lts.alphabet), 3)
    for p in lts.states:
        if sat_n(lts, p, theta, n):
            assert sat(lts, p, theta)
            assert all(sat_n(lts, p, theta, m) for m in range(n, n + 3))
        if sat(lts, p, theta):
            assert sat_n(lts, p, theta, weight(theta))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**9))
def test_format_parse_roundtrip(seed):
    r = random.Random(seed)
    theta = random_formula(r, "abc", 4)
    assert parse_formula(format_formula(theta)) == theta
