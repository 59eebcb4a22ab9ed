import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uptoind.gen import random_lts
from uptoind.lts import Lts, disjoint_union, parse_aut
from uptoind.observables import TT, Conj, Diamond, canonical, diamonds, extension, parse_formula, ref, sat_n, weight
from uptoind.relation import Relation
from uptoind.spectrum import (
    EnumerationCapExceeded,
    FamilyKind,
    ObsFamily,
    PowersetCapExceeded,
    approximant,
    approximant_chain,
    compliance_matrix,
    compliant,
    distinguishing_observable,
    enumerate_family,
    family_member,
    oracle_approximant,
    oracle_extensions,
    preorder,
    stabilization_index,
    verify_distinction,
)

from .oracles import failure_related, naive_simulation, trace_related

FAMILIES = list(FamilyKind)


def fam(kind, alphabet="abc"):
    return ObsFamily(FamilyKind.parse(kind), tuple(alphabet))


def test_family_membership():
    assert family_member(fam("trace"), diamonds("ab"))
    assert not family_member(fam("trace"), Conj((diamonds("a"), diamonds("b"))))
    assert family_member(fam("failure"), Diamond("a", ref("c")))
    assert family_member(fam("simulation"), Diamond("a", Conj((diamonds("b"), diamonds("c")))))
    assert not family_member(fam("simulation"), ref("a"))


def test_failure_trace_membership():
    ft = fam("failure-trace")
    assert family_member(ft, Conj((ref("b"), Diamond("a", ref("c")))))
    assert not family_member(ft, Conj((diamonds("a"), diamonds("b"))))
    assert not family_member(fam("failure"), Conj((ref("b"), Diamond("a", ref("c")))))


def test_enumeration_counts():
    assert set(enumerate_family(fam("trace", "a"), 2)) == {TT, diamonds("a"), diamonds("aa")}
    assert set(enumerate_family(fam("trace", "ab"), 1)) == {TT, diamonds("a"), diamonds("b")}
    assert set(enumerate_family(fam("failure", "a"), 0, max_conj_width=1)) == {TT, ref("a")}


def test_enumeration_is_duplicate_free_and_members():
    for kind in FAMILIES:
        f = fam(kind, "ab")
        out = list(enumerate_family(f, 2))
        assert len(out) == len({canonical(t) for t in out})
        assert all(family_member(f, t) and weight(t) <= 2 for t in out)


def test_enumeration_cap():
    with pytest.raises(EnumerationCapExceeded):
        list(enumerate_family(fam("simulation", "abc"), 3, cap=100))


def test_approximant_zero(classic):
    lts, _, _ = classic
    for kind in FAMILIES:
        x0 = approximant(lts, kind, 0)
        if kind.atoms is None:
            assert x0 == Relation.full(lts.state_count)
        else:
            # weight-0 atoms already separate states
            assert x0 == Relation(compliance_matrix(lts, kind))
            assert x0 != Relation.full(lts.state_count)


def test_chain_starts_at_top(classic):
    lts, _, _ = classic
    for kind in FAMILIES:
        c = approximant_chain(lts, kind)
        assert c[0] == Relation.full(lts.state_count)
        shift = 0 if kind.atoms is None else 1
        assert c[shift + 2] == approximant(lts, kind, 2)


def test_classic_approximants(classic):
    lts, s, t = classic
    tr = approximant(lts, "trace", 3)
    assert (s(0), t(0)) in tr and (t(0), s(0)) in tr
    fl = approximant(lts, "failure", 1)
    assert (t(0), s(0)) in fl and (s(0), t(0)) not in fl


def test_classic_preorders(classic):
    lts, s, t = classic
    sim = preorder(lts, "simulation")
    assert (s(0), t(0)) in sim and (t(0), s(0)) not in sim
    fl = preorder(lts, "failure")
    assert (t(0), s(0)) in fl and (s(0), t(0)) not in fl
    assert sim.matrix.tolist() == Relation.from_pairs(lts.state_count, naive_simulation(lts)).matrix.tolist()


@pytest.mark.parametrize("kind", FAMILIES)
def test_preorder_laws(classic, kind):
    lts, _, _ = classic
    p = preorder(lts, kind)
    assert p.is_reflexive() and p.is_transitive()


def test_distinguishing_observable(classic):
    lts, s, t = classic
    w = distinguishing_observable(lts, s(0), t(0), "failure", 1)
    assert w in (Diamond("a", ref("b")), Diamond("a", ref("c")))
    assert verify_distinction(lts, s(0), t(0), w, 1)
    assert distinguishing_observable(lts, s(0), t(0), "trace", 3) is None
    for kind in FAMILIES:
        assert distinguishing_observable(lts, 2, 2, kind, 3) is None


def test_compliance(classic):
    lts, s, t = classic
    n = lts.state_count
    r = Relation.from_pairs(n, [(s(0), t(0)), (s(1), t(1))])
    assert compliant(lts, r, "trace") is None
    p, q, atom = compliant(lts, Relation.from_pairs(n, [(s(1), t(1))]), "failure")
    assert (p, q, atom) == (s(1), t(1), ref("c"))
    assert compliant(lts, Relation.from_pairs(n, [(t(1), s(1))]), "failure") is None


def test_refusal_sets_need_no_extra_width():
    # P -a-> deadlock versus Q -a-> three states enabling only a, only b, only c.
    # Distinguishing them needs "after a, refuse all of a, b and c", which would
    # take a width-3 conjunction of single refusals.
    lts = Lts(
        ("a", "b", "c"),
        6,
        [(0, 0, 1), (2, 0, 3), (2, 0, 4), (2, 0, 5), (3, 0, 1), (4, 1, 1), (5, 2, 1)],
    )
    assert (0, 2) not in preorder(lts, "failure")
    assert (0, 2) not in oracle_approximant(lts, "failure", 1)
    w = distinguishing_observable(lts, 0, 2, "failure", 1)
    assert verify_distinction(lts, 0, 2, w, 1)
    assert w == parse_formula("<a>ref({a,b,c})")


def test_chain_and_stabilization(classic):
    lts, _, _ = classic
    for kind in FAMILIES:
        k = stabilization_index(lts, kind)
        assert approximant(lts, kind, k) == preorder(lts, kind) == approximant(lts, kind, k + 3)
        if k:
            assert approximant(lts, kind, k - 1) != preorder(lts, kind)


def test_powerset_cap():
    # a nondeterministic a-chain whose subset construction has many macro-states
    n = 14
    triples = [(p, 0, q) for p in range(n) for q in range(n) if (q - p) % n in (1, 3)]
    triples += [(p, 1, p) for p in range(0, n, 2)]
    lts = Lts(("a", "b"), n, triples)
    with pytest.raises(PowersetCapExceeded):
        preorder(lts, "failure", cap=4)


def test_spectrum_inclusions():
    rng = random.Random(7)
    for _ in range(60):
        lts = random_lts(rng)
        pre = {k: preorder(lts, k) for k in FAMILIES}
        assert pre[FamilyKind.READY_TRACE] <= pre[FamilyKind.FAILURE_TRACE] <= pre[FamilyKind.FAILURE]
        assert pre[FamilyKind.READY_TRACE] <= pre[FamilyKind.READY] <= pre[FamilyKind.FAILURE]
        assert pre[FamilyKind.FAILURE] <= pre[FamilyKind.TRACE]
        assert pre[FamilyKind.SIMULATION] <= pre[FamilyKind.TRACE]


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**9))
def test_linear_approximants_match_language_oracles(seed):
    lts = random_lts(random.Random(seed), max_states=4, max_actions=2)
    for n in range(4):
        tr, fl = approximant(lts, "trace", n), approximant(lts, "failure", n)
        for p in lts.states:
            for q in lts.states:
                assert ((p, q) in tr) == trace_related(lts, p, q, n)
                assert ((p, q) in fl) == failure_related(lts, p, q, n)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**9))
def test_simulation_preorder_matches_naive(seed):
    lts = random_lts(random.Random(seed))
    expected = Relation.from_pairs(lts.state_count, naive_simulation(lts))
    assert preorder(lts, "simulation") == expected


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9), st.sampled_from(FAMILIES))
def test_enumeration_stream_agrees_with_oracle(seed, kind):
    lts = random_lts(random.Random(seed), max_states=3, max_actions=2)
    f = ObsFamily(kind, lts.alphabet)
    width = 2 if kind.atoms else max(lts.max_out_degree(), 1)
    for n in range(3):
        masks = set()
        for theta in enumerate_family(f, n, width):
            ext = extension(lts, theta)
            masks.add(sum(1 << p for p in ext))
        assert masks == set(oracle_extensions(lts, f, n, width))


def test_sat_n_against_approximant(classic):
    lts, s, t = classic
    f = ObsFamily(FamilyKind.FAILURE, lts.alphabet)
    theta = Diamond("a", ref("c"))
    assert sat_n(lts, s(0), theta, 1) and not sat_n(lts, t(0), theta, 1)
    assert (s(0), t(0)) not in approximant(lts, f, 1)


def test_simulation_across_copies():
    one = parse_aut('des (0,1,2)\n(0,"a",1)\n')
    lts, off = disjoint_union(one, one)
    cross = preorder(lts, "simulation").matrix[:off, off:]
    assert np.array_equal(cross, np.array([[True, False], [True, True]]))
