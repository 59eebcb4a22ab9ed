"""Seeded random generators for LTSs, relations and syntax, used by tests and the CLI."""

from __future__ import annotations

import random
import string

from .lts import Lts
from .relation import Relation

LABELS = tuple("abcd")


def random_lts(
    rng: random.Random,
    max_states: int = 5,
    max_actions: int = 3,
    density: float | None = None,
    min_states: int = 1,
) -> Lts:
    n = rng.randint(min_states, max_states)
    k = rng.randint(1, max_actions)
    alphabet = LABELS[:k]
    if density is None:
        density = rng.choice((0.1, 0.2, 0.3, 0.5))
    triples = [(p, a, q) for p in range(n) for a in range(k) for q in range(n) if rng.random() < density]
    return Lts(alphabet, n, triples, initial=0)


def random_relation(rng: random.Random, size: int, density: float = 0.3) -> Relation:
    return Relation.from_pairs(size, [(p, q) for p in range(size) for q in range(size) if rng.random() < density])


def random_subrelation(rng: random.Random, r: Relation, keep: float = 0.5) -> Relation:
    return Relation.from_pairs(r.size, [pq for pq in r if rng.random() < keep])


def random_label(rng: random.Random) -> str:
    """Action labels, occasionally with characters that need quoting."""
    roll = rng.random()
    if roll < 0.7:
        return rng.choice(LABELS)
    if roll < 0.9:
        return rng.choice(string.ascii_lowercase) + str(rng.randint(0, 9))
    return rng.choice(['a b', 'x"y', "p(q)", "c,d", "t#1", "u\\v"])
