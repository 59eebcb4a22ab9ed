"""Finite labelled transition systems and the Aldebaran ``.aut`` format."""

from __future__ import annotations

import re
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np


class AutParseError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class Lts:
    """An immutable finite LTS over integer states ``0 .. state_count-1``.

    Actions are interned strings; ``alphabet[i]`` is the label of action ``i``.
    ``transitions`` maps ``(state, action)`` to the successors of ``state``.
    """

    __slots__ = ("alphabet", "state_count", "initial", "state_names", "_succ", "_enabled", "_action_index", "_adj")

    def __init__(
        self,
        alphabet: Sequence[str],
        state_count: int,
        transitions: Mapping[tuple[int, int], Iterable[int]] | Iterable[tuple[int, int, int]] = (),
        initial: int | None = None,
        state_names: Sequence[str] | None = None,
    ):
        alphabet = tuple(alphabet)
        if len(set(alphabet)) != len(alphabet):
            raise ValueError("duplicate action labels in alphabet")
        if state_count < 0:
            raise ValueError("negative state count")
        if initial is not None and not 0 <= initial < state_count:
            raise ValueError(f"initial state {initial} out of range")
        if state_names is not None:
            state_names = tuple(state_names)
            if len(state_names) != state_count:
                raise ValueError("state_names length differs from state_count")

        succ = [[set() for _ in alphabet] for _ in range(state_count)]
        if isinstance(transitions, Mapping):
            triples = ((p, a, q) for (p, a), qs in transitions.items() for q in qs)
        else:
            triples = transitions
        for p, a, q in triples:
            if not (0 <= p < state_count and 0 <= q < state_count):
                raise ValueError(f"transition ({p},{a},{q}) has an invalid state")
            if not 0 <= a < len(alphabet):
                raise ValueError(f"transition ({p},{a},{q}) has an invalid action")
            succ[p][a].add(q)

        self.alphabet = alphabet
        self.state_count = state_count
        self.initial = initial
        self.state_names = state_names
        self._succ = tuple(tuple(tuple(sorted(qs)) for qs in row) for row in succ)
        self._enabled = tuple(frozenset(a for a, qs in enumerate(row) if qs) for row in self._succ)
        self._action_index = {label: i for i, label in enumerate(alphabet)}

    def __setattr__(self, name, value):
        if hasattr(self, "_action_index"):
            raise AttributeError("Lts is immutable")
        object.__setattr__(self, name, value)

    def __eq__(self, other):
        if not isinstance(other, Lts):
            return NotImplemented
        return (
            self.alphabet == other.alphabet
            and self.state_count == other.state_count
            and self.initial == other.initial
            and self.state_names == other.state_names
            and self._succ == other._succ
        )

    def __hash__(self):
        return hash((self.alphabet, self.state_count, self.initial, self._succ))

    def __repr__(self):
        return f"Lts(states={self.state_count}, alphabet={list(self.alphabet)}, transitions={self.transition_count})"

    @property
    def states(self) -> range:
        return range(self.state_count)

    @property
    def actions(self) -> range:
        return range(len(self.alphabet))

    @property
    def transition_count(self) -> int:
        return sum(len(qs) for row in self._succ for qs in row)

    @property
    def transitions(self) -> dict[tuple[int, int], tuple[int, ...]]:
        return {(p, a): qs for p, row in enumerate(self._succ) for a, qs in enumerate(row) if qs}

    def triples(self) -> Iterator[tuple[int, int, int]]:
        for p, row in enumerate(self._succ):
            for a, qs in enumerate(row):
                for q in qs:
                    yield p, a, q

    def action(self, label: str) -> int:
        try:
            return self._action_index[label]
        except KeyError:
            raise KeyError(f"unknown action label {label!r}") from None

    def state_name(self, p: int) -> str:
        return self.state_names[p] if self.state_names is not None else str(p)

    def successors(self, p: int, mu: int) -> tuple[int, ...]:
        return self._succ[p][mu]

    def enabled(self, p: int) -> frozenset[int]:
        return self._enabled[p]

    def refuses(self, p: int, mu: int) -> bool:
        return not self._succ[p][mu]

    def out_degree(self, p: int) -> int:
        return sum(len(qs) for qs in self._succ[p])

    def max_out_degree(self) -> int:
        return max((self.out_degree(p) for p in self.states), default=0)

    def post(self, states: Iterable[int], mu: int) -> frozenset[int]:
        return frozenset(q for p in states for q in self._succ[p][mu])

    def adjacency(self, mu: int) -> np.ndarray:
        """Read-only boolean matrix ``M`` with ``M[p, q]`` iff ``p -mu-> q``."""
        return self.adjacencies()[mu]

    def adjacencies(self) -> np.ndarray:
        """All adjacency matrices stacked by action, computed once."""
        try:
            return self._adj
        except AttributeError:
            pass
        n = self.state_count
        adj = np.zeros((len(self.alphabet), n, n), dtype=bool)
        for p, row in enumerate(self._succ):
            for mu, qs in enumerate(row):
                adj[mu, p, list(qs)] = True
        adj.setflags(write=False)
        object.__setattr__(self, "_adj", adj)
        return adj


def successors(lts: Lts, p: int, mu: int) -> frozenset[int]:
    return frozenset(lts.successors(p, mu))


def enabled(lts: Lts, p: int) -> frozenset[int]:
    return lts.enabled(p)


def refuses(lts: Lts, p: int, mu: int) -> bool:
    return lts.refuses(p, mu)


def disjoint_union(l1: Lts, l2: Lts) -> tuple[Lts, int]:
    """Place ``l2`` beside ``l1``; states of ``l2`` are shifted by the returned offset."""
    offset = l1.state_count
    alphabet = list(l1.alphabet) + [a for a in l2.alphabet if a not in l1._action_index]
    index = {label: i for i, label in enumerate(alphabet)}
    triples = list(l1.triples())
    triples += [(p + offset, index[l2.alphabet[a]], q + offset) for p, a, q in l2.triples()]
    names = None
    if l1.state_names is not None or l2.state_names is not None:
        names = [l1.state_name(p) for p in l1.states] + [l2.state_name(p) for p in l2.states]
        if len(set(names)) != len(names):
            names = None
    initial = l1.initial if l1.initial is not None else (None if l2.initial is None else l2.initial + offset)
    return Lts(alphabet, offset + l2.state_count, triples, initial=initial, state_names=names), offset


_HEADER = re.compile(r"^\s*des\s*\(\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*\)\s*$")
_EDGE = re.compile(r'^\s*\(\s*(\d+)\s*,\s*(?:"((?:[^"\\]|\\.)*)"|([^",()]*[^",()\s]))\s*,\s*(\d+)\s*\)\s*$')


def parse_aut(text: str) -> Lts:
    lines = text.splitlines()
    numbered = [(i + 1, ln) for i, ln in enumerate(lines) if ln.strip()]
    if not numbered:
        raise AutParseError("missing 'des' header", 1)
    lineno, header = numbered[0]
    m = _HEADER.match(header)
    if not m:
        raise AutParseError(f"malformed header {header.strip()!r}", lineno)
    init, n_trans, n_states = (int(g) for g in m.groups())
    if n_states == 0 or init >= n_states:
        raise AutParseError(f"initial state {init} not below declared state count {n_states}", lineno)

    alphabet: list[str] = []
    index: dict[str, int] = {}
    triples = []
    for lineno, line in numbered[1:]:
        m = _EDGE.match(line)
        if not m:
            raise AutParseError(f"malformed transition {line.strip()!r}", lineno)
        src, quoted, bare, dst = m.groups()
        label = quoted if quoted is not None else bare
        src, dst = int(src), int(dst)
        for s in (src, dst):
            if s >= n_states:
                raise AutParseError(f"state {s} >= declared state count {n_states}", lineno)
        if label not in index:
            index[label] = len(alphabet)
            alphabet.append(label)
        triples.append((src, index[label], dst))
    if len(triples) != n_trans:
        raise AutParseError(
            f"header declares {n_trans} transitions but {len(triples)} were given", numbered[-1][0]
        )
    # duplicates are legal in the file but collapse in the model
    return Lts(alphabet, n_states, triples, initial=init)


def serialize_aut(lts: Lts) -> str:
    """Emit an ``.aut`` file; transitions are ordered by action so labels re-intern in the same order."""
    triples = sorted(lts.triples(), key=lambda t: (t[1], t[0], t[2]))
    init = lts.initial if lts.initial is not None else 0
    out = [f"des ({init},{len(triples)},{max(lts.state_count, 1)})"]
    out += [f'({p},"{lts.alphabet[a]}",{q})' for p, a, q in triples]
    return "\n".join(out) + "\n"
