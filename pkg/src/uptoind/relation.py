"""Binary relations over the states of one LTS, stored as boolean matrices.

The set of all relations over a fixed state space is the complete lattice the
fixed-point machinery works in: join is union, meet is intersection, bottom is
the empty relation and top the full one.
"""

from __future__ import annotations

from typing import Iterable, Iterator

import numpy as np


class Relation:
    __slots__ = ("matrix",)

    def __init__(self, matrix: np.ndarray):
        matrix = np.array(matrix, dtype=bool, copy=True)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"relation matrix must be square, got shape {matrix.shape}")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    def __setattr__(self, name, value):
        raise AttributeError("Relation is immutable")

    @classmethod
    def empty(cls, size: int) -> Relation:
        return cls(np.zeros((size, size), dtype=bool))

    @classmethod
    def full(cls, size: int) -> Relation:
        return cls(np.ones((size, size), dtype=bool))

    @classmethod
    def identity(cls, size: int) -> Relation:
        return cls(np.eye(size, dtype=bool))

    @classmethod
    def from_pairs(cls, size: int, pairs: Iterable[tuple[int, int]]) -> Relation:
        m = np.zeros((size, size), dtype=bool)
        for p, q in pairs:
            if not (0 <= p < size and 0 <= q < size):
                raise ValueError(f"pair ({p},{q}) outside a {size}-state space")
            m[p, q] = True
        return cls(m)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def __contains__(self, pair) -> bool:
        p, q = pair
        return bool(self.matrix[p, q])

    def __iter__(self) -> Iterator[tuple[int, int]]:
        for p, q in zip(*np.nonzero(self.matrix)):
            yield int(p), int(q)

    def pairs(self) -> list[tuple[int, int]]:
        return list(self)

    def __len__(self) -> int:
        return int(self.matrix.sum())

    def __bool__(self) -> bool:
        return bool(self.matrix.any())

    def __eq__(self, other) -> bool:
        if not isinstance(other, Relation):
            return NotImplemented
        return self.matrix.shape == other.matrix.shape and bool((self.matrix == other.matrix).all())

    def __hash__(self) -> int:
        return hash((self.size, self.matrix.tobytes()))

    def __repr__(self) -> str:
        return f"Relation({self.size}, {self.pairs()})"

    def _check(self, other: Relation) -> None:
        if self.size != other.size:
            raise ValueError(f"relations over different state spaces ({self.size} vs {other.size})")

    def __le__(self, other: Relation) -> bool:
        self._check(other)
        return not bool((self.matrix & ~other.matrix).any())

    def __ge__(self, other: Relation) -> bool:
        return other <= self

    def __lt__(self, other: Relation) -> bool:
        return self <= other and self != other

    def issubset(self, other: Relation) -> bool:
        return self <= other

    def __or__(self, other: Relation) -> Relation:
        self._check(other)
        return Relation(self.matrix | other.matrix)

    def __and__(self, other: Relation) -> Relation:
        self._check(other)
        return Relation(self.matrix & other.matrix)

    def __sub__(self, other: Relation) -> Relation:
        self._check(other)
        return Relation(self.matrix & ~other.matrix)

    def compose(self, other: Relation) -> Relation:
        """Relational composition: ``(p, r)`` whenever ``p self q`` and ``q other r``."""
        self._check(other)
        return Relation(bool_matmul(self.matrix, other.matrix))

    def transpose(self) -> Relation:
        return Relation(self.matrix.T)

    def reflexive_transitive_closure(self) -> Relation:
        return Relation(rt_closure(self.matrix))

    def is_reflexive(self) -> bool:
        return bool(np.diagonal(self.matrix).all())

    def is_transitive(self) -> bool:
        return self.compose(self) <= self

    def first_difference(self, other: Relation) -> tuple[int, int] | None:
        """Some pair of ``self`` missing from ``other``, or None when ``self <= other``."""
        self._check(other)
        diff = np.argwhere(self.matrix & ~other.matrix)
        return (int(diff[0][0]), int(diff[0][1])) if len(diff) else None


def bool_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Boolean matrix product; broadcasts over leading batch dimensions."""
    return np.matmul(a.astype(np.uint16), b.astype(np.uint16)) > 0


def rt_closure(m: np.ndarray) -> np.ndarray:
    """Reflexive-transitive closure by repeated squaring; works on stacks of matrices."""
    n = m.shape[-1]
    closure = m | np.eye(n, dtype=bool)
    while True:
        nxt = bool_matmul(closure, closure)
        if (nxt == closure).all():
            return closure
        closure = nxt


def meet(relations: Iterable[Relation], size: int) -> Relation:
    out = np.ones((size, size), dtype=bool)
    for r in relations:
        out &= r.matrix
    return Relation(out)


def join(relations: Iterable[Relation], size: int) -> Relation:
    out = np.zeros((size, size), dtype=bool)
    for r in relations:
        out |= r.matrix
    return Relation(out)
