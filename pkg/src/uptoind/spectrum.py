"""Observable families of the linear-time/branching-time spectrum.

Each family comes with two independent ways of computing its weight-indexed
approximants:

* ``approximant`` / ``preorder`` explore the (decorated) trace languages of a
  pair of states with a subset construction, or iterate the simulation
  functional for the branching family;
* ``oracle_approximant`` enumerates formulas of the family up to weight ``n``
  (modulo their extension on the given LTS) and compares satisfaction.
"""

from __future__ import annotations

import enum
import itertools
import os
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .lts import Lts
from .observables import (
    TT,
    Atom,
    Conj,
    Diamond,
    Observable,
    canonical,
    extension,
    sort_key,
)
from .relation import Relation, bool_matmul

DEFAULT_POWERSET_CAP = 4096
INF = np.iinfo(np.int32).max


class FamilyKind(enum.Enum):
    TRACE = "trace"
    FAILURE = "failure"
    READY = "ready"
    FAILURE_TRACE = "failure-trace"
    READY_TRACE = "ready-trace"
    SIMULATION = "simulation"

    @property
    def atoms(self) -> str | None:
        """Which atomic observables the family uses: ``"ref"``, ``"ready"`` or None."""
        if self in (FamilyKind.FAILURE, FamilyKind.FAILURE_TRACE):
            return "ref"
        if self in (FamilyKind.READY, FamilyKind.READY_TRACE):
            return "ready"
        return None

    @classmethod
    def parse(cls, name: str | FamilyKind) -> FamilyKind:
        if isinstance(name, FamilyKind):
            return name
        key = name.strip().lower().replace("_", "-")
        for kind in cls:
            if kind.value == key:
                return kind
        raise ValueError(f"unknown family {name!r}; expected one of {[k.value for k in cls]}")


@dataclass(frozen=True)
class ObsFamily:
    kind: FamilyKind
    alphabet: tuple[str, ...]

    @classmethod
    def of(cls, kind: FamilyKind | str, lts: Lts) -> ObsFamily:
        return cls(FamilyKind.parse(kind), lts.alphabet)

    def ref_atoms(self) -> list[Atom]:
        """Refusal atoms ``ref(B)`` for every non-empty ``B``; smaller sets first."""
        out = []
        for k in range(1, len(self.alphabet) + 1):
            for b in itertools.combinations(self.alphabet, k):
                out.append(Atom(frozenset(), frozenset(b)))
        return out

    def ready_atoms(self) -> list[Atom]:
        out = []
        full = frozenset(self.alphabet)
        for k in range(len(self.alphabet) + 1):
            for x in itertools.combinations(self.alphabet, k):
                out.append(Atom(frozenset(x), full - frozenset(x)))
        return out

    def atoms(self) -> list[Atom]:
        if self.kind.atoms == "ref":
            return self.ref_atoms()
        if self.kind.atoms == "ready":
            return self.ready_atoms()
        return []


FamilyLike = ObsFamily | FamilyKind | str


def as_family(fam: FamilyLike, lts: Lts) -> ObsFamily:
    if isinstance(fam, ObsFamily):
        return fam
    return ObsFamily.of(fam, lts)


class PowersetCapExceeded(RuntimeError):
    """The subset construction needed more macro-states than allowed; no verdict is given."""


def default_cap() -> int:
    return int(os.environ.get("UPTOIND_CAP", DEFAULT_POWERSET_CAP))


# ------------------------------------------------------------------ membership

def _is_ref(theta, fam: ObsFamily) -> bool:
    return isinstance(theta, Atom) and not theta.must and bool(theta.must_not) and theta.must_not <= set(fam.alphabet)


def _is_ready(theta, fam: ObsFamily) -> bool:
    return isinstance(theta, Atom) and theta.must | theta.must_not == set(fam.alphabet)


def _atom_conj(theta, is_atom) -> bool:
    if isinstance(theta, Conj):
        return all(is_atom(c) for c in theta.children)
    return is_atom(theta)


def family_member(fam: ObsFamily, theta: Observable) -> bool:
    """Grammar test, up to canonical form (so ``and(<a>tt)`` counts as ``<a>tt``)."""
    theta = canonical(theta)
    kind = fam.kind
    is_ref = lambda t: _is_ref(t, fam)  # noqa: E731
    is_ready = lambda t: _is_ready(t, fam)  # noqa: E731

    def spine(t, tail) -> bool:
        while isinstance(t, Diamond):
            if t.action not in fam.alphabet:
                return False
            t = t.body
        return tail(t)

    if kind is FamilyKind.TRACE:
        return spine(theta, lambda t: t == TT)
    if kind is FamilyKind.FAILURE:
        return spine(theta, lambda t: _atom_conj(t, is_ref))
    if kind is FamilyKind.READY:
        return spine(theta, lambda t: t == TT or is_ready(t))
    if kind in (FamilyKind.FAILURE_TRACE, FamilyKind.READY_TRACE):
        is_atom = is_ref if kind is FamilyKind.FAILURE_TRACE else is_ready
        t = theta
        while True:
            if isinstance(t, Diamond):
                if t.action not in fam.alphabet:
                    return False
                t = t.body
                continue
            if _atom_conj(t, is_atom):
                return True
            if not isinstance(t, Conj):
                return False
            ds = [c for c in t.children if isinstance(c, Diamond)]
            rest = [c for c in t.children if not isinstance(c, Diamond)]
            if len(ds) != 1 or not all(is_atom(c) for c in rest):
                return False
            t = ds[0]

    def no_atoms(t) -> bool:
        if isinstance(t, Atom):
            return False
        if isinstance(t, Diamond):
            return t.action in fam.alphabet and no_atoms(t.body)
        return all(no_atoms(c) for c in t.children)

    return no_atoms(theta)


# ----------------------------------------------------------------- enumeration

class EnumerationCapExceeded(RuntimeError):
    pass


def _conjunctions(atoms: Sequence[Observable], max_width: int) -> list[Observable]:
    """``tt``, every atom, and every conjunction of 2..max_width distinct atoms."""
    out: list[Observable] = [TT]
    for k in range(1, max_width + 1):
        for combo in itertools.combinations(atoms, k):
            out.append(canonical(Conj(combo)))
    return out


def enumerate_family(
    fam: ObsFamily, max_weight: int, max_conj_width: int = 2, cap: int = 200_000
) -> Iterator[Observable]:
    """Every canonical member of ``fam`` with weight <= max_weight and conjunction width <= max_conj_width.

    Raises EnumerationCapExceeded once more than ``cap`` formulas would be produced.
    """
    kind = fam.kind
    width = max(max_conj_width, 1)
    seen: dict[tuple, Observable] = {}

    def emit(theta: Observable) -> bool:
        key = sort_key(theta)
        if key in seen:
            return False
        if len(seen) >= cap:
            raise EnumerationCapExceeded(f"more than {cap} formulas")
        seen[key] = theta
        return True

    if kind is FamilyKind.SIMULATION:
        level: list[Observable] = [TT]
        for _ in range(max_weight):
            primes = [Diamond(a, t) for a in fam.alphabet for t in level]
            nxt: dict[tuple, Observable] = {sort_key(TT): TT}
            for k in range(1, width + 1):
                for combo in itertools.combinations(primes, k):
                    c = canonical(Conj(combo))
                    nxt.setdefault(sort_key(c), c)
                    if len(nxt) > cap:
                        raise EnumerationCapExceeded(f"more than {cap} formulas")
            level = list(nxt.values())
        for theta in sorted(level, key=sort_key):
            if emit(theta):
                yield theta
        return

    if kind is FamilyKind.TRACE:
        base = [TT]
    elif kind is FamilyKind.READY:
        base = [TT] + fam.ready_atoms()
    else:
        base = _conjunctions(fam.atoms(), width)
    prefixes = [TT]
    if kind in (FamilyKind.FAILURE_TRACE, FamilyKind.READY_TRACE):
        prefixes = _conjunctions(fam.atoms(), width - 1)

    level = list(base)
    for theta in level:
        if emit(theta):
            yield theta
    for _ in range(max_weight):
        nxt = []
        for body in level:
            for a in fam.alphabet:
                for c in prefixes:
                    theta = canonical(Conj((c, Diamond(a, body))))
                    nxt.append(theta)
        level = nxt
        for theta in nxt:
            if emit(theta):
                yield theta


# ----------------------------------------------------- enumeration-based oracle

def _masks(lts: Lts) -> tuple[list[list[int]], list[frozenset[int]]]:
    succ = [[sum(1 << q for q in lts.successors(p, a)) for a in lts.actions] for p in lts.states]
    return succ, [lts.enabled(p) for p in lts.states]


def oracle_extensions(lts: Lts, fam: FamilyLike, n: int, width: int | None = None) -> dict[int, Observable]:
    """Extensions (as state bitmasks) of all family members of weight <= n, each with a witness formula.

    Formulas are generated exactly as in ``enumerate_family`` but deduplicated by
    extension on ``lts``, which keeps the search finite without losing any
    distinguishing power. ``width`` defaults to 2 for atom families and the
    maximal out-degree (at least 1) for simulation.
    """
    fam = as_family(fam, lts)
    kind = fam.kind
    if width is None:
        width = max(lts.max_out_degree(), 1) if kind is FamilyKind.SIMULATION else 2
    width = max(width, 1)
    succ, enabled = _masks(lts)
    everything = (1 << lts.state_count) - 1
    idx = {label: i for i, label in enumerate(lts.alphabet)}

    def pre(a: int, mask: int) -> int:
        return sum(1 << p for p in lts.states if succ[p][a] & mask)

    def atom_ext(atom: Atom) -> int:
        must = {idx[x] for x in atom.must}
        must_not = {idx[x] for x in atom.must_not}
        return sum(1 << p for p in lts.states if must <= enabled[p] and not must_not & enabled[p])

    def conj_closure(primes: dict[int, Observable], w: int) -> dict[int, Observable]:
        # every intersection of at most w primes, each with a witness
        out: dict[int, Observable] = {everything: TT}
        layer = {everything: ()}
        for _ in range(w):
            nxt = {}
            for mask, parts in layer.items():
                for pm, pf in primes.items():
                    m = mask & pm
                    if m not in out:
                        nxt[m] = parts + (pf,)
            for m, parts in nxt.items():
                out[m] = canonical(Conj(parts))
            layer = {**layer, **nxt}
        return out

    if kind is FamilyKind.SIMULATION:
        level: dict[int, Observable] = {everything: TT}
        for _ in range(n):
            primes: dict[int, Observable] = {}
            for a, label in enumerate(lts.alphabet):
                for mask, f in level.items():
                    primes.setdefault(pre(a, mask), Diamond(label, f))
            merged = conj_closure(primes, width)
            for mask, f in level.items():
                merged.setdefault(mask, f)
            level = merged
        return level

    atoms: dict[int, Observable] = {}
    for atom in fam.atoms():
        atoms.setdefault(atom_ext(atom), atom)
    if kind is FamilyKind.TRACE:
        base = {everything: TT}
    elif kind is FamilyKind.READY:
        base = {everything: TT, **{m: f for m, f in atoms.items() if m != everything}}
    else:
        base = conj_closure(atoms, width)
    prefixes = {everything: TT}
    if kind in (FamilyKind.FAILURE_TRACE, FamilyKind.READY_TRACE):
        prefixes = conj_closure(atoms, width - 1)

    result = dict(base)
    level = dict(base)
    for _ in range(n):
        nxt: dict[int, Observable] = {}
        for mask, body in level.items():
            for a, label in enumerate(lts.alphabet):
                d = pre(a, mask)
                for cm, cf in prefixes.items():
                    m = cm & d
                    if m not in result and m not in nxt:
                        nxt[m] = canonical(Conj((cf, Diamond(label, body))))
        # bodies seen at a lower weight were already expanded
        level = nxt
        result.update(nxt)
    return result


def _relation_from_extensions(size: int, masks) -> Relation:
    m = np.ones((size, size), dtype=bool)
    for mask in masks:
        inside = np.array([(mask >> p) & 1 for p in range(size)], dtype=bool)
        m &= ~np.outer(inside, ~inside)
    return Relation(m)


def oracle_approximant(lts: Lts, fam: FamilyLike, n: int, width: int | None = None) -> Relation:
    """``{(P,Q) | every enumerated formula of weight <= n true at P is true at Q}``."""
    return _relation_from_extensions(lts.state_count, oracle_extensions(lts, fam, n, width))


def distinguishing_observable(
    lts: Lts, p: int, q: int, fam: FamilyLike, n: int, width: int | None = None
) -> Observable | None:
    """A family member of weight <= n true at ``p`` and false at ``q``, of least weight."""
    fam = as_family(fam, lts)
    for k in range(n + 1):
        for mask, theta in oracle_extensions(lts, fam, k, width).items():
            if (mask >> p) & 1 and not (mask >> q) & 1:
                return theta
    return None


# ------------------------------------------------ denotational approximants

def compliance_matrix(lts: Lts, kind: FamilyKind | str) -> np.ndarray:
    """``C[P, Q]`` iff every atomic observable of the family true at P is true at Q.

    For refusal atoms this is ``enabled(Q) <= enabled(P)``; for ready atoms it is
    ``enabled(P) == enabled(Q)``.
    """
    kind = FamilyKind.parse(kind)
    n = lts.state_count
    if kind.atoms is None:
        return np.ones((n, n), dtype=bool)
    en = [lts.enabled(p) for p in lts.states]
    if kind.atoms == "ref":
        return np.array([[en[q] <= en[p] for q in range(n)] for p in range(n)], dtype=bool).reshape(n, n)
    return np.array([[en[q] == en[p] for q in range(n)] for p in range(n)], dtype=bool).reshape(n, n)


def simulation_step(lts: Lts, x: np.ndarray) -> np.ndarray:
    """Clause 1 of the simulation functional; ``x`` may be a stack of relations."""
    adj = lts.adjacencies()
    if not len(adj):
        return np.ones(x.shape, dtype=bool)
    if x.ndim == 3 and len(x) >= 32:
        return _simulation_step_flat(adj, x)
    # z[.., a, P', Q]: some Q -a-> Q' with (P', Q') in x
    z = bool_matmul(x[..., None, :, :], adj.swapaxes(1, 2))
    return ~bool_matmul(adj, ~z).any(axis=-3)


def _simulation_step_flat(adj: np.ndarray, x: np.ndarray) -> np.ndarray:
    # the same computation as two flat float products, which BLAS does much faster on big stacks
    k, n, _ = adj.shape
    b = len(x)
    a = adj.astype(np.float32)
    z = (x.reshape(-1, n).astype(np.float32) @ a.transpose(2, 0, 1).reshape(n, k * n)) > 0
    unmatched = (~z).reshape(b, n, k, n).transpose(1, 0, 2, 3).reshape(n, -1).astype(np.float32)
    bad = ((a.reshape(k * n, n) @ unmatched) > 0).reshape(k, n, b, k, n)
    same = np.arange(k)
    return ~bad[same, :, :, same, :].any(axis=0).transpose(1, 0, 2)


def _linear_depths(lts: Lts, kind: FamilyKind, limit: int | None, cap: int) -> np.ndarray:
    # macro-states are bitmasks over states
    n = lts.state_count
    en = [lts.enabled(p) for p in lts.states]
    everything = (1 << n) - 1
    if kind is FamilyKind.TRACE:
        keep = [everything] * n
    elif kind.atoms == "ref":
        keep = [sum(1 << q for q in lts.states if en[q] <= en[p]) for p in lts.states]
    else:
        keep = [sum(1 << q for q in lts.states if en[q] == en[p]) for p in lts.states]
    filtering = kind in (FamilyKind.FAILURE_TRACE, FamilyKind.READY_TRACE)
    succ_bits = [[sum(1 << q for q in lts.successors(p, a)) for a in lts.actions] for p in lts.states]
    succ = [[lts.successors(p, a) for a in lts.actions] for p in lts.states]
    post_cache: dict[tuple[int, int], int] = {}

    def post(mask: int, a: int) -> int:
        key = (mask, a)
        if key not in post_cache:
            out, m, q = 0, mask, 0
            while m:
                if m & 1:
                    out |= succ_bits[q][a]
                m >>= 1
                q += 1
            post_cache[key] = out
        return post_cache[key]

    depths = np.full((n, n), INF, dtype=np.int64)
    for p0 in lts.states:
        for q0 in lts.states:
            if p0 == q0:
                continue
            start = (p0, 1 << q0)
            seen = {start}
            macro = {start[1]}
            queue = deque([(start, 0)])
            while queue:
                (p, s), d = queue.popleft()
                good = s & keep[p]
                if not good:
                    depths[p0, q0] = d
                    break
                if limit is not None and d >= limit:
                    continue
                source = good if filtering else s
                for a, targets in enumerate(succ[p]):
                    if not targets:
                        continue
                    nxt_s = post(source, a)
                    for p2 in targets:
                        node = (p2, nxt_s)
                        if node not in seen:
                            seen.add(node)
                            macro.add(nxt_s)
                            if limit is None and len(macro) > cap:
                                raise PowersetCapExceeded(
                                    f"{kind.value} preorder for ({p0},{q0}) needs more than {cap} macro-states"
                                )
                            queue.append((node, d + 1))
    return depths


def _simulation_depths(lts: Lts, limit: int | None) -> np.ndarray:
    n = lts.state_count
    depths = np.full((n, n), INF, dtype=np.int64)
    x = np.ones((n, n), dtype=bool)
    k = 0
    while limit is None or k < limit:
        nxt = simulation_step(lts, x) & x
        k += 1
        dropped = x & ~nxt
        if not dropped.any():
            break
        depths[dropped] = k
        x = nxt
    return depths


@lru_cache(maxsize=4096)
def failure_depths(lts: Lts, kind: FamilyKind, limit: int | None = None, cap: int | None = None) -> np.ndarray:
    """``D[P, Q]``: least ``n`` with ``(P, Q)`` outside the n-th approximant (INF if never).

    With ``limit`` set, only depths up to the limit are explored and larger ones
    read as INF. Without a limit the full preorder is decided and the powerset
    cap applies.
    """
    cap = default_cap() if cap is None else cap
    if kind is FamilyKind.SIMULATION:
        out = _simulation_depths(lts, limit)
    else:
        out = _linear_depths(lts, kind, limit, cap)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=4096)
def _exact_depths(lts: Lts, kind: FamilyKind, cap: int) -> np.ndarray | None:
    try:
        return failure_depths(lts, kind, None, cap)
    except PowersetCapExceeded:
        return None


def _depths_up_to(lts: Lts, kind: FamilyKind, n: int) -> np.ndarray:
    """Depths exact at least up to ``n``: the full matrix when it fits the cap, else a bounded search."""
    exact = _exact_depths(lts, kind, default_cap())
    return exact if exact is not None else failure_depths(lts, kind, n)


def approximant(lts: Lts, fam: FamilyLike, n: int) -> Relation:
    """The n-th approximant: pairs whose weight-<=n family observables transfer from left to right."""
    if n < 0:
        raise ValueError("approximant index must be >= 0")
    kind = as_family(fam, lts).kind
    return Relation(_depths_up_to(lts, kind, n) > n)


def preorder(lts: Lts, fam: FamilyLike, cap: int | None = None) -> Relation:
    """The full preorder, i.e. the meet of all approximants.

    Raises PowersetCapExceeded when the subset construction outgrows ``cap``.
    """
    kind = as_family(fam, lts).kind
    return Relation(failure_depths(lts, kind, None, cap) == INF)


def stabilization_index(lts: Lts, fam: FamilyLike, cap: int | None = None) -> int:
    """Least ``k`` with ``approximant(k) == preorder``; all later approximants are equal too."""
    kind = as_family(fam, lts).kind
    d = failure_depths(lts, kind, None, cap)
    finite = d[d != INF]
    return int(finite.max()) if finite.size else 0


def compliant(lts: Lts, r: Relation, fam: FamilyLike) -> tuple[int, int, Atom] | None:
    """None when every pair of ``r`` preserves the family's atoms, else ``(P, Q, atom)`` violating it."""
    fam = as_family(fam, lts)
    if fam.kind.atoms is None:
        return None
    for p, q in r:
        ep, eq = lts.enabled(p), lts.enabled(q)
        if fam.kind.atoms == "ref" and not eq <= ep:
            extra = min(eq - ep)
            return p, q, Atom(frozenset(), frozenset([lts.alphabet[extra]]))
        if fam.kind.atoms == "ready" and ep != eq:
            labels = {lts.alphabet[a] for a in ep}
            return p, q, Atom(frozenset(labels), frozenset(lts.alphabet) - labels)
    return None


def verify_distinction(lts: Lts, p: int, q: int, theta: Observable, n: int) -> bool:
    """Independent re-check of a witness by direct satisfaction."""
    from .observables import weight

    ext = extension(lts, theta)
    return weight(theta) <= n and p in ext and q not in ext


def approximant_chain(lts: Lts, fam: FamilyLike, cap: int | None = None):
    """The approximants of ``fam`` on ``lts`` as a chain, with its stabilization index when decidable.

    Atoms have weight 0, so for families with atoms the 0th approximant is the
    compliance relation rather than the top element. Their chain gets an extra
    top point in front: ``x_0 = top`` and ``x_{n+1} = approximant(n)``. The
    family functional is valid for this chain and weight preservation for it
    is the same condition as for the approximants themselves.
    """
    from .lattice import Chain

    kind = as_family(fam, lts).kind
    shift = 0 if kind.atoms is None else 1
    try:
        s = stabilization_index(lts, kind, cap) + shift
    except PowersetCapExceeded:
        s = None

    def point(n: int) -> Relation:
        if n < shift:
            return Relation.full(lts.state_count)
        return approximant(lts, kind, n - shift)

    return Chain(lts.state_count, point, s, name=f"{kind.value} approximants")
