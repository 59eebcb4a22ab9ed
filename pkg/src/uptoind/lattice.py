"""Chains of approximants, valid and ap endofunctions on the lattice of relations.

A chain ``x_0 = top >= x_1 >= ...`` describes a relation from above; its meet is
the object of interest. ``b`` is *valid* for the chain when ``y <= x_n``
implies ``b(y) <= x_{n+1}``; then every post-fixed point of ``b`` lies below the
meet. ``f`` is *ap* (approximation-preserving) when ``y <= x_n`` implies
``f(y) <= x_n``; composing a valid function with an ap one stays valid.

All checks here are bounded by an explicit ``n_max``. A verdict is reported as
total only when the chain carries a stabilization index no larger than the
bound, in which case every later level repeats the last checked one.
"""

from __future__ import annotations

import itertools
import json
import random
import threading
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from .relation import Relation


class ChainViolation(RuntimeError):
    """A chain generator produced a non-top first point or an increasing step."""


class MonotonicityViolation(RuntimeError):
    pass


class PreconditionError(ValueError):
    pass


class Chain:
    """A memoized, lazily generated chain of approximants."""

    def __init__(
        self,
        size: int,
        generator: Callable[[int], Relation],
        stabilization_index: int | None = None,
        name: str = "chain",
    ):
        self.size = size
        self.name = name
        self.stabilization_index = stabilization_index
        self._generator = generator
        self._points: list[Relation] = []
        self._lock = threading.Lock()

    @classmethod
    def from_sequence(cls, points: Sequence[Relation], name: str = "chain") -> Chain:
        """The chain ``points[0], points[1], ..., points[-1], points[-1], ...``."""
        points = list(points)
        if not points:
            raise ValueError("empty chain")
        return cls(points[0].size, lambda n: points[min(n, len(points) - 1)], len(points) - 1, name)

    @classmethod
    def constant(cls, size: int) -> Chain:
        return cls.from_sequence([Relation.full(size)], name="constant top")

    def __getitem__(self, n: int) -> Relation:
        if n < 0:
            raise IndexError(n)
        if n < len(self._points):
            return self._points[n]
        with self._lock:
            while len(self._points) <= n:
                k = len(self._points)
                x = self._generator(k)
                if x.size != self.size:
                    raise ChainViolation(f"{self.name}: point {k} has size {x.size}, expected {self.size}")
                if k == 0 and x != Relation.full(self.size):
                    raise ChainViolation(f"{self.name}: x_0 is not the top element")
                if k > 0 and not x <= self._points[-1]:
                    pair = x.first_difference(self._points[-1])
                    raise ChainViolation(f"{self.name}: x_{k} is not below x_{k - 1} (pair {pair})")
                self._points.append(x)
        return self._points[n]

    @property
    def top(self) -> Relation:
        return self[0]


@dataclass(frozen=True)
class RelEndo:
    """An endofunction on relations of a fixed size.

    ``batch``, when given, maps a stack of boolean matrices ``(k, n, n)`` to the
    stack of images; it only speeds up exhaustive checks.
    """

    fn: Callable[[Relation], Relation]
    monotone: bool = False
    name: str = "f"
    batch: Callable[[np.ndarray], np.ndarray] | None = None

    def __call__(self, r: Relation) -> Relation:
        return self.fn(r)

    def apply_many(self, stack: np.ndarray) -> np.ndarray:
        if self.batch is not None:
            return self.batch(stack)
        return np.stack([self.fn(Relation(m)).matrix for m in stack]) if len(stack) else stack

    def __repr__(self):
        return f"RelEndo({self.name})"


def identity() -> RelEndo:
    return RelEndo(lambda r: r, monotone=True, name="id", batch=lambda s: s)


def constant(y: Relation, name: str | None = None) -> RelEndo:
    def batch(stack):
        return np.broadcast_to(y.matrix, stack.shape).copy()

    return RelEndo(lambda r: y, monotone=True, name=name or f"const({len(y)} pairs)", batch=batch)


def compose(b: RelEndo, f: RelEndo) -> RelEndo:
    """``z -> b(f(z))``."""
    batch = None
    if b.batch is not None and f.batch is not None:
        batch = lambda s: b.batch(f.batch(s))  # noqa: E731
    return RelEndo(lambda z: b(f(z)), monotone=b.monotone and f.monotone, name=f"{b.name}.{f.name}", batch=batch)


def join(fs: Sequence[RelEndo], size: int) -> RelEndo:
    """Pointwise union; the empty join is the constant bottom function."""
    fs = list(fs)

    def fn(z: Relation) -> Relation:
        out = Relation.empty(size)
        for f in fs:
            out = out | f(z)
        return out

    batch = None
    if all(f.batch is not None for f in fs):
        def batch(stack):
            out = np.zeros(stack.shape, dtype=bool)
            for f in fs:
                out |= f.apply_many(stack)
            return out

    name = "union(" + ", ".join(f.name for f in fs) + ")"
    return RelEndo(fn, monotone=all(f.monotone for f in fs), name=name, batch=batch)


def is_post_fixed(b: RelEndo, z: Relation) -> bool:
    return z <= b(z)


@dataclass
class MeetResult:
    relation: Relation
    exact: bool
    index: int

    @property
    def tag(self) -> str:
        return "exact" if self.exact else "upper bound"


def meet_of_chain(c: Chain, budget: int) -> MeetResult:
    """The meet when the chain is known to be stable within ``budget``, else ``x_budget`` tagged as an upper bound."""
    s = c.stabilization_index
    if s is not None and s <= budget:
        return MeetResult(c[s], True, s)
    return MeetResult(c[budget], False, budget)


# ----------------------------------------------------------------- reports

@dataclass
class LevelVerdict:
    n: int
    ok: bool
    probes: int
    witness: tuple[int, int] | None = None
    probe: str | None = None


@dataclass
class CheckReport:
    prop: str
    function: str
    chain: str
    n_max: int
    method: str
    total: bool
    levels: list[LevelVerdict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(lv.ok for lv in self.levels)

    @property
    def failure(self) -> LevelVerdict | None:
        return next((lv for lv in self.levels if not lv.ok), None)

    @property
    def scope(self) -> str:
        return "for all n" if self.total else f"up to n={self.n_max}"

    def to_text(self) -> str:
        verdict = "holds" if self.ok else "FAILS"
        lines = [f"{self.prop} of {self.function} for {self.chain}: {verdict} ({self.scope}; method {self.method})"]
        for lv in self.levels:
            mark = "ok" if lv.ok else f"FAIL witness {lv.witness} from {lv.probe}"
            lines.append(f"  n={lv.n}: {mark} [{lv.probes} probes]")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "property": self.prop,
            "function": self.function,
            "chain": self.chain,
            "n_max": self.n_max,
            "method": self.method,
            "total": self.total,
            "ok": self.ok,
            "levels": [
                {"n": lv.n, "ok": lv.ok, "probes": lv.probes, "witness": lv.witness, "probe": lv.probe}
                for lv in self.levels
            ],
        }

    def to_json_lines(self) -> str:
        head = {k: v for k, v in self.to_dict().items() if k != "levels"}
        rows = [json.dumps({"record": "check", **head})]
        rows += [json.dumps({"record": "level", **lv}) for lv in self.to_dict()["levels"]]
        return "\n".join(rows)


class _FixedNoise:
    """A replay of one fixed pseudo-random byte stream; the default source for sampling.

    Seeding a fresh generator on every check costs more than the check itself on small
    relations, so the stream is generated once and shared.
    """

    _buffer = bytearray()
    _source = random.Random(0)
    _lock = threading.Lock()

    def __init__(self):
        self._pos = 0

    def randbytes(self, k: int) -> bytes:
        end = self._pos + k
        if end > len(self._buffer):
            with self._lock:
                if end > len(self._buffer):
                    self._buffer.extend(self._source.randbytes(max(end - len(self._buffer), 4096)))
        out = bytes(self._buffer[self._pos : end])
        self._pos = end
        return out


@lru_cache(maxsize=64)
def _subset_stack(size: int, pairs: tuple[tuple[int, int], ...]) -> np.ndarray:
    k = len(pairs)
    stack = np.zeros((1 << k, size, size), dtype=bool)
    if k:
        bits = (np.arange(1 << k)[:, None] >> np.arange(k)[None, :]) & 1
        rows, cols = zip(*pairs)
        stack[:, list(rows), list(cols)] = bits.astype(bool)
    stack.setflags(write=False)
    return stack


def _subsets_of(x: Relation) -> np.ndarray:
    """All sub-relations of ``x`` as a read-only stack; exponential in ``len(x)``."""
    pairs = tuple(x.pairs())
    if len(pairs) > 16:
        raise ValueError(f"refusing to enumerate 2^{len(pairs)} sub-relations")
    return _subset_stack(x.size, pairs)


def _sample_below(points: np.ndarray, count: int, rng: random.Random) -> np.ndarray:
    """``count`` random sub-relations of each point of a stack, each with its own random density."""
    upper = np.repeat(points, count, axis=0)
    noise = np.frombuffer(rng.randbytes(upper.size + len(upper)), dtype=np.uint8)
    keep = noise[: len(upper)].reshape(-1, 1, 1)
    return upper & (noise[len(upper) :].reshape(upper.shape) < keep)


def _sample_subsets(x: Relation, count: int, rng: random.Random) -> np.ndarray:
    return _sample_below(x.matrix[None], count, rng)


def spot_check_monotone(f: RelEndo, c: Chain, n_max: int, rng: random.Random, samples: int = 8) -> None:
    """Sample ``y <= y'`` below chain points and require ``f(y) <= f(y')``."""
    upper = _sample_below(np.stack([c[n].matrix for n in range(n_max + 1)]), samples, rng)
    lower = _sample_below(upper, 1, rng)
    images = f.apply_many(np.concatenate([lower, upper]))
    bad = images[: len(lower)] & ~images[len(lower) :]
    if bad.any():
        _, p, q = (int(v) for v in np.argwhere(bad)[0])
        raise MonotonicityViolation(f"{f.name} declared monotone but grows pair ({p},{q}) on a smaller input")


def _check(
    prop: str,
    f: RelEndo,
    c: Chain,
    n_max: int,
    method: str,
    samples: int,
    rng: random.Random | None,
    exhaustive: bool,
) -> CheckReport:
    shift = 1 if prop == "valid" else 0
    if method == "auto":
        method = "monotone" if f.monotone else "raw"
    if method not in ("monotone", "raw"):
        raise ValueError(f"unknown method {method!r}")
    rng = rng or _FixedNoise()
    if method == "monotone":
        if not f.monotone:
            raise PreconditionError(f"{f.name} is not declared monotone")
        spot_check_monotone(f, c, n_max, rng)
    label = method if method == "monotone" or not exhaustive else "raw-exhaustive"
    s = c.stabilization_index
    total = s is not None and n_max >= s and (method == "monotone" or exhaustive)
    report = CheckReport(prop, f.name, c.name, n_max, label, total)
    points = np.stack([c[n].matrix for n in range(n_max + 1 + shift)])
    levels = points[: n_max + 1]
    targets = points[shift:]

    if method == "monotone":
        # one probe per level: y = x_n
        bad = f.apply_many(levels) & ~targets
        report.levels = _verdicts(bad[:, None], np.ones((n_max + 1, 1), dtype=bool), lambda n, i: "x_n")
        return report

    if exhaustive and len(c.top) <= 16:
        # every sub-relation of x_n is a sub-relation of the top point: evaluate once, then
        # filter per level on bitmasks over the top's pairs (subset #i has bitmask i)
        pairs = tuple(c.top.pairs())
        stack = _subset_stack(c.size, pairs)
        images = f.apply_many(stack)
        rows, cols = (list(v) for v in zip(*pairs)) if pairs else ([], [])
        weights = np.int64(1) << np.arange(len(pairs), dtype=np.int64)
        escapes = (images & ~c.top.matrix).any(axis=(1, 2))
        image_bits = images[:, rows, cols] @ weights
        level_bits = levels[:, rows, cols] @ weights
        target_bits = targets[:, rows, cols] @ weights
        ids = np.arange(len(stack))
        inside = (ids[None] & ~level_bits[:, None]) == 0
        hits = inside & (escapes[None] | ((image_bits[None] & ~target_bits[:, None]) != 0))
        for n in range(n_max + 1):
            probes = int(inside[n].sum())
            if not hits[n].any():
                report.levels.append(LevelVerdict(n, True, probes))
                continue
            i = int(np.flatnonzero(hits[n])[0])
            p, q = (int(v) for v in np.argwhere(images[i] & ~targets[n])[0])
            report.levels.append(LevelVerdict(n, False, probes, (p, q), f"sub-relation #{i}"))
        return report

    for n in range(n_max + 1):
        xn = c[n]
        if exhaustive:
            probes = _subsets_of(xn)
        else:
            probes = np.concatenate([xn.matrix[None], _sample_subsets(xn, samples, rng)])
        bad = f.apply_many(probes) & ~targets[n]
        name = (lambda _, i: f"sub-relation #{i}") if exhaustive else (lambda _, i: "x_n" if i == 0 else f"sample #{i}")
        report.levels += _verdicts(bad[None], np.ones((1, len(probes)), dtype=bool), name, start=n)
    return report


def _verdicts(bad: np.ndarray, inside: np.ndarray, name, start: int = 0) -> list[LevelVerdict]:
    """Per-level verdicts from ``bad[level, probe, p, q]`` restricted to probes marked ``inside``."""
    hits = bad.any(axis=(2, 3)) & inside
    counts = inside.sum(axis=1)
    out = []
    for n in range(len(bad)):
        if not hits[n].any():
            out.append(LevelVerdict(start + n, True, int(counts[n])))
            continue
        i = int(np.flatnonzero(hits[n])[0])
        p, q = (int(v) for v in np.argwhere(bad[n, i])[0])
        out.append(LevelVerdict(start + n, False, int(counts[n]), (p, q), name(n, i)))
    return out


def check_valid(
    b: RelEndo,
    c: Chain,
    n_max: int,
    method: str = "auto",
    samples: int = 64,
    rng: random.Random | None = None,
    exhaustive: bool = False,
) -> CheckReport:
    """Check ``y <= x_n  =>  b(y) <= x_{n+1}`` for ``n <= n_max``.

    ``method="monotone"`` tests only ``y = x_n`` (sufficient for monotone ``b``);
    ``method="raw"`` tests ``x_n`` and ``samples`` random sub-relations, or all of
    them with ``exhaustive=True``.
    """
    return _check("valid", b, c, n_max, method, samples, rng, exhaustive)


def check_ap(
    f: RelEndo,
    c: Chain,
    n_max: int,
    method: str = "auto",
    samples: int = 64,
    rng: random.Random | None = None,
    exhaustive: bool = False,
) -> CheckReport:
    """Check ``y <= x_n  =>  f(y) <= x_n`` for ``n <= n_max``; options as in check_valid."""
    return _check("ap", f, c, n_max, method, samples, rng, exhaustive)


@dataclass
class BelowMeetReport:
    n_max: int
    total: bool
    steps: list[str]
    meet: MeetResult | None = None

    def to_text(self) -> str:
        scope = "all n" if self.total else f"n <= {self.n_max}"
        return "\n".join([f"z below every chain point ({scope})"] + [f"  {s}" for s in self.steps])


def certify_below_meet(
    b: RelEndo, z: Relation, c: Chain, n_max: int, valid_report: CheckReport | None = None
) -> BelowMeetReport:
    """Replay the induction ``z <= x_n  =>  z <= b(z) <= x_{n+1}`` level by level."""
    if valid_report is None:
        valid_report = check_valid(b, c, n_max)
    if not valid_report.ok:
        bad = valid_report.failure
        raise PreconditionError(f"{b.name} is not valid for {c.name}: fails at n={bad.n}, pair {bad.witness}")
    bz = b(z)
    if not z <= bz:
        raise PreconditionError(f"z is not a post-fixed point of {b.name}: pair {z.first_difference(bz)} is lost")
    steps = ["z <= x_0 since x_0 is top"]
    for n in range(n_max):
        if not bz <= c[n + 1]:
            raise AssertionError(f"validity report accepted but b(z) escapes x_{n + 1}")
        steps.append(f"z <= x_{n} gives b(z) <= x_{n + 1} by validity; z <= b(z), so z <= x_{n + 1}")
        assert z <= c[n + 1]
    meet = meet_of_chain(c, n_max) if valid_report.total else None
    return BelowMeetReport(n_max, valid_report.total, steps, meet)


def subsets(x: Relation) -> Iterable[Relation]:
    """Every sub-relation of ``x`` (exponential; for tiny relations only)."""
    pairs = x.pairs()
    for k in range(len(pairs) + 1):
        for combo in itertools.combinations(pairs, k):
            yield Relation.from_pairs(x.size, combo)
