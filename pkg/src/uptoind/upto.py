"""Up-to combinators: a small term language of functions on relations.

    id | const(NAME) | pre(FAMILY) | comp(t, t) | union(t, ...) | chain(t, t) | star(t) | ctx(NAME)

``comp`` is function composition, ``chain`` relational composition of the two
images, ``star`` reflexive-transitive closure, ``pre(F)`` closure under the
preorder of family F on both sides, and ``ctx(NAME)`` closure under a named
library of CCS contexts.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import ccs
from .lattice import CheckReport, RelEndo, check_ap
from .lts import Lts
from .relation import Relation, bool_matmul, rt_closure
from .spectrum import (
    FamilyKind,
    FamilyLike,
    PowersetCapExceeded,
    approximant_chain,
    as_family,
    preorder,
)


@dataclass(frozen=True)
class Id:
    pass


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Comp:
    outer: "UptoTerm"
    inner: "UptoTerm"


@dataclass(frozen=True)
class Union:
    parts: tuple["UptoTerm", ...]


@dataclass(frozen=True)
class Chain2:
    left: "UptoTerm"
    right: "UptoTerm"


@dataclass(frozen=True)
class Star:
    body: "UptoTerm"


@dataclass(frozen=True)
class Pre:
    family: FamilyKind


@dataclass(frozen=True)
class Ctx:
    name: str


UptoTerm = Id | Const | Comp | Union | Chain2 | Star | Pre | Ctx


class UnresolvedReference(KeyError):
    pass


@dataclass
class Env:
    """What up-to terms are evaluated against.

    ``relations`` holds named constants; ``refl``, ``top`` and ``empty`` are
    built in. ``terms`` maps LTS states back to CCS terms and ``contexts`` names
    context libraries; both are only needed by ``ctx``.
    """

    lts: Lts
    relations: dict[str, Relation] = field(default_factory=dict)
    terms: Sequence[ccs.Term] | None = None
    contexts: dict[str, list[ccs.Term]] = field(default_factory=dict)
    cap: int | None = None
    _plugged: dict = field(default_factory=dict, repr=False, compare=False)

    def plugged(self, name: str) -> list[np.ndarray]:
        """For each context of the library, the state of ``C[p]`` for every state ``p`` (-1 if outside)."""
        if name not in self._plugged:
            contexts = self.context_library(name)
            index = {t: i for i, t in enumerate(self.terms)}
            self._plugged[name] = [
                np.array([index.get(ccs.plug(c, t), -1) for t in self.terms], dtype=np.int64) for c in contexts
            ]
        return self._plugged[name]

    def relation(self, name: str) -> Relation:
        if name in self.relations:
            return self.relations[name]
        n = self.lts.state_count
        builtin = {"refl": Relation.identity, "top": Relation.full, "empty": Relation.empty}
        if name in builtin:
            return builtin[name](n)
        raise UnresolvedReference(f"no relation named {name!r}")

    def preorder(self, kind: FamilyKind) -> Relation:
        return preorder(self.lts, kind, self.cap)

    def context_library(self, name: str) -> list[ccs.Term]:
        if name not in self.contexts:
            raise UnresolvedReference(f"no context library named {name!r}")
        if self.terms is None:
            raise UnresolvedReference("ctx(...) needs an LTS generated from CCS terms")
        return self.contexts[name]


def _ctx_matrix(env: Env, name: str, m: np.ndarray) -> np.ndarray:
    out = m.copy()
    ps, qs = np.nonzero(m)
    for image in env.plugged(name):
        cp, cq = image[ps], image[qs]
        # pairs leaving the generated state space are dropped
        inside = (cp >= 0) & (cq >= 0)
        out[cp[inside], cq[inside]] = True
    return out


def to_endo(t: UptoTerm, env: Env) -> RelEndo:
    """The function denoted by ``t``; all combinators are monotone."""
    name = format_upto(t)
    n = env.lts.state_count
    if isinstance(t, Id):
        return RelEndo(lambda r: r, True, name, lambda s: s)
    if isinstance(t, Const):
        y = env.relation(t.name)
        return RelEndo(lambda r: y, True, name, lambda s: np.broadcast_to(y.matrix, s.shape).copy())
    if isinstance(t, Comp):
        f, g = to_endo(t.outer, env), to_endo(t.inner, env)
        return RelEndo(lambda r: f(g(r)), True, name, lambda s: f.apply_many(g.apply_many(s)))
    if isinstance(t, Union):
        fs = [to_endo(p, env) for p in t.parts]

        def union_fn(r: Relation) -> Relation:
            out = Relation.empty(n)
            for f in fs:
                out = out | f(r)
            return out

        def union_batch(s):
            out = np.zeros(s.shape, dtype=bool)
            for f in fs:
                out |= f.apply_many(s)
            return out

        return RelEndo(union_fn, True, name, union_batch)
    if isinstance(t, Chain2):
        f, g = to_endo(t.left, env), to_endo(t.right, env)
        return RelEndo(
            lambda r: f(r).compose(g(r)), True, name, lambda s: bool_matmul(f.apply_many(s), g.apply_many(s))
        )
    if isinstance(t, Star):
        f = to_endo(t.body, env)
        return RelEndo(
            lambda r: f(r).reflexive_transitive_closure(), True, name, lambda s: rt_closure(f.apply_many(s))
        )
    if isinstance(t, Pre):
        pre = env.preorder(t.family)
        return RelEndo(
            lambda r: pre.compose(r).compose(pre),
            True,
            name,
            lambda s: bool_matmul(bool_matmul(pre.matrix, s), pre.matrix),
        )
    if isinstance(t, Ctx):
        env.context_library(t.name)
        return RelEndo(
            lambda r: Relation(_ctx_matrix(env, t.name, r.matrix)),
            True,
            name,
            lambda s: np.stack([_ctx_matrix(env, t.name, m) for m in s]) if len(s) else s,
        )
    raise TypeError(f"not an up-to term: {t!r}")


def eval_upto(t: UptoTerm, r: Relation, env: Env) -> Relation:
    return to_endo(t, env)(r)


# ------------------------------------------------------------ weight preservation

@dataclass
class WpReport:
    term: str
    family: str
    structural: bool
    reason: str
    bounded: CheckReport | None

    @property
    def ok(self) -> bool:
        return self.structural or (self.bounded is not None and self.bounded.ok)

    @property
    def scope(self) -> str:
        if self.structural:
            return "structural"
        return self.bounded.scope if self.bounded is not None else "unchecked"

    def to_text(self) -> str:
        head = f"{self.term} weight-preserving for {self.family}: {'yes' if self.ok else 'NO'} ({self.scope})"
        lines = [head, f"  structural: {self.structural} ({self.reason})"]
        if self.bounded is not None:
            lines += ["  " + ln for ln in self.bounded.to_text().splitlines()]
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "term": self.term,
            "family": self.family,
            "ok": self.ok,
            "structural": self.structural,
            "reason": self.reason,
            "bounded": None if self.bounded is None else self.bounded.to_dict(),
        }


def structural_wp(t: UptoTerm, kind: FamilyKind, env: Env) -> tuple[bool, str]:
    """Derive weight preservation from the closure rules: id, constants below the
    preorder, composition, union, chaining, reflexive-transitive closure, and
    closure under a finer preorder. Context closure is never structural."""
    if isinstance(t, Id):
        return True, "identity"
    if isinstance(t, Const):
        try:
            ok = env.relation(t.name) <= env.preorder(kind)
        except PowersetCapExceeded:
            return False, f"const({t.name}): preorder undecided at this scale"
        return ok, f"const({t.name}) {'is' if ok else 'is not'} below the {kind.value} preorder"
    if isinstance(t, Pre):
        if t.family is kind:
            return True, f"closure under the {kind.value} preorder"
        try:
            ok = env.preorder(t.family) <= env.preorder(kind)
        except PowersetCapExceeded:
            return False, f"pre({t.family.value}): preorder undecided at this scale"
        return ok, f"{t.family.value} preorder {'is' if ok else 'is not'} included in the {kind.value} preorder"
    if isinstance(t, Ctx):
        return False, f"ctx({t.name}) has no structural argument"
    if isinstance(t, Comp):
        parts = [t.outer, t.inner]
    elif isinstance(t, Chain2):
        parts = [t.left, t.right]
    elif isinstance(t, Union):
        parts = list(t.parts)
    else:
        parts = [t.body]
    for p in parts:
        ok, why = structural_wp(p, kind, env)
        if not ok:
            return False, why
    return True, f"{type(t).__name__.lower()} of weight-preserving parts"


def check_wp(
    t: UptoTerm, fam: FamilyLike, lts: Lts, n_max: int, env: Env | None = None, rng: random.Random | None = None
) -> WpReport:
    """Weight preservation of ``t`` is the ap property for the family's approximant chain.

    The bounded check is extended to the chain's stabilization index when that
    is known, which makes its verdict total.
    """
    env = env or Env(lts)
    kind = as_family(fam, lts).kind
    structural, reason = structural_wp(t, kind, env)
    chain = approximant_chain(lts, kind, env.cap)
    bound = n_max
    if chain.stabilization_index is not None:
        bound = max(n_max, chain.stabilization_index)
    report = check_ap(to_endo(t, env), chain, bound, method="monotone", rng=rng)
    return WpReport(format_upto(t), kind.value, structural, reason, report)


# ----------------------------------------------------------------- syntax

class UptoSyntaxError(ValueError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"at position {pos}: {message}")
        self.pos = pos


_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_.\-]*")
_ARITY = {"comp": 2, "chain": 2, "star": 1, "union": None}


def parse_upto(text: str) -> UptoTerm:
    pos = 0

    def skip():
        nonlocal pos
        while pos < len(text) and text[pos].isspace():
            pos += 1

    def expect(ch: str):
        nonlocal pos
        skip()
        if not text.startswith(ch, pos):
            found = text[pos : pos + 8] or "end of input"
            raise UptoSyntaxError(f"expected {ch!r}, found {found!r}", pos)
        pos += 1

    def name() -> tuple[str, int]:
        nonlocal pos
        skip()
        m = _NAME.match(text, pos)
        if not m:
            raise UptoSyntaxError("expected a name", pos)
        pos = m.end()
        return m.group(), m.start()

    def term() -> UptoTerm:
        nonlocal pos
        word, start = name()
        if word == "id":
            return Id()
        if word in ("const", "ctx", "pre"):
            expect("(")
            arg, at = name()
            expect(")")
            if word == "const":
                return Const(arg)
            if word == "ctx":
                return Ctx(arg)
            try:
                return Pre(FamilyKind.parse(arg))
            except ValueError as exc:
                raise UptoSyntaxError(str(exc), at) from None
        if word not in _ARITY:
            raise UptoSyntaxError(f"unknown combinator {word!r}", start)
        expect("(")
        args = [term()]
        while True:
            skip()
            if text.startswith(",", pos):
                pos += 1
                args.append(term())
            else:
                break
        expect(")")
        arity = _ARITY[word]
        if arity is not None and len(args) != arity:
            raise UptoSyntaxError(f"{word} takes {arity} argument(s), got {len(args)}", start)
        if word == "comp":
            return Comp(*args)
        if word == "chain":
            return Chain2(*args)
        if word == "star":
            return Star(args[0])
        return Union(tuple(args))

    t = term()
    skip()
    if pos != len(text):
        raise UptoSyntaxError(f"unexpected trailing input {text[pos:pos + 8]!r}", pos)
    return t


def format_upto(t: UptoTerm) -> str:
    if isinstance(t, Id):
        return "id"
    if isinstance(t, Const):
        return f"const({t.name})"
    if isinstance(t, Ctx):
        return f"ctx({t.name})"
    if isinstance(t, Pre):
        return f"pre({t.family.value})"
    if isinstance(t, Comp):
        return f"comp({format_upto(t.outer)}, {format_upto(t.inner)})"
    if isinstance(t, Chain2):
        return f"chain({format_upto(t.left)}, {format_upto(t.right)})"
    if isinstance(t, Star):
        return f"star({format_upto(t.body)})"
    return "union(" + ", ".join(format_upto(p) for p in t.parts) + ")"
