"""Finite CCS without synchronization: ``0``, prefix, choice and interleaving.

States of the generated LTS are terms in normal form: nested sums and parallel
compositions are flattened and their operands sorted, so ``a.0 + b.0`` and
``b.0 + a.0`` are the same state.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

from .lts import Lts

DEFAULT_STATE_CAP = 10_000


@dataclass(frozen=True)
class Nil:
    pass


@dataclass(frozen=True)
class Hole:
    pass


@dataclass(frozen=True)
class Prefix:
    action: str
    cont: "Term"


@dataclass(frozen=True)
class Sum:
    children: tuple["Term", ...]


@dataclass(frozen=True)
class Par:
    children: tuple["Term", ...]


Term = Nil | Hole | Prefix | Sum | Par
NIL = Nil()
HOLE = Hole()


class CcsSyntaxError(ValueError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"at position {pos}: {message}")
        self.pos = pos


class StateCapExceeded(RuntimeError):
    pass


def _key(t: Term) -> tuple:
    if isinstance(t, Nil):
        return (0,)
    if isinstance(t, Hole):
        return (1,)
    if isinstance(t, Prefix):
        return (2, t.action, _key(t.cont))
    return (3 if isinstance(t, Sum) else 4, tuple(_key(c) for c in t.children))


def normalize(t: Term) -> Term:
    if isinstance(t, Prefix):
        return Prefix(t.action, normalize(t.cont))
    if isinstance(t, (Sum, Par)):
        kind = type(t)
        flat = []
        for c in t.children:
            c = normalize(c)
            flat.extend(c.children if isinstance(c, kind) else (c,))
        flat.sort(key=_key)
        return kind(tuple(flat))
    return t


def holes(t: Term) -> int:
    if isinstance(t, Hole):
        return 1
    if isinstance(t, Prefix):
        return holes(t.cont)
    if isinstance(t, (Sum, Par)):
        return sum(holes(c) for c in t.children)
    return 0


def plug(context: Term, t: Term) -> Term:
    """``C[t]``, normalized."""

    def go(c: Term) -> Term:
        if isinstance(c, Hole):
            return t
        if isinstance(c, Prefix):
            return Prefix(c.action, go(c.cont))
        if isinstance(c, (Sum, Par)):
            return type(c)(tuple(go(x) for x in c.children))
        return c

    return normalize(go(context))


def prefix_count(t: Term) -> int:
    if isinstance(t, Prefix):
        return 1 + prefix_count(t.cont)
    if isinstance(t, (Sum, Par)):
        return sum(prefix_count(c) for c in t.children)
    return 0


def transitions(t: Term) -> list[tuple[str, Term]]:
    """One-step SOS moves of a normalized term; results are normalized."""
    if isinstance(t, Prefix):
        return [(t.action, t.cont)]
    if isinstance(t, Sum):
        return [m for c in t.children for m in transitions(c)]
    if isinstance(t, Par):
        out = []
        for i, c in enumerate(t.children):
            for a, c2 in transitions(c):
                out.append((a, normalize(Par(t.children[:i] + (c2,) + t.children[i + 1 :]))))
        return out
    if isinstance(t, Hole):
        raise ValueError("a context with a hole has no transitions")
    return []


def sos_lts(terms: Sequence[Term], cap: int = DEFAULT_STATE_CAP) -> tuple[Lts, dict[Term, int]]:
    """The LTS of all terms reachable from ``terms``; seeds get the lowest state numbers."""
    index: dict[Term, int] = {}
    order: list[Term] = []
    queue: deque[Term] = deque()

    def visit(t: Term) -> int:
        if t not in index:
            if len(order) >= cap:
                raise StateCapExceeded(f"more than {cap} reachable terms")
            index[t] = len(order)
            order.append(t)
            queue.append(t)
        return index[t]

    for t in terms:
        visit(normalize(t))
    alphabet: list[str] = []
    act: dict[str, int] = {}
    triples = []
    while queue:
        t = queue.popleft()
        src = index[t]
        for a, t2 in transitions(t):
            if a not in act:
                act[a] = len(alphabet)
                alphabet.append(a)
            triples.append((src, act[a], visit(t2)))
    names = [format_term(t) for t in order]
    lts = Lts(alphabet, len(order), triples, initial=0 if order else None, state_names=names)
    return lts, index


def ctx_closure(pairs: Iterable[tuple[Term, Term]], contexts: Sequence[Term]) -> set[tuple[Term, Term]]:
    """``r`` together with ``(C[p], C[q])`` for every pair of ``r`` and context ``C``."""
    pairs = {(normalize(p), normalize(q)) for p, q in pairs}
    out = set(pairs)
    for c in contexts:
        for p, q in pairs:
            out.add((plug(c, p), plug(c, q)))
    return out


# ----------------------------------------------------------------- syntax

_TOKEN = re.compile(r"\s*(?:(?P<hole>\[\])|(?P<nil>0)(?![A-Za-z0-9_'])|(?P<ident>[A-Za-z_][A-Za-z0-9_']*)|(?P<op>[.+|()]))")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while True:
            while pos < len(text) and text[pos].isspace():
                pos += 1
            if pos >= len(text):
                break
            m = _TOKEN.match(text, pos)
            if not m:
                raise CcsSyntaxError(f"unexpected character {text[pos]!r}", pos)
            kind = m.lastgroup
            start = m.start(kind)
            self.tokens.append((kind, m.group(kind), start))
            pos = m.end()
        self.i = 0

    def peek(self) -> tuple[str, str, int] | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def where(self) -> int:
        tok = self.peek()
        return tok[2] if tok else len(self.text)

    def accept(self, value: str) -> bool:
        tok = self.peek()
        if tok and tok[0] == "op" and tok[1] == value:
            self.i += 1
            return True
        return False

    def expect(self, value: str) -> None:
        if not self.accept(value):
            tok = self.peek()
            found = tok[1] if tok else "end of input"
            raise CcsSyntaxError(f"expected {value!r}, found {found!r}", self.where())

    def par(self) -> Term:
        parts = [self.sum()]
        while self.accept("|"):
            parts.append(self.sum())
        return parts[0] if len(parts) == 1 else Par(tuple(parts))

    def sum(self) -> Term:
        parts = [self.pre()]
        while self.accept("+"):
            parts.append(self.pre())
        return parts[0] if len(parts) == 1 else Sum(tuple(parts))

    def pre(self) -> Term:
        tok = self.peek()
        if tok is None:
            raise CcsSyntaxError("unexpected end of input", len(self.text))
        kind, value, pos = tok
        if kind == "nil":
            self.i += 1
            return NIL
        if kind == "hole":
            self.i += 1
            return HOLE
        if kind == "ident":
            self.i += 1
            self.expect(".")
            return Prefix(value, self.pre())
        if self.accept("("):
            t = self.par()
            self.expect(")")
            return t
        raise CcsSyntaxError(f"unexpected {value!r}", pos)


def _parse(text: str) -> Term:
    p = _Parser(text)
    t = p.par()
    if p.peek() is not None:
        raise CcsSyntaxError(f"unexpected {p.peek()[1]!r}", p.where())
    return t


def parse_ccs(text: str) -> Term:
    """Parse a closed term; ``+`` binds tighter than ``|`` and looser than prefix."""
    t = _parse(text)
    if holes(t):
        raise CcsSyntaxError("holes are only allowed in contexts", text.index("[]"))
    return t


def parse_context(text: str) -> Term:
    t = _parse(text)
    if holes(t) != 1:
        raise CcsSyntaxError(f"a context needs exactly one hole, found {holes(t)}", 0)
    return t


def format_term(t: Term, prec: int = 0) -> str:
    if isinstance(t, Nil):
        return "0"
    if isinstance(t, Hole):
        return "[]"
    if isinstance(t, Prefix):
        return f"{t.action}.{format_term(t.cont, 2)}"
    if isinstance(t, Sum):
        s = " + ".join(format_term(c, 2) for c in t.children)
        return f"({s})" if prec > 1 else s
    s = " | ".join(format_term(c, 1) for c in t.children)
    return f"({s})" if prec > 0 else s


def _parse_definitions(text: str, parse_one) -> dict[str, Term]:
    defs: dict[str, Term] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        name, eq, rhs = body.partition("=")
        name = name.strip()
        if not eq or not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_']*", name):
            raise CcsSyntaxError(f"line {lineno}: expected 'NAME = TERM'", 0)
        if name in defs:
            raise CcsSyntaxError(f"line {lineno}: {name} defined twice", 0)
        try:
            defs[name] = parse_one(rhs)
        except CcsSyntaxError as exc:
            raise CcsSyntaxError(f"line {lineno}: {exc}", exc.pos) from None
    return defs


def parse_ccs_file(text: str) -> dict[str, Term]:
    return _parse_definitions(text, parse_ccs)


def parse_context_file(text: str) -> dict[str, Term]:
    return _parse_definitions(text, parse_context)


def format_definitions(defs: dict[str, Term]) -> str:
    return "".join(f"{name} = {format_term(t)}\n" for name, t in defs.items())
