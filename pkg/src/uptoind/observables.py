"""Positive modal observables: diamonds, finite conjunctions and local atoms.

Formulas refer to actions by label, so one formula can be evaluated on any LTS
whose alphabet contains its labels.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from .lts import Lts


@dataclass(frozen=True)
class Atom:
    """Local atomic observable: every action of ``must`` enabled, every action of ``must_not`` refused."""

    must: frozenset[str] = frozenset()
    must_not: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "must", frozenset(self.must))
        object.__setattr__(self, "must_not", frozenset(self.must_not))
        if self.must & self.must_not:
            raise ValueError(f"atom requires and refuses {sorted(self.must & self.must_not)}")


@dataclass(frozen=True)
class Diamond:
    action: str
    body: "Observable"


@dataclass(frozen=True)
class Conj:
    children: tuple["Observable", ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))


Observable = Atom | Diamond | Conj

TT = Conj(())


def ref(label: str) -> Atom:
    return Atom(frozenset(), frozenset([label]))


def refusal(labels: Iterable[str]) -> Atom:
    return Atom(frozenset(), frozenset(labels))


def ready(labels: Iterable[str], alphabet: Iterable[str]) -> Atom:
    labels = frozenset(labels)
    return Atom(labels, frozenset(alphabet) - labels)


def diamonds(labels: Sequence[str], body: Observable = TT) -> Observable:
    """``<a1><a2>...<ak> body``."""
    for label in reversed(labels):
        body = Diamond(label, body)
    return body


def labels_of(theta: Observable) -> set[str]:
    if isinstance(theta, Atom):
        return set(theta.must | theta.must_not)
    if isinstance(theta, Diamond):
        return {theta.action} | labels_of(theta.body)
    return set().union(*(labels_of(c) for c in theta.children))


def weight(theta: Observable) -> int:
    if isinstance(theta, Diamond):
        return 1 + weight(theta.body)
    if isinstance(theta, Conj):
        return max((weight(c) for c in theta.children), default=0)
    return 0


def check_labels(lts: Lts, theta: Observable) -> None:
    unknown = labels_of(theta) - set(lts.alphabet)
    if unknown:
        raise KeyError(f"formula uses actions not in the alphabet: {sorted(unknown)}")


def extension(lts: Lts, theta: Observable, _memo: dict | None = None) -> frozenset[int]:
    """The set of states satisfying ``theta``."""
    if _memo is None:
        check_labels(lts, theta)
        _memo = {}
    hit = _memo.get(theta)
    if hit is not None:
        return hit
    if isinstance(theta, Atom):
        must = {lts.action(a) for a in theta.must}
        must_not = {lts.action(a) for a in theta.must_not}
        ext = frozenset(p for p in lts.states if must <= lts.enabled(p) and not must_not & lts.enabled(p))
    elif isinstance(theta, Diamond):
        mu = lts.action(theta.action)
        body = extension(lts, theta.body, _memo)
        ext = frozenset(p for p in lts.states if any(q in body for q in lts.successors(p, mu)))
    else:
        ext = frozenset(lts.states)
        for child in theta.children:
            ext &= extension(lts, child, _memo)
    _memo[theta] = ext
    return ext


def sat(lts: Lts, p: int, theta: Observable) -> bool:
    return p in extension(lts, theta)


def sat_n(lts: Lts, p: int, theta: Observable, n: int) -> bool:
    return weight(theta) <= n and sat(lts, p, theta)


def witness_path(lts: Lts, p: int, theta: Observable) -> list[tuple[str, int]] | None:
    """A transition path ``[(label, state), ...]`` along the first diamond spine proving ``p |= theta``.

    Conjunctions follow their first diamond child. Returns None when ``p`` does
    not satisfy ``theta``.
    """
    memo: dict = {}
    if p not in extension(lts, theta, None):
        return None
    path = []
    while True:
        if isinstance(theta, Conj):
            nxt = next((c for c in theta.children if isinstance(c, (Diamond, Conj))), None)
            if nxt is None:
                return path
            theta = nxt
            continue
        if isinstance(theta, Atom):
            return path
        body = extension(lts, theta.body, memo)
        q = next(q for q in lts.successors(p, lts.action(theta.action)) if q in body)
        path.append((theta.action, q))
        p, theta = q, theta.body


def sort_key(theta: Observable) -> tuple:
    """Structural total order used by canonical forms."""
    if isinstance(theta, Atom):
        return (0, tuple(sorted(theta.must)), tuple(sorted(theta.must_not)))
    if isinstance(theta, Diamond):
        return (1, theta.action, sort_key(theta.body))
    return (2, tuple(sort_key(c) for c in theta.children))


def canonical(theta: Observable) -> Observable:
    """Flatten nested conjunctions, sort and dedupe conjuncts, unwrap singleton conjunctions."""
    if isinstance(theta, Diamond):
        return Diamond(theta.action, canonical(theta.body))
    if isinstance(theta, Atom):
        return theta
    flat: dict[tuple, Observable] = {}
    for child in theta.children:
        child = canonical(child)
        for c in child.children if isinstance(child, Conj) else (child,):
            flat[sort_key(c)] = c
    if len(flat) == 1:
        return next(iter(flat.values()))
    return Conj(tuple(flat[k] for k in sorted(flat)))


def subformulas(theta: Observable) -> Iterable[Observable]:
    yield theta
    if isinstance(theta, Diamond):
        yield from subformulas(theta.body)
    elif isinstance(theta, Conj):
        for c in theta.children:
            yield from subformulas(c)


def downward_close(thetas: Iterable[Observable]) -> set[Observable]:
    """Smallest superset closed under diamond bodies and conjunction children."""
    out: set[Observable] = set()
    for theta in thetas:
        out.update(subformulas(theta))
    return out


# ---------------------------------------------------------------- text syntax

class FormulaSyntaxError(ValueError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"at position {pos}: {message}")
        self.pos = pos


_BARE = re.compile(r'[^\s<>(){},;"#]+')
_KEYWORDS = ("tt", "and", "ref", "ready", "loc")


class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self, s: str) -> bool:
        self.skip()
        return self.text.startswith(s, self.pos)

    def eat(self, s: str) -> None:
        if not self.peek(s):
            found = self.text[self.pos : self.pos + 10] or "end of input"
            raise FormulaSyntaxError(f"expected {s!r}, found {found!r}", self.pos)
        self.pos += len(s)

    def keyword(self) -> str | None:
        self.skip()
        for kw in _KEYWORDS:
            end = self.pos + len(kw)
            if self.text.startswith(kw, self.pos) and not (end < len(self.text) and (self.text[end].isalnum() or self.text[end] == "_")):
                return kw
        return None

    def label(self) -> str:
        self.skip()
        if self.peek('"'):
            start = self.pos
            self.pos += 1
            out = []
            while self.pos < len(self.text) and self.text[self.pos] != '"':
                if self.text[self.pos] == "\\" and self.pos + 1 < len(self.text):
                    self.pos += 1
                out.append(self.text[self.pos])
                self.pos += 1
            if self.pos >= len(self.text):
                raise FormulaSyntaxError("unterminated quoted label", start)
            self.pos += 1
            return "".join(out)
        m = _BARE.match(self.text, self.pos)
        if not m:
            raise FormulaSyntaxError("expected an action label", self.pos)
        self.pos = m.end()
        return m.group()

    def label_set(self) -> list[str]:
        self.eat("{")
        out = []
        if not self.peek("}"):
            out.append(self.label())
            while self.peek(","):
                self.eat(",")
                out.append(self.label())
        self.eat("}")
        return out

    def at_end(self) -> bool:
        self.skip()
        return self.pos >= len(self.text)


def parse_formula(text: str, alphabet: Sequence[str] | None = None) -> Observable:
    """Parse ``tt | <a> phi | and(phi, ...) | ref(a) | ref({a,...}) | ready({a,...}) | loc({A};{B})``.

    ``alphabet`` is needed to desugar ``ready`` and, when given, every label is
    checked against it.
    """
    sc = _Scanner(text)
    theta = _parse(sc, alphabet)
    if not sc.at_end():
        raise FormulaSyntaxError(f"unexpected trailing input {sc.text[sc.pos:sc.pos + 10]!r}", sc.pos)
    if alphabet is not None:
        unknown = labels_of(theta) - set(alphabet)
        if unknown:
            raise KeyError(f"unknown action labels {sorted(unknown)}")
    return theta


def _parse(sc: _Scanner, alphabet) -> Observable:
    sc.skip()
    start = sc.pos
    if sc.peek("<"):
        sc.eat("<")
        label = sc.label()
        sc.eat(">")
        return Diamond(label, _parse(sc, alphabet))
    kw = sc.keyword()
    if kw is None:
        raise FormulaSyntaxError("expected a formula", start)
    sc.pos += len(kw)
    if kw == "tt":
        return TT
    sc.eat("(")
    if kw == "and":
        children = []
        if not sc.peek(")"):
            children.append(_parse(sc, alphabet))
            while sc.peek(","):
                sc.eat(",")
                children.append(_parse(sc, alphabet))
        sc.eat(")")
        return Conj(tuple(children))
    if kw == "ref":
        labels = sc.label_set() if sc.peek("{") else [sc.label()]
        sc.eat(")")
        return refusal(labels)
    if kw == "ready":
        labels = sc.label_set()
        sc.eat(")")
        if alphabet is None:
            raise FormulaSyntaxError("ready(...) needs a known alphabet", start)
        return ready(labels, alphabet)
    must = sc.label_set()
    sc.eat(";")
    must_not = sc.label_set()
    sc.eat(")")
    try:
        return Atom(frozenset(must), frozenset(must_not))
    except ValueError as exc:
        raise FormulaSyntaxError(str(exc), start) from None


def _fmt_label(label: str) -> str:
    if _BARE.fullmatch(label):
        return label
    return '"' + label.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _fmt_set(labels: Iterable[str]) -> str:
    return "{" + ",".join(_fmt_label(a) for a in sorted(labels)) + "}"


def format_formula(theta: Observable, alphabet: Sequence[str] | None = None) -> str:
    if isinstance(theta, Diamond):
        return f"<{_fmt_label(theta.action)}>{format_formula(theta.body, alphabet)}"
    if isinstance(theta, Conj):
        if not theta.children:
            return "tt"
        return "and(" + ", ".join(format_formula(c, alphabet) for c in theta.children) + ")"
    if not theta.must:
        if len(theta.must_not) == 1:
            return f"ref({_fmt_label(next(iter(theta.must_not)))})"
        if theta.must_not:
            return f"ref({_fmt_set(theta.must_not)})"
    if alphabet is not None and theta.must | theta.must_not == set(alphabet):
        return f"ready({_fmt_set(theta.must)})"
    return f"loc({_fmt_set(theta.must)};{_fmt_set(theta.must_not)})"


def strip_comment(line: str) -> str:
    in_quote = False
    escaped = False
    for i, ch in enumerate(line):
        if escaped:
            escaped = False
        elif ch == "\\":
            escaped = in_quote
        elif ch == '"':
            in_quote = not in_quote
        elif ch == "#" and not in_quote:
            return line[:i]
    return line


def parse_obs_file(text: str, alphabet: Sequence[str] | None = None) -> list[Observable]:
    """One formula per line; ``#`` starts a comment."""
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        body = strip_comment(line).strip()
        if not body:
            continue
        try:
            out.append(parse_formula(body, alphabet))
        except FormulaSyntaxError as exc:
            raise FormulaSyntaxError(f"line {lineno}: {exc}", exc.pos) from None
    return out
