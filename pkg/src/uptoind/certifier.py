"""Certify ``R <= preorder`` from compliance, semi-progression and a weight-preserving up-to term.

If ``R`` preserves the family's atoms pairwise and every move of a left
component is matched by the right component into ``f(R)``, then ``R`` is a
post-fixed point of ``s . f`` where ``s`` is the family functional. ``s`` is valid
for the approximant chain and a weight-preserving ``f`` is ap for it, so the
composite is valid and ``R`` lies below every approximant.

The method is sound but incomplete: a rejection does not mean ``R`` is outside
the preorder.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

import numpy as np

from .lattice import RelEndo
from .lts import Lts
from .relation import Relation
from .spectrum import FamilyLike, as_family, compliance_matrix, compliant, simulation_step
from .upto import Env, UptoTerm, WpReport, check_wp, format_upto, parse_upto, to_endo

SCHEMA = "uptoind/certificate/1"


def semi_progress(lts: Lts, r: Relation, s: Relation) -> tuple[int, int, int, int] | None:
    """None if ``r`` semi-progresses to ``s``, else the first unmatched ``(P, Q, action, P')``."""
    for p, q in r:
        for a in lts.actions:
            for p2 in lts.successors(p, a):
                if not any((p2, q2) in s for q2 in lts.successors(q, a)):
                    return p, q, a, p2
    return None


def s_theta(lts: Lts, fam: FamilyLike, r: Relation) -> Relation:
    """Pairs whose moves are matched into ``r`` and whose atoms transfer left to right."""
    kind = as_family(fam, lts).kind
    return Relation(simulation_step(lts, r.matrix) & compliance_matrix(lts, kind))


def s_theta_endo(lts: Lts, fam: FamilyLike) -> RelEndo:
    kind = as_family(fam, lts).kind
    comp = compliance_matrix(lts, kind)
    return RelEndo(
        lambda r: s_theta(lts, kind, r),
        monotone=True,
        name=f"s[{kind.value}]",
        batch=lambda stack: simulation_step(lts, stack) & comp,
    )


@dataclass
class Obligation:
    pair: tuple[int, int]
    action: str
    target: int
    matched: int | None

    @property
    def ok(self) -> bool:
        return self.matched is not None


@dataclass
class Certificate:
    family: str
    relation: Relation
    upto: str
    image: Relation
    obligations: list[Obligation]
    compliance: tuple | None
    wp: WpReport | None
    state_names: list[str] = field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return self.compliance is None and all(o.ok for o in self.obligations) and self.wp is not None and self.wp.ok

    @property
    def status(self) -> str:
        return "Accepted" if self.accepted else "Rejected"

    def _name(self, p: int) -> str:
        return self.state_names[p] if self.state_names else str(p)

    def first_failure(self) -> str | None:
        if self.compliance is not None:
            p, q, atom = self.compliance
            from .observables import format_formula

            return f"compliance: {self._name(p)} satisfies {format_formula(atom)} but {self._name(q)} does not"
        for o in self.obligations:
            if not o.ok:
                p, q = o.pair
                return (
                    f"progression: {self._name(p)} -{o.action}-> {self._name(o.target)} "
                    f"has no match from {self._name(q)} into f(R)"
                )
        if self.wp is not None and not self.wp.ok:
            lv = self.wp.bounded.failure if self.wp.bounded else None
            where = f" at n={lv.n}, pair {lv.witness}" if lv else ""
            return f"weight preservation of {self.upto} fails{where}"
        return None

    def derivation(self) -> list[str]:
        if not self.accepted:
            return []
        return [
            f"R preserves every atomic observable of the {self.family} family pairwise",
            f"R semi-progresses to f(R) for f = {self.upto} ({len(self.obligations)} obligations)",
            f"f is weight-preserving for the {self.family} preorder ({self.wp.scope})",
            "so R <= s(f(R)): R is a post-fixed point of s . f",
            "s is valid for the approximant chain and f is ap for it, hence s . f is valid",
            f"every post-fixed point of a valid function is below the meet: R <= {self.family} preorder",
        ]

    def to_text(self) -> str:
        lines = [
            f"certificate: {self.status}",
            f"family: {self.family}",
            f"up-to: {self.upto}",
            f"relation: {len(self.relation)} pairs",
        ]
        failure = self.first_failure()
        if failure:
            lines.append(f"reason: {failure}")
        lines.append(f"compliance: {'pass' if self.compliance is None else 'FAIL'}")
        lines.append(f"obligations: {sum(o.ok for o in self.obligations)}/{len(self.obligations)} matched")
        for o in self.obligations:
            p, q = o.pair
            m = self._name(o.matched) if o.ok else "FAIL"
            lines.append(
                f"  ({self._name(p)}, {self._name(q)}) -{o.action}-> {self._name(o.target)} matched by {m}"
            )
        if self.wp is not None:
            lines += self.wp.to_text().splitlines()
        for step in self.derivation():
            lines.append(f"  => {step}")
        if not self.accepted:
            lines.append("note: rejection does not imply R is outside the preorder")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "status": self.status,
            "family": self.family,
            "upto": self.upto,
            "relation": [[self._name(p), self._name(q)] for p, q in self.relation],
            "compliance": None
            if self.compliance is None
            else {"pair": [self._name(self.compliance[0]), self._name(self.compliance[1])]},
            "obligations": [
                {
                    "pair": [self._name(o.pair[0]), self._name(o.pair[1])],
                    "action": o.action,
                    "target": self._name(o.target),
                    "matched": None if o.matched is None else self._name(o.matched),
                }
                for o in self.obligations
            ],
            "wp": None if self.wp is None else self.wp.to_dict(),
            "reason": self.first_failure(),
            "derivation": self.derivation(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def certify(
    lts: Lts,
    fam: FamilyLike,
    r: Relation,
    t: UptoTerm | str,
    n_max: int = 8,
    env: Env | None = None,
    rng: random.Random | None = None,
) -> Certificate:
    """Check compliance of ``r``, ``r`` semi-progressing to ``f(r)``, and weight preservation of ``f``."""
    kind = as_family(fam, lts).kind
    if isinstance(t, str):
        t = parse_upto(t)
    env = env or Env(lts)
    image = to_endo(t, env)(r)
    obligations = []
    for p, q in r:
        for a in lts.actions:
            for p2 in lts.successors(p, a):
                match = next((q2 for q2 in lts.successors(q, a) if (p2, q2) in image), None)
                obligations.append(Obligation((p, q), lts.alphabet[a], p2, match))
    violation = compliant(lts, r, kind)
    wp = check_wp(t, kind, lts, n_max, env, rng)
    names = list(lts.state_names) if lts.state_names is not None else []
    return Certificate(kind.value, r, format_upto(t), image, obligations, violation, wp, names)


@dataclass
class Consequence:
    relation: Relation
    wp: WpReport


def transfer(cert: Certificate, lts: Lts, t: UptoTerm | str, env: Env | None = None, n_max: int = 8) -> Consequence:
    """From an accepted certificate for ``R`` and a weight-preserving ``g``, conclude ``g(R) <= preorder``.

    ``R`` lies below every approximant, and ``g`` keeps anything below an
    approximant below it, so ``g(R)`` does too.
    """
    if not cert.accepted:
        raise ValueError("only accepted certificates can be transferred")
    if isinstance(t, str):
        t = parse_upto(t)
    env = env or Env(lts)
    wp = check_wp(t, cert.family, lts, n_max, env)
    if not wp.ok:
        raise ValueError(f"{format_upto(t)} is not weight-preserving for {cert.family}")
    return Consequence(to_endo(t, env)(cert.relation), wp)


def post_fixed_of_composite(lts: Lts, fam: FamilyLike, r: Relation, t: UptoTerm, env: Env) -> bool:
    """``r <= s(f(r))``; equivalent to compliance plus semi-progression to ``f(r)``."""
    image = to_endo(t, env)(r)
    return bool(np.all(~r.matrix | s_theta(lts, fam, image).matrix))
