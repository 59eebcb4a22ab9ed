"""Command-line front end.

Exit codes: 0 accepted/true, 1 rejected/false, 2 usage, parse or resource error.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from dataclasses import dataclass
from pathlib import Path

from . import ccs
from .certifier import certify
from .lts import AutParseError, Lts, disjoint_union, parse_aut, serialize_aut
from .observables import FormulaSyntaxError, format_formula, parse_formula, parse_obs_file, sat, weight, witness_path
from .relation import Relation
from .spectrum import (
    FamilyKind,
    PowersetCapExceeded,
    approximant,
    default_cap,
    distinguishing_observable,
    preorder,
)
from .upto import Env, UnresolvedReference, UptoSyntaxError, check_wp, parse_upto

SCHEMA = "uptoind/1"


class UsageError(Exception):
    pass


@dataclass
class Loaded:
    lts: Lts
    names: dict[str, int]
    terms: list[ccs.Term] | None = None
    contexts: dict[str, list[ccs.Term]] | None = None

    def state(self, token: str) -> int:
        token = token.strip()
        if token in self.names:
            return self.names[token]
        if ":" in token:
            which, _, idx = token.partition(":")
            key = f"{which}:{idx}"
            if key in self.names:
                return self.names[key]
        if token.isdigit() and int(token) < self.lts.state_count:
            return int(token)
        raise UsageError(f"unknown state {token!r}")

    def name(self, p: int) -> str:
        return self.lts.state_name(p)


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def load(args) -> Loaded:
    if getattr(args, "ccs", None):
        defs = ccs.parse_ccs_file(_read(args.ccs))
        contexts = {}
        if getattr(args, "contexts", None):
            lib = ccs.parse_context_file(_read(args.contexts))
            contexts = {name: [c] for name, c in lib.items()}
            contexts["all"] = list(lib.values())
        seeds = list(defs.values())
        if contexts:
            base, index = ccs.sos_lts(seeds, args.state_cap)
            inv = sorted(index, key=index.get)
            seeds += [ccs.plug(c, t) for t in inv for c in contexts["all"]]
        lts, index = ccs.sos_lts(seeds, args.state_cap)
        names = {name: index[ccs.normalize(t)] for name, t in defs.items()}
        terms = sorted(index, key=index.get)
        return Loaded(lts, names, terms, contexts)
    if not getattr(args, "lts", None):
        raise UsageError("an LTS is required (--lts FILE.aut or --ccs FILE.ccs)")
    l1 = parse_aut(_read(args.lts))
    names = {f"1:{p}": p for p in l1.states}
    if getattr(args, "lts2", None):
        l2 = parse_aut(_read(args.lts2))
        lts, offset = disjoint_union(l1, l2)
        names.update({f"2:{p}": p + offset for p in l2.states})
        return Loaded(lts, names)
    return Loaded(l1, names)


def parse_rel(text: str, loaded: Loaded) -> Relation:
    pairs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].split()
        if not body:
            continue
        if len(body) != 2:
            raise UsageError(f"relation line {lineno}: expected 'P Q'")
        try:
            pairs.append((loaded.state(body[0]), loaded.state(body[1])))
        except UsageError as exc:
            raise UsageError(f"relation line {lineno}: {exc}") from None
    return Relation.from_pairs(loaded.lts.state_count, pairs)


def _pairs(r: Relation, loaded: Loaded) -> list[list[str]]:
    return [[loaded.name(p), loaded.name(q)] for p, q in sorted(r)]


def _emit(args, payload: dict, text: str) -> None:
    if args.format == "json":
        print(json.dumps({"schema": SCHEMA, **payload}, indent=2))
    else:
        print(text)


def _env(args, loaded: Loaded) -> Env:
    relations = {}
    for item in args.const or []:
        name, eq, path = item.partition("=")
        if not eq:
            raise UsageError(f"--const expects NAME=FILE.rel, got {item!r}")
        relations[name] = parse_rel(_read(path), loaded)
    return Env(loaded.lts, relations, loaded.terms, loaded.contexts or {}, args.cap)


def _upto_text(args) -> str:
    if args.upto_file:
        return _read(args.upto_file).strip()
    if args.upto is None:
        raise UsageError("an up-to term is required (--upto TERM or --upto-file FILE)")
    return args.upto


# ----------------------------------------------------------------- commands

def cmd_sat(args) -> int:
    loaded = load(args)
    p = loaded.state(args.state)
    theta = parse_formula(args.formula, loaded.lts.alphabet)
    holds = sat(loaded.lts, p, theta) and (args.n is None or weight(theta) <= args.n)
    payload = {"command": "sat", "state": loaded.name(p), "formula": format_formula(theta, loaded.lts.alphabet),
               "weight": weight(theta), "n": args.n, "holds": holds}
    text = "true" if holds else "false"
    if args.witness and holds:
        path = witness_path(loaded.lts, p, theta)
        payload["witness"] = [[a, loaded.name(q)] for a, q in path]
        text += "\n" + " ".join([loaded.name(p)] + [f"-{a}-> {loaded.name(q)}" for a, q in path])
    _emit(args, payload, text)
    return 0 if holds else 1


def cmd_approx(args) -> int:
    loaded = load(args)
    r = approximant(loaded.lts, args.family, args.n)
    payload = {"command": "approx", "family": args.family.value, "n": args.n, "pairs": _pairs(r, loaded)}
    _emit(args, payload, "\n".join(f"{p} {q}" for p, q in payload["pairs"]))
    return 0


def cmd_preorder(args) -> int:
    loaded = load(args)
    r = preorder(loaded.lts, args.family, args.cap)
    if args.query:
        p, q = (loaded.state(s) for s in args.query)
        related = (p, q) in r
        payload = {"command": "preorder", "family": args.family.value,
                   "query": [loaded.name(p), loaded.name(q)], "related": related}
        text = "true" if related else "false"
        if not related and args.explain:
            from .spectrum import stabilization_index

            k = stabilization_index(loaded.lts, args.family, args.cap)
            theta = distinguishing_observable(loaded.lts, p, q, args.family, k)
            shown = format_formula(theta, loaded.lts.alphabet) if theta is not None else None
            payload["distinguishing"] = shown
            text += f"\ndistinguished by {shown}"
        _emit(args, payload, text)
        return 0 if related else 1
    payload = {"command": "preorder", "family": args.family.value, "pairs": _pairs(r, loaded)}
    _emit(args, payload, "\n".join(f"{p} {q}" for p, q in payload["pairs"]))
    return 0


def cmd_certify(args) -> int:
    loaded = load(args)
    if not args.rel:
        raise UsageError("--rel is required")
    r = parse_rel(_read(args.rel), loaded)
    env = _env(args, loaded)
    cert = certify(loaded.lts, args.family, r, parse_upto(_upto_text(args)), args.nmax, env,
                   rng=random.Random(args.seed))
    if args.format == "json":
        print(json.dumps({"schema": SCHEMA, "command": "certify", "certificate": cert.to_dict()}, indent=2))
    else:
        print(cert.to_text())
    return 0 if cert.accepted else 1


def cmd_check_wp(args) -> int:
    loaded = load(args)
    env = _env(args, loaded)
    report = check_wp(parse_upto(_upto_text(args)), args.family, loaded.lts, args.nmax, env, random.Random(args.seed))
    _emit(args, {"command": "check-wp", "report": report.to_dict()}, report.to_text())
    return 0 if report.ok else 1


def cmd_ccs_lts(args) -> int:
    defs = ccs.parse_ccs_file(_read(args.input))
    lts, index = ccs.sos_lts(list(defs.values()), args.state_cap)
    text = serialize_aut(lts)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    mapping = {name: index[ccs.normalize(t)] for name, t in defs.items()}
    if args.out:
        payload = {"command": "ccs-lts", "states": lts.state_count, "transitions": lts.transition_count,
                   "names": mapping, "terms": list(lts.state_names)}
        _emit(args, payload, "\n".join(f"{name} = state {p}" for name, p in mapping.items()))
    return 0


def cmd_lint(args) -> int:
    problems = []
    alphabet = None
    for path in args.files:
        suffix = Path(path).suffix
        try:
            text = _read(path)
            if suffix == ".aut":
                alphabet = parse_aut(text).alphabet
            elif suffix == ".obs":
                parse_obs_file(text, alphabet)
            elif suffix == ".ccs":
                ccs.parse_ccs_file(text)
            elif suffix == ".ctx":
                ccs.parse_context_file(text)
            elif suffix == ".upto":
                parse_upto(text.strip())
            elif suffix == ".rel":
                for lineno, line in enumerate(text.splitlines(), 1):
                    if len(line.split("#", 1)[0].split()) not in (0, 2):
                        raise UsageError(f"line {lineno}: expected 'P Q'")
            else:
                raise UsageError(f"unknown file kind {suffix!r}")
        except (UsageError, AutParseError, FormulaSyntaxError, ccs.CcsSyntaxError, UptoSyntaxError, KeyError) as exc:
            problems.append(f"{path}: {exc}")
    payload = {"command": "lint", "files": args.files, "problems": problems}
    _emit(args, payload, "\n".join(problems) if problems else "ok")
    return 1 if problems else 0


# ------------------------------------------------------------------- parser

def _family(text: str) -> FamilyKind:
    try:
        return FamilyKind.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _nonneg(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized spot checks")
    common.add_argument("--cap", type=int, default=None, help="powerset cap (default $UPTOIND_CAP or 4096)")
    common.add_argument("--state-cap", type=int, default=ccs.DEFAULT_STATE_CAP)

    source = argparse.ArgumentParser(add_help=False)
    source.add_argument("--lts", help="Aldebaran .aut file")
    source.add_argument("--lts2", help="second .aut file, placed beside the first")
    source.add_argument("--ccs", help=".ccs definitions file (NAME = TERM per line)")
    source.add_argument("--contexts", help="context library (NAME = CONTEXT per line)")

    fam = argparse.ArgumentParser(add_help=False)
    fam.add_argument("--family", type=_family, required=True,
                     help="trace|failure|ready|failure-trace|ready-trace|simulation")

    upto = argparse.ArgumentParser(add_help=False)
    upto.add_argument("--upto", help="up-to term, e.g. 'union(id, const(D))'")
    upto.add_argument("--upto-file")
    upto.add_argument("--nmax", type=_nonneg, default=8)
    upto.add_argument("--const", action="append", metavar="NAME=FILE.rel", help="named relation constant")

    parser = argparse.ArgumentParser(prog="uptoind", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sat", parents=[common, source], help="does a state satisfy a formula")
    p.add_argument("state")
    p.add_argument("formula")
    p.add_argument("--n", type=_nonneg, default=None, help="weight bound")
    p.add_argument("--witness", action="store_true")
    p.set_defaults(func=cmd_sat)

    p = sub.add_parser("approx", parents=[common, source, fam], help="n-th approximant")
    p.add_argument("--n", type=_nonneg, required=True)
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("preorder", parents=[common, source, fam], help="full preorder")
    p.add_argument("--query", nargs=2, metavar=("P", "Q"))
    p.add_argument("--explain", action="store_true", help="print a distinguishing observable on failure")
    p.set_defaults(func=cmd_preorder)

    p = sub.add_parser("certify", parents=[common, source, fam, upto], help="certify R <= preorder")
    p.add_argument("--rel", help="relation file, one 'P Q' pair per line")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("check-wp", parents=[common, source, fam, upto], help="weight preservation of an up-to term")
    p.set_defaults(func=cmd_check_wp)

    p = sub.add_parser("ccs-lts", parents=[common], help="compile CCS definitions to .aut")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ccs_lts)

    p = sub.add_parser("lint", parents=[common], help="parse-check input files")
    p.add_argument("files", nargs="+")
    p.set_defaults(func=cmd_lint)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    if args.cap is None:
        args.cap = default_cap()
    try:
        return args.func(args)
    except (UsageError, AutParseError, FormulaSyntaxError, ccs.CcsSyntaxError, UptoSyntaxError,
            UnresolvedReference, PowersetCapExceeded, ccs.StateCapExceeded, KeyError, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
