"""Random warded programs with certified EGDs, for property testing."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterator, List, Optional

from .analysis import affected_positions, analyze, positions_of
from .egd import egd_fixpoint
from .model import Atom, Instance, Term, const, var
from .syntax import EGD, TGD, Program, Query

__all__ = ["CorpusConfig", "random_program", "random_bcq", "certified_programs"]

_VARS = [var(v) for v in ("X", "Y", "Z", "W", "V")]
_CONSTS = [const(c) for c in ("a", "b", "c", "d", "e")]


@dataclass
class CorpusConfig:
    max_predicates: int = 4
    max_arity: int = 3
    max_tgds: int = 8
    max_egds: int = 3
    max_facts: int = 8
    max_domain: int = 5
    rule_constant_rate: float = 0.05
    harmful_egd_rate: float = 0.7
    consistent_database: bool = True


def _touches_nulls(e: EGD, affected) -> bool:
    for side in (e.left, e.right):
        occ = positions_of(side, e.body)
        if occ and all(p in affected for p in occ):
            return True
    return False


def _atom(rng: random.Random, pred: str, arity: int, terms: List[Term]) -> Atom:
    return Atom(pred, tuple(rng.choice(terms) for _ in range(arity)))


def random_program(rng: random.Random, cfg: Optional[CorpusConfig] = None) -> Program:
    """One random program; it may or may not be warded or safe."""
    cfg = cfg or CorpusConfig()
    n_preds = rng.randint(2, cfg.max_predicates)
    schema = {f"p{k}": rng.randint(1, cfg.max_arity) for k in range(n_preds)}
    preds = list(schema)
    domain = _CONSTS[: rng.randint(2, cfg.max_domain)]

    def body(max_atoms: int) -> List[Atom]:
        terms = _VARS[: rng.randint(1, 4)]
        out = []
        for _ in range(rng.randint(1, max_atoms)):
            pool = list(terms)
            if rng.random() < cfg.rule_constant_rate:
                pool.append(rng.choice(domain))
            p = rng.choice(preds)
            out.append(_atom(rng, p, schema[p], pool))
        return out

    tgds = []
    for k in range(rng.randint(1, cfg.max_tgds)):
        b = body(2)
        bvars = list(dict.fromkeys(t for a in b for t in a.args if t.is_variable))
        pool = bvars + [var("E")] * rng.randint(0, 2)
        if not pool:
            pool = [var("E")]
        head = []
        for _ in range(rng.randint(1, 2)):
            p = rng.choice(preds)
            head.append(_atom(rng, p, schema[p], pool))
        tgds.append(TGD(tuple(b), tuple(head), label=f"sigma{k + 1}"))

    # EGDs that only equate database constants mostly make the chase fail;
    # prefer ones where a side can only bind nulls
    affected = affected_positions(Program(tgds, [], [], []))
    egds = []
    for _ in range(rng.randint(1, cfg.max_egds)):
        want_harmful = rng.random() < cfg.harmful_egd_rate
        fallback = None
        for _attempt in range(30):
            b = body(2)
            bvars = list(dict.fromkeys(t for a in b for t in a.args if t.is_variable))
            if len(bvars) < 2:
                continue
            x, y = rng.sample(bvars, 2)
            e = EGD(tuple(b), x, y, label=f"eta{len(egds) + 1}")
            fallback = fallback or e
            if not want_harmful or _touches_nulls(e, affected):
                break
        else:
            e = fallback
        if e is not None:
            egds.append(e)

    # keep the database itself consistent with the EGDs so that failures
    # come from the rules rather than from the input
    facts: List[Atom] = []
    for _ in range(rng.randint(1, cfg.max_facts)):
        p = rng.choice(preds)
        a = _atom(rng, p, schema[p], domain)
        if a in facts:
            continue
        if cfg.consistent_database and egd_fixpoint(Instance(facts + [a]), egds).failed:
            continue
        facts.append(a)
    return Program(tgds, egds, facts, [])


def random_bcq(rng: random.Random, program: Program) -> Query:
    """An atomic or two-atom Boolean query over the program's schema and constants."""
    schema = program.schema()
    preds = list(schema)
    consts = sorted(program.constants()) or _CONSTS[:2]
    terms = _VARS[:3] + consts
    body = []
    for _ in range(rng.randint(1, 2)):
        p = rng.choice(preds)
        body.append(_atom(rng, p, schema[p], terms))
    return Query((), tuple(body))


def certified_programs(
    seed: int = 0, cfg: Optional[CorpusConfig] = None, max_tries: int = 100_000, strict: bool = True
) -> Iterator[Program]:
    """Warded, safe-tainted random programs whose EGDs taint at least one position.

    ``strict`` certifies with taint carried through shared existentials; the
    plain check admits programs whose EGDs are not harmless.
    """
    rng = random.Random(seed)
    for _ in range(max_tries):
        p = random_program(rng, cfg)
        report = analyze(p, strict=strict)
        if report.accepted and report.tainted:
            yield p
