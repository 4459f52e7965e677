"""Applying EGDs to a finished TGD chase, and checking satisfiability.

``egd_fixpoint`` collects equalities in a union-find structure whose
components remember at most one constant; a second constant in a component is
a hard violation. ``build_sat_encoding`` turns the same question into a
Datalog program checked by an ``eq``/``neq`` contradiction query.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .model import Atom, Instance, Term, apply_term, const, match, var
from .syntax import EGD, TGD, Program, Query

__all__ = [
    "UnificationGraph",
    "UnificationViolation",
    "UnificationResult",
    "egd_fixpoint",
    "SatEncoding",
    "build_sat_encoding",
    "SatisfiabilityResult",
    "check_satisfiability",
]


def _null_order(t: Term):
    # constants sort before nulls; among nulls the smaller id is older
    return (0, t.name) if t.is_constant else (1, t.name)


class UnificationGraph:
    """Disjoint sets over constants and nulls with a constant slot per set."""

    def __init__(self):
        self._parent: Dict[Term, Term] = {}
        self._const: Dict[Term, Optional[Term]] = {}
        self._oldest: Dict[Term, Term] = {}
        self.edges: List[Tuple[Term, Term]] = []

    def add_node(self, t: Term) -> None:
        if t not in self._parent:
            self._parent[t] = t
            self._const[t] = t if t.is_constant else None
            self._oldest[t] = t

    @property
    def nodes(self) -> List[Term]:
        return list(self._parent)

    def find(self, t: Term) -> Term:
        self.add_node(t)
        root = t
        while self._parent[root] != root:
            root = self._parent[root]
        while self._parent[t] != root:
            self._parent[t], t = root, self._parent[t]
        return root

    def same(self, a: Term, b: Term) -> bool:
        return self.find(a) == self.find(b)

    def union(self, a: Term, b: Term) -> Optional[Tuple[Term, Term]]:
        """Merge the sets of ``a`` and ``b``; returns the clashing constants on failure."""
        ra, rb = self.find(a), self.find(b)
        self.edges.append((a, b))
        if ra == rb:
            return None
        ca, cb = self._const[ra], self._const[rb]
        if ca is not None and cb is not None and ca != cb:
            return (ca, cb)
        self._parent[rb] = ra
        self._const[ra] = ca if ca is not None else cb
        self._oldest[ra] = min(self._oldest[ra], self._oldest[rb], key=_null_order)
        return None

    def representative(self, t: Term) -> Term:
        r = self.find(t)
        c = self._const[r]
        return c if c is not None else self._oldest[r]

    def components(self) -> List[Set[Term]]:
        groups: Dict[Term, Set[Term]] = {}
        for t in self._parent:
            groups.setdefault(self.find(t), set()).add(t)
        return sorted(groups.values(), key=lambda g: sorted(map(_null_order, g)))

    def assignment(self) -> Dict[Term, Term]:
        """Null -> representative for every null not representing itself."""
        out = {}
        for t in self._parent:
            if t.is_null:
                r = self.representative(t)
                if r != t:
                    out[t] = r
        return out

    def to_dict(self) -> dict:
        comps = [c for c in self.components() if len(c) > 1]
        return {
            "components": [
                {
                    "representative": str(self.representative(next(iter(c)))),
                    "members": sorted(str(t) for t in c),
                }
                for c in comps
            ],
            "edges": [[str(a), str(b)] for a, b in self.edges],
        }


@dataclass(frozen=True)
class UnificationViolation:
    rule: str
    trigger: Tuple[Tuple[Term, Term], ...]
    left: Term
    right: Term

    def __str__(self) -> str:
        return f"{self.rule} forces {self.left} = {self.right}"


@dataclass
class UnificationResult:
    graph: UnificationGraph
    assignment: Dict[Term, Term]
    instance: Optional[Instance]
    violation: Optional[UnificationViolation] = None
    merges: List[Tuple[str, Term, Term]] = field(default_factory=list)
    passes: int = 0

    @property
    def failed(self) -> bool:
        return self.violation is not None

    def to_dict(self) -> dict:
        out = {"failed": self.failed, "passes": self.passes, **self.graph.to_dict()}
        out["assignment"] = {str(k): str(v) for k, v in sorted(self.assignment.items(), key=lambda kv: kv[0].name)}
        if self.violation is not None:
            v = self.violation
            out["violation"] = {
                "rule": v.rule,
                "constants": [str(v.left), str(v.right)],
                "trigger": {str(k): str(t) for k, t in v.trigger},
            }
        return out


def egd_fixpoint(
    chased: Instance,
    egds: Sequence[EGD],
    batch_threshold: Optional[int] = None,
    seed: Optional[int] = None,
    shadow: Iterable[Atom] = (),
) -> UnificationResult:
    """Apply ``egds`` to ``chased`` until no trigger equates two different sets.

    Matching runs against a working copy rewritten by the current components.
    Without ``batch_threshold`` the copy is rewritten after every full pass;
    with it, as soon as that many new edges are buffered. ``seed`` shuffles
    the order in which rules and triggers are visited.

    ``shadow`` facts belong to the TGD chase but were pruned from it; they
    take part in EGD matching only and are not part of the returned instance.
    """
    g = UnificationGraph()
    work = chased.copy()
    for a in shadow:
        work.add(a)
    for t in {t for a in work for t in a.args}:
        g.add_node(t)
    rng = random.Random(seed) if seed is not None else None
    merges: List[Tuple[str, Term, Term]] = []
    passes = 0
    applied: Dict[Term, Term] = {}

    def rewrite():
        nonlocal applied
        current = g.assignment()
        delta = {n: r for n, r in current.items() if applied.get(n) != r}
        # nulls already rewritten away no longer occur in ``work``; map the
        # ones still present to their current representative
        work.rewrite(delta)
        applied = current

    while True:
        passes += 1
        merged_this_pass = 0
        buffered = 0
        order = list(egds)
        if rng:
            rng.shuffle(order)
        restart = False
        for egd in order:
            triggers = match(egd.body, work)
            if rng:
                triggers = list(triggers)
                rng.shuffle(triggers)
            for trig in triggers:
                a = apply_term(trig, egd.left)
                b = apply_term(trig, egd.right)
                if g.same(a, b):
                    continue
                clash = g.union(a, b)
                if clash is not None:
                    items = tuple(sorted(trig.items(), key=lambda kv: str(kv[0])))
                    viol = UnificationViolation(egd.label, items, clash[0], clash[1])
                    return UnificationResult(g, g.assignment(), None, viol, merges, passes)
                merges.append((egd.label, a, b))
                merged_this_pass += 1
                buffered += 1
                if batch_threshold is not None and buffered >= batch_threshold:
                    restart = True
                    break
            if restart:
                break
        if merged_this_pass == 0:
            break
        rewrite()
    h = g.assignment()
    final = chased.copy()
    final.rewrite(h)
    return UnificationResult(g, h, final, None, merges, passes)


# -- satisfiability encoding ------------------------------------------------------------------


@dataclass
class SatEncoding:
    base: Instance
    rules: List[TGD]
    check_query: Query
    eq: str
    neq: str
    null_constants: Dict[Term, Term]

    def program(self) -> Program:
        return Program(list(self.rules), [], list(self.base), [self.check_query])


def _fresh_name(stem: str, taken: Set[str]) -> str:
    name = stem
    while name in taken:
        name += "_"
    return name


def _body_modulo_eq(body: Sequence[Atom], eq: str) -> Tuple[Atom, ...]:
    """Rewrite ``body`` so joins and constants are matched modulo ``eq``.

    The first occurrence of each variable stays; every later occurrence and
    every constant becomes a fresh variable tied to the original by ``eq``.
    """
    seen: Set[Term] = set()
    atoms, links = [], []
    counter = 0
    for a in body:
        args = []
        for t in a.args:
            if t.is_variable and t not in seen:
                seen.add(t)
                args.append(t)
                continue
            counter += 1
            fresh = var(f"_E{counter}")
            links.append(Atom(eq, (fresh, t)))
            args.append(fresh)
        atoms.append(Atom(a.predicate, tuple(args)))
    return tuple(atoms + links)


def build_sat_encoding(
    chased: Instance,
    egds: Sequence[EGD],
    dom_d: Optional[Iterable[Term]] = None,
    shadow: Iterable[Atom] = (),
) -> SatEncoding:
    taken = {a.predicate for a in chased} | {a.predicate for e in egds for a in e.body}
    eq = _fresh_name("eq", taken)
    neq = _fresh_name("neq", taken | {eq})
    originals = sorted(chased.constants() if dom_d is None else set(dom_d))
    facts = list(chased) + list(shadow)
    as_const = {t: const(f"_:n{t.name}") for a in facts for t in a.args if t.is_null}
    base = Instance(Atom(a.predicate, tuple(as_const.get(t, t) for t in a.args)) for a in facts)
    for c1 in originals:
        for c2 in originals:
            if c1 != c2:
                base.add(Atom(neq, (c1, c2)))
    for t in sorted({t for a in list(base) for t in a.args} | set(originals)):
        base.add(Atom(eq, (t, t)))
    x, y, z = var("X"), var("Y"), var("Z")
    rules = [
        TGD(_body_modulo_eq(e.body, eq), (Atom(eq, (e.left, e.right)),), label=f"v_{e.label}")
        for e in egds
    ]
    rules.append(TGD((Atom(eq, (x, y)),), (Atom(eq, (y, x)),), label="eq_symmetry"))
    rules.append(TGD((Atom(eq, (x, y)), Atom(eq, (y, z))), (Atom(eq, (x, z)),), label="eq_transitivity"))
    q = Query((), (Atom(eq, (x, y)), Atom(neq, (x, y))), label="q_v")
    return SatEncoding(base, rules, q, eq, neq, as_const)


@dataclass
class SatisfiabilityResult:
    satisfiable: bool
    method: str
    witness: Optional[str] = None
    agree: Optional[bool] = None


def _encoding_verdict(chased: Instance, egds: Sequence[EGD], shadow) -> Tuple[bool, Optional[str]]:
    from .chase import run_chase

    enc = build_sat_encoding(chased, egds, shadow=shadow)
    out = run_chase(enc.program(), variant="standard", limit=10**9, use_egds=False)
    sol = next(match(enc.check_query.body, out.instance), None)
    if sol is None:
        return True, None
    return False, f"{enc.eq}({sol[var('X')]},{sol[var('Y')]}) with {enc.neq}"


def check_satisfiability(
    program: Program,
    database: Optional[Iterable[Atom]] = None,
    method: str = "encoding",
    chased=None,
    limit: Optional[int] = None,
) -> SatisfiabilityResult:
    """Decide whether the database and rules have a model.

    ``method`` is ``"encoding"``, ``"direct"`` (unification failure) or
    ``"both"``, which runs the two and records whether they agree.
    ``chased`` may be a precomputed relaxed chase outcome (or bare instance).
    """
    from .chase import DEFAULT_STEP_LIMIT, ChaseOutcome, relaxed_warded_chase

    if method not in ("encoding", "direct", "both"):
        raise ValueError(f"unknown method {method!r}")
    if chased is None:
        chased = relaxed_warded_chase(program, database, limit=limit or DEFAULT_STEP_LIMIT)
    shadow: List[Atom] = []
    if isinstance(chased, ChaseOutcome):
        shadow = chased.shadow_facts()
        chased = chased.instance
    results = {}
    if method in ("encoding", "both"):
        results["encoding"] = _encoding_verdict(chased, program.egds, shadow)
    if method in ("direct", "both"):
        fx = egd_fixpoint(chased, program.egds, shadow=shadow)
        results["direct"] = (not fx.failed, str(fx.violation) if fx.failed else None)
    if method == "both":
        enc, direct = results["encoding"], results["direct"]
        sat = enc[0] and direct[0]
        return SatisfiabilityResult(sat, "both", direct[1] or enc[1], enc[0] == direct[0])
    sat, witness = results[method]
    return SatisfiabilityResult(sat, method, witness)
