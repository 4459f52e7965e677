"""Chase engines over a provenance graph.

Three variants share one driver:

* ``standard_chase`` fires every new trigger once per round and applies the
  EGDs to fixpoint after each round; it may not terminate, so a step budget
  bounds it.
* ``warded_chase`` drops a new fact when an isomorphic one already exists.
* ``relaxed_warded_chase`` drops a new fact only when an isomorphic fact with
  the same track exists.

Triggers are deduplicated on the rule and the image of its frontier
variables, so a rule fires at most once per distinct head instantiation.
"""

from __future__ import annotations

import enum
import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Set, Tuple

from .analysis import check_warded
from .model import (
    Atom,
    Instance,
    NullFactory,
    Substitution,
    Term,
    _unify_atom,
    apply,
    apply_atom,
    apply_term,
    canonical,
    match,
)
from .syntax import EGD, TGD, Program

__all__ = [
    "DEFAULT_STEP_LIMIT",
    "ChaseStatus",
    "Edge",
    "ChaseGraph",
    "EGDViolation",
    "ChaseState",
    "ChaseOutcome",
    "tgd_step",
    "egd_step",
    "standard_chase",
    "warded_chase",
    "relaxed_warded_chase",
    "run_chase",
    "compute_track",
    "export_dot",
]

DEFAULT_STEP_LIMIT = 10_000


class ChaseStatus(str, enum.Enum):
    SATURATED = "saturated"
    FAILED = "failed"
    STEP_LIMIT = "step_limit_exceeded"


@dataclass(frozen=True)
class Edge:
    source: int
    target: int
    rule: str
    trigger: Tuple[Tuple[Term, Term], ...]

    @property
    def substitution(self) -> Substitution:
        return dict(self.trigger)


class ChaseGraph:
    """Derivation graph with a warded forest embedded in it.

    Every derived fact has edges from all the facts of its trigger; at most one
    of them is a forest edge. A fact without a forest parent is a root and is
    its own track.
    """

    def __init__(self):
        self.nodes: Dict[int, None] = {}
        self.edges: List[Edge] = []
        self.parent: Dict[int, int] = {}
        self.forest_edges: Dict[int, Edge] = {}
        self._track: Dict[int, int] = {}

    def add_node(self, fid: int) -> None:
        self.nodes.setdefault(fid, None)

    def add_derivation(
        self, sources: Sequence[int], target: int, rule: str, trigger: Substitution, forest_source: Optional[int]
    ) -> None:
        self.add_node(target)
        items = tuple(sorted(trigger.items(), key=lambda kv: str(kv[0])))
        for s in dict.fromkeys(sources):
            e = Edge(s, target, rule, items)
            self.edges.append(e)
            if s == forest_source and target not in self.parent:
                self.parent[target] = s
                self.forest_edges[target] = e

    def track(self, fid: int) -> int:
        cached = self._track.get(fid)
        if cached is not None:
            return cached
        path = []
        node = fid
        while node in self.parent and node not in self._track:
            path.append(node)
            node = self.parent[node]
        root = self._track.get(node, node)
        for n in path:
            self._track[n] = root
        self._track[fid] = root
        return root

    def roots(self) -> List[int]:
        return [n for n in self.nodes if n not in self.parent]

    def trees(self) -> Dict[int, List[int]]:
        out: Dict[int, List[int]] = defaultdict(list)
        for n in self.nodes:
            out[self.track(n)].append(n)
        return dict(out)

    def contract(self, dropped: int, kept: int) -> None:
        """Fold node ``dropped`` into ``kept`` after two facts became equal."""
        self.nodes.pop(dropped, None)
        self.add_node(kept)

        def fix(n):
            return kept if n == dropped else n

        self.edges = [
            Edge(fix(e.source), fix(e.target), e.rule, e.trigger)
            for e in self.edges
            if not (fix(e.source) == fix(e.target))
        ]
        old_parent = self.parent.pop(dropped, None)
        if kept not in self.parent and old_parent is not None and old_parent != kept:
            self.parent[kept] = old_parent
        for child, par in list(self.parent.items()):
            if par == dropped:
                if child == kept:
                    del self.parent[child]
                else:
                    self.parent[child] = kept
        self._rebuild_forest_edges()
        self._track.clear()

    def _rebuild_forest_edges(self) -> None:
        by_pair = {}
        for e in self.edges:
            by_pair.setdefault((e.source, e.target), e)
        self.forest_edges = {}
        for child, par in list(self.parent.items()):
            e = by_pair.get((par, child))
            if e is None:
                del self.parent[child]
            else:
                self.forest_edges[child] = e

    def copy(self) -> "ChaseGraph":
        g = ChaseGraph()
        g.nodes = dict(self.nodes)
        g.edges = list(self.edges)
        g.parent = dict(self.parent)
        g.forest_edges = dict(self.forest_edges)
        return g


def compute_track(fid: int, graph: ChaseGraph) -> int:
    return graph.track(fid)


@dataclass(frozen=True)
class EGDViolation:
    rule: str
    trigger: Tuple[Tuple[Term, Term], ...]
    left: Term
    right: Term

    def __str__(self) -> str:
        return f"{self.rule} equates distinct constants {self.left} and {self.right}"


@dataclass
class ChaseState:
    instance: Instance
    graph: ChaseGraph
    nulls: NullFactory
    seen: Set[Tuple] = field(default_factory=set)
    egd_assignments: Dict[Term, Term] = field(default_factory=dict)
    transcript: List[dict] = field(default_factory=list)
    suppressed: List[Tuple[Atom, int]] = field(default_factory=list)
    steps: int = 0
    # (canonical form, track or None) -> existing fact id, for pruning
    _iso_index: Dict[Tuple, int] = field(default_factory=dict)

    @classmethod
    def start(cls, database: Iterable[Atom]) -> "ChaseState":
        db = list(database)
        inst = Instance(db)
        graph = ChaseGraph()
        for f in inst.facts():
            graph.add_node(f.id)
        return cls(inst, graph, NullFactory.after(db))

    def index_existing(self, mode: Optional[str]) -> None:
        if mode is None:
            return
        for f in self.instance.facts():
            self._iso_index.setdefault(self._prune_key(f.atom, f.id, mode), f.id)

    def _prune_key(self, a: Atom, track: int, mode: str) -> Tuple:
        return (canonical(a), track if mode == "track" else None)


@dataclass
class ChaseOutcome:
    status: ChaseStatus
    instance: Instance
    graph: ChaseGraph
    egd_assignments: Dict[Term, Term]
    violation: Optional[EGDViolation] = None
    transcript: List[dict] = field(default_factory=list)
    suppressed: List[Tuple[Atom, int]] = field(default_factory=list)
    steps: int = 0
    rounds: int = 0
    variant: str = "standard"
    unification: Optional[object] = None

    @property
    def saturated(self) -> bool:
        return self.status is ChaseStatus.SATURATED

    @property
    def failed(self) -> bool:
        return self.status is ChaseStatus.FAILED

    def track_of(self, a: Atom) -> Atom:
        return self.instance.get(self.graph.track(self.instance.id_of(a)))

    def shadow_facts(self) -> List[Atom]:
        """Facts the termination strategy pruned, minus any present anyway."""
        return [a for a in dict.fromkeys(a for a, _ in self.suppressed) if a not in self.instance]

    def query_instance(self) -> Instance:
        """The result plus its shadow facts under the EGD assignment.

        Pruned facts are still entailed; a join through a null whose only
        occurrence was pruned would otherwise be lost.
        """
        shadow = self.shadow_facts()
        if not shadow:
            return self.instance
        out = self.instance.copy()
        for a in shadow:
            out.add(apply_atom(self.egd_assignments, a))
        return out

    def transcript_jsonl(self) -> str:
        return "".join(json.dumps(step, sort_keys=True) + "\n" for step in self.transcript)


def _render(s: Dict[Term, Term]) -> Dict[str, str]:
    return {str(k): str(v) for k, v in s.items()}


# -- single steps ------------------------------------------------------------------------


def _trigger_key(tgd: TGD, trigger: Substitution) -> Tuple:
    return (tgd.label, tuple(apply_term(trigger, v) for v in tgd.frontier))


def tgd_step(
    state: ChaseState,
    tgd: TGD,
    trigger: Substitution,
    body_ids: Sequence[int] = (),
    ward: Optional[int] = None,
    prune: Optional[str] = None,
) -> List[int]:
    """Fire ``tgd`` on ``trigger``; returns the ids of the facts it added.

    ``prune`` is ``None`` (keep every new fact), ``"iso"`` (drop facts
    isomorphic to an existing one) or ``"track"`` (drop facts isomorphic to
    an existing one with the same track).
    """
    inst, graph = state.instance, state.graph
    if not body_ids:
        body_ids = tuple(inst.id_of(a) for a in apply(trigger, tgd.body))
    ext = dict(trigger)
    for z in tgd.existentials:
        ext[z] = state.nulls.fresh()
    if tgd.is_linear:
        forest_source = body_ids[0]
    elif ward is not None:
        forest_source = body_ids[ward]
    else:
        forest_source = None
    new_ids, new_atoms, dropped = [], [], []
    for h in apply(ext, tgd.head):
        if h in inst:
            continue
        # a fact without a forest parent starts a new tree, so under track
        # pruning nothing can share its track yet
        if prune == "iso" or (prune == "track" and forest_source is not None):
            track = graph.track(forest_source) if forest_source is not None else None
            hit = state._iso_index.get(state._prune_key(h, track, prune))
            if hit is not None:
                state.suppressed.append((h, hit))
                dropped.append(str(h))
                continue
        fid, _ = inst.add(h)
        graph.add_derivation(body_ids, fid, tgd.label, ext, forest_source)
        if prune is not None:
            state._iso_index.setdefault(state._prune_key(h, graph.track(fid), prune), fid)
        new_ids.append(fid)
        new_atoms.append(str(h))
    state.steps += 1
    state.transcript.append(
        {
            "step": len(state.transcript) + 1,
            "kind": "tgd",
            "rule": tgd.label,
            "trigger": _render(trigger),
            "produced": new_atoms,
            "suppressed": dropped,
        }
    )
    return new_ids


def egd_step(state: ChaseState, egd: EGD, trigger: Substitution):
    """Apply one EGD trigger.

    Returns ``None`` when both sides already agree, an :class:`EGDViolation`
    on a clash of constants, or the ``{null: term}`` assignment performed.
    """
    a = apply_term(trigger, egd.left)
    b = apply_term(trigger, egd.right)
    if a == b:
        return None
    items = tuple(sorted(trigger.items(), key=lambda kv: str(kv[0])))
    if a.is_constant and b.is_constant:
        v = EGDViolation(egd.label, items, a, b)
        state.transcript.append(
            {"step": len(state.transcript) + 1, "kind": "egd", "rule": egd.label,
             "trigger": _render(trigger), "failure": [str(a), str(b)]}
        )
        return v
    if a.is_null and b.is_null:
        old, new = (a, b) if a.name > b.name else (b, a)
    elif a.is_null:
        old, new = a, b
    else:
        old, new = b, a
    mapping = {old: new}
    for merged_from, merged_into in state.instance.rewrite(mapping):
        state.graph.contract(merged_from, merged_into)
    for k, v in state.egd_assignments.items():
        if v == old:
            state.egd_assignments[k] = new
    state.egd_assignments[old] = new
    state.seen = {(rule, tuple(mapping.get(t, t) for t in img)) for rule, img in state.seen}
    state.transcript.append(
        {"step": len(state.transcript) + 1, "kind": "egd", "rule": egd.label,
         "trigger": _render(trigger), "assign": {str(old): str(new)}}
    )
    return mapping


def _egds_to_fixpoint(state: ChaseState, egds: Sequence[EGD]) -> Tuple[bool, Optional[EGDViolation]]:
    changed = False
    progress = True
    while progress:
        progress = False
        for egd in egds:
            for trigger in match(egd.body, state.instance):
                res = egd_step(state, egd, trigger)
                if res is None:
                    continue
                if isinstance(res, EGDViolation):
                    return changed, res
                changed = progress = True
                break
            if progress:
                break
    return changed, None


# -- triggers ------------------------------------------------------------------------------


def _delta_matches(tgd: TGD, inst: Instance, delta: Optional[Set[int]]) -> Iterator[Tuple[Substitution, Tuple[int, ...]]]:
    """Triggers of ``tgd`` using at least one fact in ``delta`` (all if ``None``)."""
    if delta is None:
        yield from match(tgd.body, inst, neq=tgd.neq, with_facts=True)
        return
    emitted = set()
    for k, a in enumerate(tgd.body):
        for fid in sorted(delta):
            fact = inst._atoms.get(fid)
            if fact is None or fact.predicate != a.predicate:
                continue
            start = _unify_atom(a, fact, {})
            if start is None:
                continue
            rest = [b for j, b in enumerate(tgd.body) if j != k]
            for sub, ids in match(rest, inst, binding=start, neq=tgd.neq, with_facts=True):
                full = ids[:k] + (fid,) + ids[k:]
                key = (tuple(sorted(sub.items())), full)
                if key in emitted:
                    continue
                emitted.add(key)
                yield sub, full


# -- drivers ----------------------------------------------------------------------------------


def run_chase(
    program: Program,
    database: Optional[Iterable[Atom]] = None,
    *,
    variant: str = "standard",
    limit: int = DEFAULT_STEP_LIMIT,
    use_egds: bool = True,
) -> ChaseOutcome:
    if limit < 1:
        raise ValueError("step limit must be at least 1")
    prune = {"standard": None, "warded": "iso", "relaxed": "track"}[variant]
    db = program.facts if database is None else list(database)
    state = ChaseState.start(db)
    state.index_existing(prune)
    egds = program.egds if (use_egds and variant == "standard") else []
    wards: Dict[str, Optional[int]] = {}
    if prune is not None:
        wards = check_warded(program).wards

    def finish(status, violation=None, rounds=0):
        return ChaseOutcome(
            status, state.instance, state.graph, dict(state.egd_assignments), violation,
            state.transcript, state.suppressed, state.steps, rounds, variant,
        )

    if egds:
        _, violation = _egds_to_fixpoint(state, egds)
        if violation:
            return finish(ChaseStatus.FAILED, violation)

    delta: Optional[Set[int]] = None
    rounds = 0
    while True:
        rounds += 1
        pending = []
        for tgd in program.tgds:
            for trigger, ids in _delta_matches(tgd, state.instance, delta):
                pending.append((tgd, trigger, ids))
        high_water = state.instance._next_id
        fired = False
        for tgd, trigger, ids in pending:
            key = _trigger_key(tgd, trigger)
            if key in state.seen:
                continue
            if state.steps >= limit:
                return finish(ChaseStatus.STEP_LIMIT, rounds=rounds)
            state.seen.add(key)
            tgd_step(state, tgd, trigger, ids, wards.get(tgd.label), prune)
            fired = True
        new = {fid for fid in state.instance._atoms if fid >= high_water}
        if egds:
            before = {fid: a for fid, a in state.instance._atoms.items()}
            changed, violation = _egds_to_fixpoint(state, egds)
            if violation:
                return finish(ChaseStatus.FAILED, violation, rounds)
            if changed:
                new |= {fid for fid, a in state.instance._atoms.items() if before.get(fid) != a}
        if not fired or not new:
            return finish(ChaseStatus.SATURATED, rounds=rounds)
        delta = new


def standard_chase(program: Program, database=None, limit: int = DEFAULT_STEP_LIMIT) -> ChaseOutcome:
    return run_chase(program, database, variant="standard", limit=limit)


def warded_chase(program: Program, database=None, limit: int = DEFAULT_STEP_LIMIT) -> ChaseOutcome:
    """Isomorphism-pruned chase of the TGDs of ``program``; EGDs are ignored."""
    return run_chase(program, database, variant="warded", limit=limit)


def relaxed_warded_chase(program: Program, database=None, limit: int = DEFAULT_STEP_LIMIT) -> ChaseOutcome:
    """Chase of the TGDs pruned by isomorphism plus equal track; EGDs are ignored."""
    return run_chase(program, database, variant="relaxed", limit=limit)


# -- DOT export ---------------------------------------------------------------------------------


def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def export_dot(graph: ChaseGraph, instance: Instance, clusters: bool = False, name: str = "chase") -> str:
    lines = [f'digraph "{_dot_escape(name)}" {{', "  node [shape=box];"]

    def node_line(n, indent="  "):
        return f'{indent}n{n} [label="{_dot_escape(str(instance.get(n)))}"];'

    if clusters:
        for k, (root, members) in enumerate(sorted(graph.trees().items())):
            lines.append(f"  subgraph cluster_{k} {{")
            lines.append(f'    label="track {_dot_escape(str(instance.get(root)))}";')
            lines.extend(node_line(n, "    ") for n in sorted(members))
            lines.append("  }")
    else:
        lines.extend(node_line(n) for n in sorted(graph.nodes))
    seen = set()
    for e in graph.edges:
        pair = (e.source, e.target, e.rule)
        if pair in seen:
            continue
        seen.add(pair)
        forest = graph.forest_edges.get(e.target) is not None and graph.parent.get(e.target) == e.source
        style = ", style=bold, color=blue" if forest else ", style=dashed"
        lines.append(f'  n{e.source} -> n{e.target} [label="{_dot_escape(e.rule)}"{style}];')
    lines.append("}")
    return "\n".join(lines) + "\n"
