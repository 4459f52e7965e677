"""Static analysis of rule sets: affected and tainted positions, wardedness,
variable classification and the safe-taintedness check."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, NamedTuple, Optional, Set, Tuple

from .model import Atom, Term
from .syntax import EGD, TGD, Program

__all__ = [
    "Position",
    "positions_of",
    "affected_positions",
    "classify_rule_variables",
    "WardednessVerdict",
    "check_warded",
    "tainted_positions",
    "taint_seeds",
    "SafetyVerdict",
    "Witness",
    "check_safe_taintedness",
    "PositionAnalysis",
    "analyze",
]

HARMLESS = "harmless"
HARMFUL = "harmful"
DANGEROUS = "dangerous"


class Position(NamedTuple):
    predicate: str
    index: int  # 1-based

    def __str__(self) -> str:
        return f"{self.predicate}[{self.index}]"


def positions_of(term: Term, atoms: Iterable[Atom]) -> List[Position]:
    """Every position where ``term`` occurs in ``atoms``, with repetition."""
    return [
        Position(a.predicate, i + 1)
        for a in atoms
        for i, t in enumerate(a.args)
        if t == term
    ]


def _all_positions(atoms: Iterable[Atom]) -> Dict[Term, List[Position]]:
    out: Dict[Term, List[Position]] = {}
    for a in atoms:
        for i, t in enumerate(a.args):
            out.setdefault(t, []).append(Position(a.predicate, i + 1))
    return out


def _is_harmful(v: Term, body_pos: Dict[Term, List[Position]], affected: Set[Position]) -> bool:
    occ = body_pos.get(v, ())
    return bool(occ) and all(p in affected for p in occ)


# -- affected positions -----------------------------------------------------------------


def affected_positions(p: Program) -> Set[Position]:
    affected: Set[Position] = set()
    for t in p.tgds:
        for z in t.existentials:
            affected.update(positions_of(z, t.head))
    changed = True
    while changed:
        changed = False
        for t in p.tgds:
            body_pos = _all_positions(t.body)
            for v in t.frontier:
                if _is_harmful(v, body_pos, affected):
                    for pos in positions_of(v, t.head):
                        if pos not in affected:
                            affected.add(pos)
                            changed = True
    return affected


def classify_rule_variables(rule, affected: Set[Position]) -> Dict[Term, str]:
    """Map each body variable to ``harmless``, ``harmful`` or ``dangerous``.

    Dangerous variables are harmful ones that also occur in a TGD head; EGDs
    have no head atoms, so their variables are at most harmful.
    """
    body_pos = _all_positions(rule.body)
    head_vars = set(rule.frontier) if isinstance(rule, TGD) else set()
    out = {}
    for v in rule.body_variables:
        if not _is_harmful(v, body_pos, affected):
            out[v] = HARMLESS
        elif v in head_vars:
            out[v] = DANGEROUS
        else:
            out[v] = HARMFUL
    return out


# -- wardedness ---------------------------------------------------------------------------


@dataclass
class WardednessVerdict:
    warded: bool
    wards: Dict[str, Optional[int]]  # TGD label -> index of the ward in its body
    violations: List[Tuple[str, List[Term]]] = field(default_factory=list)

    def ward_atom(self, tgd: TGD) -> Optional[Atom]:
        k = self.wards.get(tgd.label)
        return None if k is None else tgd.body[k]


def _ward_index(t: TGD, affected: Set[Position]) -> Tuple[Optional[int], List[Term]]:
    classes = classify_rule_variables(t, affected)
    dangerous = [v for v, c in classes.items() if c == DANGEROUS]
    if not dangerous:
        return None, []
    for k, a in enumerate(t.body):
        if all(v in a.args for v in dangerous):
            return k, dangerous
    return -1, dangerous


def check_warded(p: Program, affected: Optional[Set[Position]] = None) -> WardednessVerdict:
    if affected is None:
        affected = affected_positions(p)
    wards: Dict[str, Optional[int]] = {}
    violations = []
    for t in p.tgds:
        k, dangerous = _ward_index(t, affected)
        if k == -1:
            violations.append((t.label, dangerous))
            wards[t.label] = None
        else:
            wards[t.label] = k
    return WardednessVerdict(not violations, wards, violations)


# -- taint --------------------------------------------------------------------------------


def taint_seeds(p: Program, affected: Optional[Set[Position]] = None) -> Dict[Position, Set[str]]:
    """Positions tainted directly by an EGD, with the EGDs responsible."""
    if affected is None:
        affected = affected_positions(p)
    seeds: Dict[Position, Set[str]] = {}
    for e in p.egds:
        body_pos = _all_positions(e.body)
        for side in (e.left, e.right):
            if _is_harmful(side, body_pos, affected):
                for pos in body_pos[side]:
                    seeds.setdefault(pos, set()).add(e.label)
    return seeds


def tainted_positions(
    p: Program, affected: Optional[Set[Position]] = None, strict: bool = False
) -> Tuple[Set[Position], Dict[Position, Set[str]]]:
    """Tainted positions and, for each, the set of EGD labels that cause it.

    Taint flows through every TGD in both directions along variables shared by
    body and head. With ``strict`` it also flows between the head positions of
    an existential variable: binding the null in one of them rewrites the
    others too.
    """
    cause = {pos: set(labels) for pos, labels in taint_seeds(p, affected).items()}
    links = []
    for t in p.tgds:
        body_pos = _all_positions(t.body)
        head_pos = _all_positions(t.head)
        for v in t.frontier:
            links.append(body_pos[v] + head_pos[v])
        if strict:
            for z in t.existentials:
                if len(head_pos[z]) > 1:
                    links.append(head_pos[z])
    changed = True
    while changed:
        changed = False
        for group in links:
            labels: Set[str] = set()
            for pos in group:
                labels |= cause.get(pos, set())
            if not labels:
                continue
            for pos in group:
                have = cause.setdefault(pos, set())
                if not labels <= have:
                    have |= labels
                    changed = True
    return set(cause), cause


# -- safe taintedness ---------------------------------------------------------------------------


class Witness(NamedTuple):
    rule: str
    reason: str  # "repeated" or "constant"
    term: str
    positions: Tuple[Position, ...]

    def __str__(self) -> str:
        where = ", ".join(str(p) for p in self.positions)
        if self.reason == "repeated":
            return f"{self.rule}: tainted variable {self.term} occurs more than once in the body ({where})"
        return f"{self.rule}: constant {self.term} in tainted position {where}"


@dataclass
class SafetyVerdict:
    safe: bool
    witnesses: List[Witness] = field(default_factory=list)

    @property
    def label(self) -> str:
        return "safe" if self.safe else "unknown"


def _rule_atoms(rule) -> List[Atom]:
    return list(rule.body) + (list(rule.head) if isinstance(rule, TGD) else [])


def tainted_variables(rule, tainted: Set[Position]) -> List[Term]:
    body_pos = _all_positions(rule.body)
    return [v for v in rule.body_variables if any(pos in tainted for pos in body_pos[v])]


def check_safe_taintedness(p: Program, tainted: Optional[Set[Position]] = None) -> SafetyVerdict:
    if tainted is None:
        tainted, _ = tainted_positions(p)
    witnesses = []
    for rule in p.rules:
        body_pos = _all_positions(rule.body)
        for v in tainted_variables(rule, tainted):
            if len(body_pos[v]) > 1:
                witnesses.append(Witness(rule.label, "repeated", str(v), tuple(body_pos[v])))
        for a in _rule_atoms(rule):
            for i, t in enumerate(a.args):
                pos = Position(a.predicate, i + 1)
                if t.is_constant and pos in tainted:
                    witnesses.append(Witness(rule.label, "constant", str(t), (pos,)))
    return SafetyVerdict(not witnesses, witnesses)


# -- combined report ----------------------------------------------------------------------------


@dataclass
class PositionAnalysis:
    affected: Set[Position]
    tainted: Set[Position]
    taint_cause: Dict[Position, Set[str]]
    seeds: Set[Position]
    per_rule: Dict[str, Dict[Term, str]]
    tainted_vars: Dict[str, List[Term]]
    wardedness: WardednessVerdict
    safety: SafetyVerdict
    strict: bool = False

    @property
    def wards(self) -> Dict[str, Optional[int]]:
        return self.wardedness.wards

    @property
    def accepted(self) -> bool:
        return self.wardedness.warded and self.safety.safe

    def to_dict(self, program: Optional[Program] = None) -> dict:
        def plist(ps):
            return sorted(str(p) for p in ps)

        wards = {}
        for t in (program.tgds if program else []):
            k = self.wards.get(t.label)
            wards[t.label] = None if k is None else str(t.body[k])
        return {
            "warded": self.wardedness.warded,
            "ward_violations": [
                {"rule": r, "variables": [str(v) for v in vs]} for r, vs in self.wardedness.violations
            ],
            "affected": plist(self.affected),
            "tainted": plist(self.tainted),
            "taint_cause": {str(p): sorted(c) for p, c in sorted(self.taint_cause.items())},
            "wards": wards,
            "rules": {
                label: {
                    str(v): {"class": c, "tainted": v in self.tainted_vars.get(label, [])}
                    for v, c in classes.items()
                }
                for label, classes in self.per_rule.items()
            },
            "strict": self.strict,
            "verdict": self.safety.label,
            "witnesses": [
                {
                    "rule": w.rule,
                    "reason": w.reason,
                    "term": w.term,
                    "positions": [str(p) for p in w.positions],
                }
                for w in self.safety.witnesses
            ],
        }


def analyze(p: Program, strict: bool = False) -> PositionAnalysis:
    """Full static report; ``strict`` selects the existential-aware taint."""
    affected = affected_positions(p)
    tainted, cause = tainted_positions(p, affected, strict)
    return PositionAnalysis(
        affected=affected,
        tainted=tainted,
        taint_cause=cause,
        seeds=set(taint_seeds(p, affected)),
        per_rule={r.label: classify_rule_variables(r, affected) for r in p.rules},
        tainted_vars={r.label: tainted_variables(r, tainted) for r in p.rules},
        wardedness=check_warded(p, affected),
        safety=check_safe_taintedness(p, tainted),
        strict=strict,
    )
