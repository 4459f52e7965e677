"""Query answering: relaxed warded chase of the TGDs, then the EGD fixpoint.

The pipeline is only guaranteed correct when the EGDs are harmless, which
this package certifies through safe taintedness. Uncertified programs are
refused by default; callers may fall back to a bounded standard chase or force
the pipeline anyway.
"""

from __future__ import annotations

import csv
import io
import json
import time
import warnings
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Set, Tuple

from .analysis import PositionAnalysis, analyze
from .chase import DEFAULT_STEP_LIMIT, ChaseOutcome, ChaseStatus, relaxed_warded_chase, standard_chase
from .egd import egd_fixpoint
from .model import Atom, Instance, Term, find_homomorphism, match, uncovered_facts
from .syntax import Program, Query

__all__ = [
    "NotCertified",
    "UnsafeReasoningWarning",
    "chase_h",
    "ReasoningResult",
    "answer_bcq",
    "answer_cq",
    "answer",
    "evaluate_query",
    "HarmlessnessReport",
    "verify_harmlessness_on_instance",
]

ANSWERED = "answered"
UNSATISFIABLE = "unsatisfiable"
NOT_CERTIFIED = "not_certified"
STEP_LIMIT = "step_limit"

POLICIES = ("refuse", "standard", "force")


class NotCertified(Exception):
    """The program is not warded or its EGDs are not certified harmless."""

    def __init__(self, analysis: PositionAnalysis):
        self.analysis = analysis
        reasons = [f"{r}: dangerous variables {', '.join(map(str, vs))} span several atoms"
                   for r, vs in analysis.wardedness.violations]
        reasons += [str(w) for w in analysis.safety.witnesses]
        super().__init__("; ".join(reasons) or "not certified")


class UnsafeReasoningWarning(UserWarning):
    pass


def _certify(program: Program, force: bool, strict: bool = False) -> PositionAnalysis:
    report = analyze(program, strict=strict)
    if not report.accepted:
        if not force:
            raise NotCertified(report)
        warnings.warn(
            f"answers may be unsound: {NotCertified(report)}", UnsafeReasoningWarning, stacklevel=3
        )
    return report


def chase_h(
    program: Program,
    database: Optional[Iterable[Atom]] = None,
    *,
    force: bool = False,
    limit: int = DEFAULT_STEP_LIMIT,
    batch_threshold: Optional[int] = None,
    strict: bool = False,
) -> ChaseOutcome:
    """Relaxed warded chase of the TGDs followed by the EGDs to fixpoint.

    Raises :class:`NotCertified` for programs outside the certified class
    unless ``force`` is set; ``strict`` certifies with the existential-aware
    taint.
    """
    _certify(program, force, strict)
    base = relaxed_warded_chase(program, database, limit=limit)
    if base.status is ChaseStatus.STEP_LIMIT or not program.egds:
        base.variant = "chase_h"
        return base
    fx = egd_fixpoint(
        base.instance, program.egds, batch_threshold=batch_threshold, shadow=base.shadow_facts()
    )
    status = ChaseStatus.FAILED if fx.failed else ChaseStatus.SATURATED
    inst = fx.instance if fx.instance is not None else base.instance
    return ChaseOutcome(
        status,
        inst,
        base.graph,
        dict(fx.assignment),
        fx.violation,
        base.transcript,
        base.suppressed,
        base.steps,
        base.rounds,
        "chase_h",
        fx,
    )


@dataclass
class ReasoningResult:
    status: str
    query: Optional[Query] = None
    bcq_answer: Optional[bool] = None
    tuples: Optional[Set[Tuple[Term, ...]]] = None
    notes: List[str] = field(default_factory=list)
    stats: Dict[str, object] = field(default_factory=dict)

    @property
    def answered(self) -> bool:
        return self.status == ANSWERED

    def sorted_tuples(self) -> List[Tuple[Term, ...]]:
        return sorted(self.tuples or (), key=lambda tup: [(t.kind, str(t.name)) for t in tup])

    def to_dict(self) -> dict:
        out = {"status": self.status, "notes": list(self.notes), "stats": dict(self.stats)}
        if self.query is not None:
            out["query"] = str(self.query)
            if self.query.is_boolean:
                out["answer"] = self.bcq_answer
            else:
                out["variables"] = [str(v) for v in self.query.output_vars]
                out["tuples"] = None if self.tuples is None else [[str(t) for t in tup] for tup in self.sorted_tuples()]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if self.query is not None and not self.query.is_boolean:
            w.writerow([str(v) for v in self.query.output_vars])
        else:
            w.writerow(["answer"])
            w.writerow(["true" if self.bcq_answer else "false"])
            return buf.getvalue()
        for tup in self.sorted_tuples():
            w.writerow([str(t) for t in tup])
        return buf.getvalue()


def evaluate_query(query: Query, inst: Instance, constants_only: bool = False):
    if query.is_boolean:
        return next(match(query.body, inst), None) is not None
    out = set()
    for sol in match(query.body, inst):
        tup = tuple(sol[v] for v in query.output_vars)
        if constants_only and any(not t.is_constant for t in tup):
            continue
        out.add(tup)
    return out


def _run(
    program: Program,
    query: Query,
    database,
    on_uncertified: str,
    tgd_only: bool,
    limit: int,
    batch_threshold: Optional[int],
    constants_only: bool,
    strict: bool = False,
) -> ReasoningResult:
    if on_uncertified not in POLICIES:
        raise ValueError(f"on_uncertified must be one of {POLICIES}")
    if tgd_only:
        program = program.without_egds()
    t0 = time.perf_counter()
    result = ReasoningResult(ANSWERED, query)
    report = analyze(program, strict=strict)
    if not report.accepted:
        if on_uncertified == "refuse":
            result.status = NOT_CERTIFIED
            result.notes = [str(NotCertified(report))]
            return result
        if on_uncertified == "standard":
            out = standard_chase(program, database, limit=limit)
            result.notes.append("not certified: answered by bounded standard chase")
        else:
            out = chase_h(program, database, force=True, limit=limit, batch_threshold=batch_threshold, strict=strict)
            result.notes.append("not certified: forced, answers may be unsound")
    else:
        out = chase_h(program, database, limit=limit, batch_threshold=batch_threshold, strict=strict)
    result.stats = {
        "facts": len(out.instance),
        "tgd_steps": out.steps,
        "suppressed": len(out.suppressed),
        "assignments": len(out.egd_assignments),
        "chase": out.variant,
    }
    if out.status is ChaseStatus.FAILED:
        result.status = UNSATISFIABLE
        result.notes.append(f"unsatisfiable: {out.violation}")
        if query.is_boolean:
            result.bcq_answer = True
    else:
        value = evaluate_query(query, out.query_instance(), constants_only)
        if query.is_boolean:
            result.bcq_answer = value
        else:
            result.tuples = value
        if out.status is ChaseStatus.STEP_LIMIT:
            result.status = STEP_LIMIT
            result.notes.append(f"step limit {limit} reached; answers are a lower bound")
            if query.is_boolean and not value:
                result.bcq_answer = None
    result.stats["seconds"] = round(time.perf_counter() - t0, 6)
    return result


def answer_bcq(
    program: Program,
    query: Query,
    database: Optional[Iterable[Atom]] = None,
    *,
    on_uncertified: str = "refuse",
    tgd_only: bool = False,
    limit: int = DEFAULT_STEP_LIMIT,
    batch_threshold: Optional[int] = None,
    strict: bool = False,
) -> ReasoningResult:
    """Decide a Boolean query; unsatisfiable input entails every query."""
    if not query.is_boolean:
        query = Query((), query.body, query.label, query.line)
    return _run(program, query, database, on_uncertified, tgd_only, limit, batch_threshold, False, strict)


def answer_cq(
    program: Program,
    query: Query,
    database: Optional[Iterable[Atom]] = None,
    *,
    on_uncertified: str = "refuse",
    tgd_only: bool = False,
    limit: int = DEFAULT_STEP_LIMIT,
    batch_threshold: Optional[int] = None,
    constants_only: bool = False,
    strict: bool = False,
) -> ReasoningResult:
    """Answer tuples of ``query``; they may contain nulls unless ``constants_only``."""
    return _run(program, query, database, on_uncertified, tgd_only, limit, batch_threshold, constants_only, strict)


def answer(program: Program, query: Query, database=None, **kwargs) -> ReasoningResult:
    if query.is_boolean:
        kwargs.pop("constants_only", None)
        return answer_bcq(program, query, database, **kwargs)
    return answer_cq(program, query, database, **kwargs)


# -- harmlessness oracle -------------------------------------------------------------------------


@dataclass
class HarmlessnessReport:
    status: str  # confirmed, violated or inconclusive
    condition_i: Optional[bool] = None
    condition_ii: Optional[bool] = None
    homomorphism: Optional[Dict[Term, Term]] = None
    witnesses: List[Atom] = field(default_factory=list)
    note: str = ""

    @property
    def confirmed(self) -> bool:
        return self.status == "confirmed"


def verify_harmlessness_on_instance(
    program: Program,
    database: Optional[Iterable[Atom]] = None,
    limit: int = DEFAULT_STEP_LIMIT,
) -> HarmlessnessReport:
    """Check the two harmlessness conditions on one database by brute force.

    (i) if the full chase fails, the TGD-only chase already violates the EGDs;
    (ii) otherwise some homomorphism maps the TGD-only chase onto the full one.
    Both chases are bounded standard chases; hitting the limit is inconclusive.
    """
    full = standard_chase(program, database, limit=limit)
    tgd = standard_chase(program.without_egds(), database, limit=limit)
    if ChaseStatus.STEP_LIMIT in (full.status, tgd.status):
        return HarmlessnessReport("inconclusive", note="step limit reached")
    if full.failed:
        violates = egd_fixpoint(tgd.instance, program.egds).failed
        if violates:
            return HarmlessnessReport("confirmed", condition_i=True, note="both chases fail")
        return HarmlessnessReport(
            "violated", condition_i=False, note=f"full chase fails ({full.violation}) but the TGD chase satisfies the EGDs"
        )
    h = find_homomorphism(tgd.instance, full.instance, onto=True)
    if h is None:
        missing = sorted(uncovered_facts(tgd.instance, full.instance), key=str)
        return HarmlessnessReport("violated", condition_i=True, condition_ii=False, witnesses=missing,
                                  note="no homomorphism onto the full chase")
    return HarmlessnessReport("confirmed", condition_i=True, condition_ii=True, homomorphism=h)
