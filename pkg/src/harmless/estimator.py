"""Estimator-style wrapper: fit on a database, transform to the chased
instance, predict query answers."""

from __future__ import annotations

from typing import List, Optional, Union

from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .analysis import analyze
from .chase import DEFAULT_STEP_LIMIT, ChaseStatus, standard_chase
from .model import Atom, Instance, const
from .reason import POLICIES, chase_h, evaluate_query
from .syntax import Program, Query, parse_program, validate

__all__ = ["check_program", "check_facts", "check_queries", "HarmlessReasoner"]


def check_program(program: Union[str, Program]) -> Program:
    """Parse program text if needed and reject malformed programs."""
    if isinstance(program, str):
        program = parse_program(program)
    if not isinstance(program, Program):
        raise TypeError(f"expected program text or Program, got {type(program).__name__}")
    problems = validate(program)
    if problems:
        raise ValueError("; ".join(problems))
    return program


def check_facts(facts, program: Optional[Program] = None) -> List[Atom]:
    """Normalize facts to ground atoms.

    Accepts atoms, ``(predicate, arg, ...)`` tuples, program text containing
    only facts, or an :class:`Instance`. Arities are checked against
    ``program`` when given.
    """
    if facts is None:
        return []
    if isinstance(facts, str):
        parsed = parse_program(facts)
        if parsed.rules or parsed.queries:
            raise ValueError("fact text must contain facts only")
        facts = parsed.facts
    out = []
    for f in facts:
        if isinstance(f, Atom):
            a = f
        elif isinstance(f, (tuple, list)) and f and isinstance(f[0], str):
            a = Atom(f[0], tuple(const(x) for x in f[1:]))
        else:
            raise TypeError(f"cannot interpret {f!r} as a fact")
        if not a.is_ground():
            raise ValueError(f"fact {a} contains a variable")
        out.append(a)
    if program is not None:
        schema = program.schema()
        for a in out:
            if a.predicate in schema and schema[a.predicate] != a.arity:
                raise ValueError(f"{a} has arity {a.arity}, expected {schema[a.predicate]}")
    return list(dict.fromkeys(out))


def check_queries(queries) -> List[Query]:
    if isinstance(queries, Query):
        return [queries]
    if isinstance(queries, str):
        return parse_program(queries).queries
    out = []
    for q in queries:
        out.extend(check_queries(q))
    return out


class HarmlessReasoner(BaseEstimator):
    """Reasoner over a fixed rule set.

    Parameters
    ----------
    program : str or Program
        Rules (facts inside it are used when ``fit`` gets no database).
    limit : int
        TGD step budget.
    on_uncertified : {"refuse", "standard", "force"}
        Policy for programs whose EGDs are not certified harmless.
    batch_threshold : int or None
        Edge buffer size for the batched EGD fixpoint.
    constants_only : bool
        Drop answer tuples that contain nulls.
    strict : bool
        Certify with taint carried through shared existential variables.
    """

    def __init__(
        self,
        program=None,
        limit: int = DEFAULT_STEP_LIMIT,
        on_uncertified: str = "refuse",
        batch_threshold: Optional[int] = None,
        constants_only: bool = False,
        strict: bool = False,
    ):
        self.program = program
        self.limit = limit
        self.on_uncertified = on_uncertified
        self.batch_threshold = batch_threshold
        self.constants_only = constants_only
        self.strict = strict

    def fit(self, X=None, y=None):
        program = check_program(self.program if self.program is not None else "")
        if self.on_uncertified not in POLICIES:
            raise ValueError(f"on_uncertified must be one of {POLICIES}")
        if self.limit < 1:
            raise ValueError("limit must be at least 1")
        facts = check_facts(X, program) if X is not None else list(program.facts)
        self.program_ = program
        self.analysis_ = analyze(program, strict=self.strict)
        if not self.analysis_.accepted and self.on_uncertified == "standard":
            self.outcome_ = standard_chase(program, facts, limit=self.limit)
        else:
            self.outcome_ = chase_h(
                program,
                facts,
                force=self.on_uncertified == "force",
                limit=self.limit,
                batch_threshold=self.batch_threshold,
                strict=self.strict,
            )
        self.status_ = self.outcome_.status
        self.n_facts_in_ = len(facts)
        return self

    def _check_fitted(self):
        if not hasattr(self, "outcome_"):
            raise NotFittedError("call fit before using this reasoner")

    @property
    def unsatisfiable_(self) -> bool:
        self._check_fitted()
        return self.outcome_.status is ChaseStatus.FAILED

    def transform(self, X=None) -> Instance:
        """The chased instance; with ``X``, refit on that database first."""
        if X is not None:
            self.fit(X)
        self._check_fitted()
        return self.outcome_.instance

    def fit_transform(self, X=None, y=None) -> Instance:
        return self.fit(X).transform()

    def predict(self, queries) -> list:
        """Boolean answers for Boolean queries and tuple sets for the others.

        On unsatisfiable input every Boolean query is entailed and other
        queries yield ``None``.
        """
        self._check_fitted()
        out = []
        for q in check_queries(queries):
            if self.unsatisfiable_:
                out.append(True if q.is_boolean else None)
            else:
                out.append(evaluate_query(q, self.outcome_.query_instance(), self.constants_only))
        return out
