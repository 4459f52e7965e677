"""Rule language: TGDs, EGDs, facts and queries in ``.dlge`` files.

Concrete syntax::

    % a comment
    component(X) -> component(Z), partOf(X,Z).       % TGD, Z existential
    partOf(X,V), partOf(X,W) -> V = W.               % EGD
    p(X,K), p(Y,K), X != Y -> c(Z,X,Y).              % inequality in a TGD body
    component(engine).                               % fact
    ? partOf(thrust,camshaft).                       % Boolean query
    ?(X,Y) s(Z,X), s(Z,Y).                           % query with output variables

Uppercase-initial (or ``_``-initial) identifiers are variables; lowercase
identifiers, numerals and double-quoted strings are constants; ``_:nK``
denotes the labelled null with identifier ``K`` (facts only).
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

from .model import Atom, Term, const, null, var

__all__ = [
    "TGD",
    "EGD",
    "Query",
    "Program",
    "ParseError",
    "parse_program",
    "print_program",
    "validate",
    "load_program",
    "load_csv_facts",
]


class ParseError(ValueError):
    """Raised for malformed program text; carries a 1-based line and column."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.message = message
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(f"{where}{message}")


@dataclass(frozen=True)
class TGD:
    body: Tuple[Atom, ...]
    head: Tuple[Atom, ...]
    neq: Tuple[Tuple[Term, Term], ...] = ()
    label: str = field(default="", compare=False)
    line: int = field(default=0, compare=False, repr=False)

    @cached_property
    def body_variables(self) -> List[Term]:
        return _ordered_vars(self.body)

    @cached_property
    def head_variables(self) -> List[Term]:
        return _ordered_vars(self.head)

    @cached_property
    def existentials(self) -> List[Term]:
        body = set(self.body_variables)
        return [v for v in self.head_variables if v not in body]

    @cached_property
    def frontier(self) -> List[Term]:
        body = set(self.body_variables)
        return [v for v in self.head_variables if v in body]

    @property
    def is_linear(self) -> bool:
        return len(self.body) == 1

    def __str__(self) -> str:
        parts = [str(a) for a in self.body] + [f"{l} != {r}" for l, r in self.neq]
        return f"{', '.join(parts)} -> {', '.join(str(a) for a in self.head)}."


@dataclass(frozen=True)
class EGD:
    body: Tuple[Atom, ...]
    left: Term
    right: Term
    label: str = field(default="", compare=False)
    line: int = field(default=0, compare=False, repr=False)

    @cached_property
    def body_variables(self) -> List[Term]:
        return _ordered_vars(self.body)

    def __str__(self) -> str:
        return f"{', '.join(str(a) for a in self.body)} -> {self.left} = {self.right}."


@dataclass(frozen=True)
class Query:
    """``q(output_vars) <- body``; no output variables means a Boolean query."""

    output_vars: Tuple[Term, ...]
    body: Tuple[Atom, ...]
    label: str = field(default="", compare=False)
    line: int = field(default=0, compare=False, repr=False)

    @property
    def is_boolean(self) -> bool:
        return not self.output_vars

    def __str__(self) -> str:
        head = "?" if self.is_boolean else f"?({','.join(str(v) for v in self.output_vars)})"
        return f"{head} {', '.join(str(a) for a in self.body)}."


Rule = Union[TGD, EGD]


@dataclass
class Program:
    tgds: List[TGD] = field(default_factory=list)
    egds: List[EGD] = field(default_factory=list)
    facts: List[Atom] = field(default_factory=list)
    queries: List[Query] = field(default_factory=list)

    @property
    def rules(self) -> List[Rule]:
        return [*self.tgds, *self.egds]

    def schema(self) -> Dict[str, int]:
        """Predicate arities, first occurrence wins."""
        out: Dict[str, int] = {}
        for a in self._all_atoms():
            out.setdefault(a.predicate, a.arity)
        return out

    def constants(self) -> set:
        return {t for a in self._all_atoms() for t in a.args if t.is_constant}

    def rule(self, label: str) -> Rule:
        for r in self.rules:
            if r.label == label:
                return r
        raise KeyError(label)

    def without_egds(self) -> "Program":
        return Program(list(self.tgds), [], list(self.facts), list(self.queries))

    def _all_atoms(self):
        for t in self.tgds:
            yield from t.body
            yield from t.head
        for e in self.egds:
            yield from e.body
        yield from self.facts
        for q in self.queries:
            yield from q.body


def _ordered_vars(atoms: Iterable[Atom]) -> List[Term]:
    seen: Dict[Term, None] = {}
    for a in atoms:
        for t in a.args:
            if t.is_variable:
                seen.setdefault(t, None)
    return list(seen)


# -- lexer ----------------------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>%[^\n]*)
  | (?P<arrow>->)
  | (?P<neq>!=)
  | (?P<null>_:n[0-9]+)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<number>-?[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[(),.=?])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> List[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        chunk = m.group()
        if kind not in ("ws", "comment"):
            toks.append(_Tok(kind if kind != "punct" else chunk, chunk, line, pos - line_start + 1))
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


# -- parser ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0
        self.program = Program()
        self.arity: Dict[str, Tuple[int, int]] = {}
        self.n_tgd = 0
        self.n_egd = 0
        self.n_query = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, message: str, tok: Optional[_Tok] = None):
        tok = tok or self.tok
        if tok.kind == "eof":
            # point just past the last real token rather than at trailing whitespace
            line, col = tok.line, tok.col
            if self.i > 0:
                prev = self.toks[self.i - 1]
                line, col = prev.line, prev.col + len(prev.text)
            raise ParseError(f"{message}, found end of input", line, col)
        raise ParseError(f"{message}, found {tok.text!r}", tok.line, tok.col)

    def expect(self, kind: str) -> _Tok:
        if self.tok.kind != kind:
            self.error(f"expected {kind!r}")
        tok = self.tok
        self.i += 1
        return tok

    def accept(self, kind: str) -> bool:
        if self.tok.kind == kind:
            self.i += 1
            return True
        return False

    def parse(self) -> Program:
        while self.tok.kind != "eof":
            self.statement()
        return self.program

    def statement(self):
        start = self.tok
        if self.tok.kind == "?":
            self.query(start)
            return
        items = self.conjunction(allow_neq=True)
        if self.accept("."):
            if len(items) != 1 or not isinstance(items[0], Atom):
                self.error("a fact must be a single atom", start)
            a = items[0]
            if any(t.is_variable for t in a.args):
                raise ParseError(f"fact {a} contains a variable", start.line, start.col)
            self.program.facts.append(a)
            return
        self.expect("arrow")
        body = tuple(x for x in items if isinstance(x, Atom))
        neq = tuple(x for x in items if not isinstance(x, Atom))
        if not body:
            self.error("rule body needs at least one atom", start)
        for a in body:
            if any(t.is_null for t in a.args):
                raise ParseError("labelled nulls are not allowed in rules", start.line, start.col)
        if self._equality_ahead():
            if neq:
                raise ParseError("inequalities are only supported in TGD bodies", start.line, start.col)
            self.egd(body, start)
        else:
            self.tgd(body, neq, start)

    def _equality_ahead(self) -> bool:
        return self.toks[self.i + 1].kind == "=" if self.i + 1 < len(self.toks) else False

    def tgd(self, body, neq, start):
        head = []
        while True:
            item = self.literal(allow_neq=False)
            head.append(item)
            if not self.accept(","):
                break
        self.expect(".")
        for a in head:
            if any(t.is_null for t in a.args):
                raise ParseError("labelled nulls are not allowed in rules", start.line, start.col)
        body_vars = {t for a in body for t in a.args if t.is_variable}
        for l, r in neq:
            for t in (l, r):
                if t.is_variable and t not in body_vars:
                    raise ParseError(f"variable {t} of an inequality does not occur in the body", start.line, start.col)
        self.n_tgd += 1
        self.program.tgds.append(TGD(body, tuple(head), neq, label=f"sigma{self.n_tgd}", line=start.line))

    def egd(self, body, start):
        eqs = []
        while True:
            left_tok = self.tok
            left = self.term()
            self.expect("=")
            right = self.term()
            if left.is_constant and right.is_constant:
                raise ParseError("an EGD cannot equate two constants", left_tok.line, left_tok.col)
            if not (left.is_variable and right.is_variable):
                raise ParseError("EGD equalities must relate two variables", left_tok.line, left_tok.col)
            if left == right:
                raise ParseError(f"EGD equates {left} with itself", left_tok.line, left_tok.col)
            eqs.append((left, right))
            if not self.accept(","):
                break
        self.expect(".")
        self.n_egd += 1
        base = f"eta{self.n_egd}"
        for k, (l, r) in enumerate(eqs, 1):
            label = base if len(eqs) == 1 else f"{base}.{k}"
            self.program.egds.append(EGD(body, l, r, label=label, line=start.line))

    def query(self, start):
        self.expect("?")
        outs: List[Term] = []
        if self.accept("("):
            if not self.accept(")"):
                while True:
                    tok = self.tok
                    t = self.term()
                    if not t.is_variable:
                        self.error("query outputs must be variables", tok)
                    outs.append(t)
                    if not self.accept(","):
                        break
                self.expect(")")
        items = self.conjunction(allow_neq=False)
        self.expect(".")
        body = tuple(items)
        body_vars = {t for a in body for t in a.args}
        for v in outs:
            if v not in body_vars:
                raise ParseError(f"output variable {v} does not occur in the query body", start.line, start.col)
        self.n_query += 1
        self.program.queries.append(Query(tuple(outs), body, label=f"q{self.n_query}", line=start.line))

    def conjunction(self, allow_neq: bool):
        items = [self.literal(allow_neq)]
        while self.accept(","):
            items.append(self.literal(allow_neq))
        return items

    def literal(self, allow_neq: bool):
        if self.tok.kind == "ident" and self.toks[self.i + 1].kind == "(":
            return self.atom()
        if allow_neq and self.tok.kind in ("ident", "number", "string"):
            tok = self.tok
            left = self.term()
            if self.tok.kind != "neq":
                self.error("expected '(' or '!='", self.tok)
            self.i += 1
            right = self.term()
            if not (left.is_variable or right.is_variable):
                raise ParseError("inequality needs at least one variable", tok.line, tok.col)
            return (left, right)
        self.error("expected an atom")

    def atom(self) -> Atom:
        name_tok = self.expect("ident")
        if name_tok.text[0].isupper() or name_tok.text[0] == "_":
            raise ParseError(f"predicate names must start lowercase: {name_tok.text}", name_tok.line, name_tok.col)
        self.expect("(")
        args = [self.term()]
        while self.accept(","):
            args.append(self.term())
        self.expect(")")
        a = Atom(name_tok.text, tuple(args))
        seen = self.arity.get(a.predicate)
        if seen is None:
            self.arity[a.predicate] = (a.arity, name_tok.line)
        elif seen[0] != a.arity:
            raise ParseError(
                f"predicate {a.predicate} used with arity {a.arity} here and arity {seen[0]} on line {seen[1]}",
                name_tok.line,
                name_tok.col,
            )
        return a

    def term(self) -> Term:
        tok = self.tok
        if tok.kind == "ident":
            self.i += 1
            if tok.text[0].isupper() or tok.text[0] == "_":
                return var(tok.text)
            return const(tok.text)
        if tok.kind == "number":
            self.i += 1
            return const(tok.text)
        if tok.kind == "string":
            self.i += 1
            return const(re.sub(r"\\(.)", r"\1", tok.text[1:-1]))
        if tok.kind == "null":
            self.i += 1
            return null(int(tok.text[3:]))
        self.error("expected a term")


def parse_program(text: str) -> Program:
    """Parse program text. Raises :class:`ParseError` on malformed input."""
    return _Parser(text).parse()


def load_program(path: Union[str, Path], facts_dir: Union[str, Path, None] = None) -> Program:
    program = parse_program(Path(path).read_text(encoding="utf-8"))
    if facts_dir is not None:
        seen = set(program.facts)
        for a in load_csv_facts(facts_dir):
            if a not in seen:
                seen.add(a)
                program.facts.append(a)
    return program


def load_csv_facts(directory: Union[str, Path]) -> List[Atom]:
    """Read ``<predicate>.csv`` files; every field is a constant, no header row."""
    out = []
    for path in sorted(Path(directory).glob("*.csv")):
        with path.open(newline="", encoding="utf-8") as fh:
            for row in csv.reader(fh):
                if row:
                    out.append(Atom(path.stem, tuple(const(f.strip()) for f in row)))
    return out


# -- printing ---------------------------------------------------------------------------


def print_program(p: Program) -> str:
    """Render ``p`` so that ``parse_program`` reads back an equal program."""
    lines = []
    for t in p.tgds:
        lines.append(str(t))
    i = 0
    while i < len(p.egds):
        e = p.egds[i]
        group = [e]
        stem = e.label.split(".")[0] if "." in e.label else None
        while stem and i + len(group) < len(p.egds):
            nxt = p.egds[i + len(group)]
            if nxt.label.split(".")[0] != stem or nxt.body != e.body:
                break
            group.append(nxt)
        eqs = ", ".join(f"{g.left} = {g.right}" for g in group)
        lines.append(f"{', '.join(str(a) for a in e.body)} -> {eqs}.")
        i += len(group)
    for a in p.facts:
        lines.append(f"{a}.")
    for q in p.queries:
        lines.append(str(q))
    return "\n".join(lines) + ("\n" if lines else "")


# -- validation -------------------------------------------------------------------------


def validate(p: Program) -> List[str]:
    """Human-readable diagnostics; an empty list means the program is well formed."""
    diags = []
    arity: Dict[str, int] = {}
    for a in p._all_atoms():
        if a.arity == 0:
            diags.append(f"atom {a} has arity 0")
            continue
        known = arity.setdefault(a.predicate, a.arity)
        if known != a.arity:
            diags.append(f"predicate {a.predicate} used with arities {known} and {a.arity}")
            arity[a.predicate] = a.arity
    for t in p.tgds:
        if not t.body or not t.head:
            diags.append(f"{t.label}: TGD body and head must be nonempty")
        for a in t.body:
            if any(x.is_null for x in a.args):
                diags.append(f"{t.label}: body atom {a} contains a labelled null")
    for e in p.egds:
        body_vars = set(e.body_variables)
        for side in (e.left, e.right):
            if not side.is_variable:
                diags.append(f"{e.label}: equality side {side} is not a variable")
            elif side not in body_vars:
                diags.append(f"{e.label}: variable {side} does not occur in the body")
        if e.left == e.right:
            diags.append(f"{e.label}: equates {e.left} with itself")
    for a in p.facts:
        if not a.is_ground():
            diags.append(f"fact {a} contains a variable")
    for q in p.queries:
        body_vars = {x for a in q.body for x in a.args}
        for v in q.output_vars:
            if v not in body_vars:
                diags.append(f"{q.label}: output variable {v} not in body")
    return diags
