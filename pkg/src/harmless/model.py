"""Terms, atoms, instances and homomorphism search.

Everything else in the package is built on the three term domains
(constants, labelled nulls, variables), ground atoms stored in an
:class:`Instance`, and substitutions represented as plain ``dict`` objects
mapping :class:`Term` to :class:`Term`.
"""

from __future__ import annotations

import itertools
import re
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, Mapping, NamedTuple, Optional, Sequence, Tuple

CONST = "const"
NULL = "null"
VAR = "var"

_BARE_CONSTANT = re.compile(r"(?:[a-z][A-Za-z0-9_]*|-?[0-9]+)\Z")


class Term(NamedTuple):
    """A constant, labelled null or variable; equality is kind plus name."""

    kind: str
    name: object

    @property
    def is_constant(self) -> bool:
        return self.kind == CONST

    @property
    def is_null(self) -> bool:
        return self.kind == NULL

    @property
    def is_variable(self) -> bool:
        return self.kind == VAR

    def __str__(self) -> str:
        if self.kind == NULL:
            return f"_:n{self.name}"
        if self.kind == CONST:
            text = str(self.name)
            if _BARE_CONSTANT.match(text):
                return text
            escaped = text.replace("\\", "\\\\").replace('"', '\\"')
            return f'"{escaped}"'
        return str(self.name)

    def __repr__(self) -> str:
        return f"{self.kind[0]}:{self}"


def const(name) -> Term:
    """Build a constant. Names are normalised to strings, so ``1`` and ``"1"`` coincide."""
    return Term(CONST, str(name))


def null(ident: int) -> Term:
    return Term(NULL, int(ident))


def var(name: str) -> Term:
    return Term(VAR, name)


Substitution = Dict[Term, Term]


class Atom(NamedTuple):
    predicate: str
    args: Tuple[Term, ...]

    @property
    def arity(self) -> int:
        return len(self.args)

    def is_ground(self) -> bool:
        return all(not t.is_variable for t in self.args)

    def variables(self) -> List[Term]:
        return [t for t in self.args if t.is_variable]

    def nulls(self) -> List[Term]:
        return [t for t in self.args if t.is_null]

    def __str__(self) -> str:
        return f"{self.predicate}({','.join(str(t) for t in self.args)})"

    def __repr__(self) -> str:
        return str(self)


def atom(predicate: str, *args) -> Atom:
    """Convenience constructor; bare Python values become constants."""
    return Atom(predicate, tuple(a if isinstance(a, Term) else const(a) for a in args))


@dataclass(frozen=True)
class Fact:
    """A ground atom together with the identifier it received on insertion."""

    id: int
    atom: Atom

    def __str__(self) -> str:
        return str(self.atom)


class NullFactory:
    """Issues labelled nulls with strictly increasing identifiers."""

    def __init__(self, start: int = 1):
        self._counter = itertools.count(start)

    def fresh(self) -> Term:
        return null(next(self._counter))

    @classmethod
    def after(cls, atoms: Iterable[Atom]) -> "NullFactory":
        """A factory whose nulls cannot clash with any null already in ``atoms``."""
        top = 0
        for a in atoms:
            for t in a.args:
                if t.is_null and t.name > top:
                    top = t.name
        return cls(top + 1)


_session_nulls = NullFactory()


def fresh_null() -> Term:
    """Return a null never issued before by this process-wide factory."""
    return _session_nulls.fresh()


class Instance:
    """A set of ground atoms with stable fact identifiers.

    Facts are indexed by predicate and by (predicate, position, term) so that
    :func:`match` can restrict candidates on bound positions. Rewriting nulls
    keeps identifiers; when two facts collapse into one, the older id survives.
    """

    def __init__(self, atoms: Iterable[Atom] = ()):
        self._atoms: Dict[int, Atom] = {}
        self._ids: Dict[Atom, int] = {}
        self._by_pred: Dict[str, Dict[int, None]] = defaultdict(dict)
        self._by_term: Dict[Tuple[str, int, Term], Dict[int, None]] = defaultdict(dict)
        self._null_occ: Dict[Term, Dict[int, None]] = defaultdict(dict)
        self._next_id = 1
        for a in atoms:
            self.add(a)

    # -- basic container protocol -------------------------------------------------
    def __len__(self) -> int:
        return len(self._atoms)

    def __contains__(self, item) -> bool:
        if isinstance(item, Fact):
            item = item.atom
        return item in self._ids

    def __iter__(self) -> Iterator[Atom]:
        return iter(list(self._atoms.values()))

    def __eq__(self, other) -> bool:
        if isinstance(other, Instance):
            return set(self._ids) == set(other._ids)
        return NotImplemented

    def __repr__(self) -> str:
        return f"Instance({len(self)} facts)"

    def atoms(self) -> set:
        return set(self._ids)

    def facts(self, predicate: Optional[str] = None) -> List[Fact]:
        if predicate is None:
            return [Fact(i, a) for i, a in self._atoms.items()]
        return [Fact(i, self._atoms[i]) for i in self._by_pred.get(predicate, ())]

    def get(self, fact_id: int) -> Atom:
        return self._atoms[fact_id]

    def id_of(self, a: Atom) -> Optional[int]:
        return self._ids.get(a)

    def predicates(self) -> List[str]:
        return [p for p, ids in self._by_pred.items() if ids]

    def nulls(self) -> List[Term]:
        return [n for n, occ in self._null_occ.items() if occ]

    def constants(self) -> set:
        return {t for a in self._atoms.values() for t in a.args if t.is_constant}

    def copy(self) -> "Instance":
        other = Instance()
        for i, a in self._atoms.items():
            other._insert(i, a)
        other._next_id = self._next_id
        return other

    # -- mutation -------------------------------------------------------------------
    def add(self, a: Atom) -> Tuple[int, bool]:
        """Insert ``a``; returns its id and whether it was new."""
        existing = self._ids.get(a)
        if existing is not None:
            return existing, False
        if any(t.is_variable for t in a.args):
            raise ValueError(f"facts cannot contain variables: {a}")
        fid = self._next_id
        self._next_id += 1
        self._insert(fid, a)
        return fid, True

    def _insert(self, fid: int, a: Atom) -> None:
        self._atoms[fid] = a
        self._ids[a] = fid
        self._by_pred[a.predicate][fid] = None
        for pos, t in enumerate(a.args):
            self._by_term[(a.predicate, pos, t)][fid] = None
            if t.is_null:
                self._null_occ[t][fid] = None

    def _remove(self, fid: int) -> Atom:
        a = self._atoms.pop(fid)
        del self._ids[a]
        del self._by_pred[a.predicate][fid]
        for pos, t in enumerate(a.args):
            bucket = self._by_term[(a.predicate, pos, t)]
            bucket.pop(fid, None)
            if not bucket:
                del self._by_term[(a.predicate, pos, t)]
            if t.is_null:
                self._null_occ[t].pop(fid, None)
        return a

    def rewrite(self, mapping: Mapping[Term, Term]) -> List[Tuple[int, int]]:
        """Replace nulls according to ``mapping`` in place.

        Returns ``(dropped_id, kept_id)`` pairs for facts that became identical.
        """
        touched = set()
        for n in mapping:
            touched.update(self._null_occ.get(n, ()))
        merges = []
        for fid in sorted(touched):
            old = self._remove(fid)
            new = Atom(old.predicate, tuple(mapping.get(t, t) for t in old.args))
            other = self._ids.get(new)
            if other is None:
                self._insert(fid, new)
            elif other < fid:
                merges.append((fid, other))
            else:
                self._remove(other)
                self._insert(fid, new)
                merges.append((other, fid))
        return merges

    # -- lookup ---------------------------------------------------------------------
    def candidates(self, predicate: str, bound: Sequence[Tuple[int, Term]]) -> List[int]:
        """Fact ids of ``predicate`` agreeing with every (position, term) in ``bound``."""
        pool = self._by_pred.get(predicate)
        if not pool:
            return []
        best = pool
        for pos, t in bound:
            ids = self._by_term.get((predicate, pos, t))
            if not ids:
                return []
            if len(ids) < len(best):
                best = ids
        return list(best)


# -- substitutions ----------------------------------------------------------------------


def apply_term(s: Mapping[Term, Term], t: Term) -> Term:
    if t.is_constant:
        return t
    return s.get(t, t)


def apply_atom(s: Mapping[Term, Term], a: Atom) -> Atom:
    return Atom(a.predicate, tuple(apply_term(s, t) for t in a.args))


def apply(s: Mapping[Term, Term], atoms: Iterable[Atom]) -> Tuple[Atom, ...]:
    """Apply ``s`` to every atom of a conjunction; unmapped terms are kept."""
    return tuple(apply_atom(s, a) for a in atoms)


def compose(first: Mapping[Term, Term], second: Mapping[Term, Term]) -> Substitution:
    """The substitution ``t -> second(first(t))``."""
    out: Substitution = {}
    for t in itertools.chain(first, second):
        if t in out:
            continue
        img = apply_term(second, apply_term(first, t))
        if img != t:
            out[t] = img
    return out


# -- matching -------------------------------------------------------------------------


def _unify_atom(pattern: Atom, fact: Atom, binding: Dict[Term, Term]) -> Optional[Dict[Term, Term]]:
    if len(pattern.args) != len(fact.args):
        return None
    out = None
    for p, f in zip(pattern.args, fact.args):
        if p.kind == VAR:
            cur = (out or binding).get(p)
            if cur is None:
                if out is None:
                    out = dict(binding)
                out[p] = f
            elif cur != f:
                return None
        elif p != f:
            return None
    return out if out is not None else dict(binding)


def _neq_ok(neq, binding) -> bool:
    """Inequalities hold only between two distinct constants; unbound pairs pass for now."""
    for left, right in neq:
        a = binding.get(left, left) if left.is_variable else left
        b = binding.get(right, right) if right.is_variable else right
        if a.is_variable or b.is_variable:
            continue
        if not (a.is_constant and b.is_constant) or a == b:
            return False
    return True


def match(
    pattern: Sequence[Atom],
    inst: Instance,
    binding: Optional[Mapping[Term, Term]] = None,
    neq: Sequence[Tuple[Term, Term]] = (),
    with_facts: bool = False,
) -> Iterator:
    """Yield every homomorphism from ``pattern`` into ``inst``.

    Atoms are picked greedily by the number of bound positions. With
    ``with_facts`` each result is a ``(substitution, fact_ids)`` pair where
    ``fact_ids[k]`` is the fact matched by ``pattern[k]``.
    """
    atoms = list(pattern)
    start = dict(binding or {})
    chosen: List[Optional[int]] = [None] * len(atoms)

    def bound_positions(a: Atom, b: Mapping[Term, Term]):
        out = []
        for pos, t in enumerate(a.args):
            if t.kind != VAR:
                out.append((pos, t))
            elif t in b:
                out.append((pos, b[t]))
        return out

    def search(remaining: List[int], b: Dict[Term, Term]):
        if not remaining:
            if _neq_ok(neq, b):
                yield (dict(b), tuple(chosen)) if with_facts else dict(b)
            return
        best_k, best_bound = None, None
        for k in remaining:
            bp = bound_positions(atoms[k], b)
            if best_bound is None or len(bp) > len(best_bound):
                best_k, best_bound = k, bp
        rest = [k for k in remaining if k != best_k]
        a = atoms[best_k]
        for fid in inst.candidates(a.predicate, best_bound):
            ext = _unify_atom(a, inst.get(fid), b)
            if ext is None or not _neq_ok(neq, ext):
                continue
            chosen[best_k] = fid
            yield from search(rest, ext)
        chosen[best_k] = None

    if not _neq_ok(neq, start):
        return iter(())
    return search(list(range(len(atoms))), start)


def holds(pattern: Sequence[Atom], inst: Instance, neq: Sequence[Tuple[Term, Term]] = ()) -> bool:
    return next(match(pattern, inst, neq=neq), None) is not None


# -- isomorphism ----------------------------------------------------------------------


def canonical(a: Atom) -> Tuple:
    """Predicate plus arguments with nulls numbered by first occurrence."""
    seen: Dict[Term, int] = {}
    out = []
    for t in a.args:
        if t.is_null:
            out.append(("#", seen.setdefault(t, len(seen))))
        else:
            out.append(t)
    return (a.predicate, tuple(out))


def isomorphic(f: Atom, g: Atom) -> bool:
    """Whether two facts coincide up to a bijective renaming of their nulls."""
    if isinstance(f, Fact):
        f = f.atom
    if isinstance(g, Fact):
        g = g.atom
    return canonical(f) == canonical(g)


# -- homomorphisms between instances -------------------------------------------------------


def _as_atoms(x) -> List[Atom]:
    return list(x) if not isinstance(x, Instance) else list(x)


def _null_var(n: Term) -> Term:
    return Term(VAR, ("null", n.name))


def _components(atoms: List[Atom]) -> List[List[Atom]]:
    """Group atoms that share nulls (transitively)."""
    parent: Dict[Term, Term] = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a in atoms:
        ns = a.nulls()
        for n in ns:
            parent.setdefault(n, n)
        for n in ns[1:]:
            ra, rb = find(ns[0]), find(n)
            if ra != rb:
                parent[rb] = ra
    groups: Dict[Term, List[Atom]] = defaultdict(list)
    for a in atoms:
        ns = a.nulls()
        if ns:
            groups[find(ns[0])].append(a)
    return list(groups.values())


def find_homomorphism(src, dst, onto: bool = False, max_solutions: int = 20000) -> Optional[Substitution]:
    """Search for ``h`` with ``h(src) ⊆ dst`` (or ``= dst`` when ``onto``).

    ``h`` is total on the nulls of ``src`` and fixes constants. Components of
    ``src`` linked by shared nulls are solved independently; in ``onto`` mode a
    covering choice of per-component images is then searched for.
    Returns ``None`` when no such homomorphism exists.
    """
    src_atoms = _as_atoms(src)
    dst_inst = dst if isinstance(dst, Instance) else Instance(dst)
    ground = [a for a in src_atoms if not a.nulls()]
    if any(a not in dst_inst for a in ground):
        return None
    comps = _components(src_atoms)
    to_var = {}
    patterns = []
    for comp in comps:
        pat = []
        for a in comp:
            args = []
            for t in a.args:
                if t.is_null:
                    to_var.setdefault(t, _null_var(t))
                    args.append(to_var[t])
                else:
                    args.append(t)
            pat.append(Atom(a.predicate, tuple(args)))
        patterns.append(pat)
    back = {v: n for n, v in to_var.items()}

    def to_h(binding):
        return {back[v]: t for v, t in binding.items() if v in back}

    if not onto:
        h: Substitution = {}
        for pat in patterns:
            sol = next(match(pat, dst_inst), None)
            if sol is None:
                return None
            h.update(to_h(sol))
        return h

    # onto: every fact of dst must be the image of something
    options = []
    for pat in patterns:
        seen = {}
        for sol in itertools.islice(match(pat, dst_inst), max_solutions):
            img = frozenset(apply(sol, pat))
            if img not in seen:
                seen[img] = sol
        if not seen:
            return None
        options.append(list(seen.items()))
    target = dst_inst.atoms() - set(ground)
    order = sorted(range(len(options)), key=lambda k: len(options[k]))
    reach_after = [set() for _ in range(len(order) + 1)]
    for pos in range(len(order) - 1, -1, -1):
        reach_after[pos] = set(reach_after[pos + 1])
        for img, _ in options[order[pos]]:
            reach_after[pos] |= img
    if not target <= reach_after[0]:
        return None
    chosen = [None] * len(order)

    def cover(pos: int, uncovered: set) -> bool:
        if pos == len(order):
            return not uncovered
        if not uncovered <= reach_after[pos]:
            return False
        opts = sorted(options[order[pos]], key=lambda o: -len(o[0] & uncovered))
        for img, sol in opts:
            chosen[pos] = sol
            if cover(pos + 1, uncovered - img):
                return True
        return False

    if not cover(0, target):
        return None
    h = {}
    for sol in chosen:
        h.update(to_h(sol))
    return h


def uncovered_facts(src, dst, max_solutions: int = 20000) -> set:
    """Facts of ``dst`` that no homomorphism from ``src`` into ``dst`` reaches.

    Any such fact witnesses that no homomorphism maps ``src`` onto ``dst``.
    """
    src_atoms = _as_atoms(src)
    dst_inst = dst if isinstance(dst, Instance) else Instance(dst)
    reached = {a for a in src_atoms if not a.nulls() and a in dst_inst}
    for comp in _components(src_atoms):
        mapping = {n: _null_var(n) for a in comp for n in a.nulls()}
        pat = [apply_atom(mapping, a) for a in comp]
        for sol in itertools.islice(match(pat, dst_inst), max_solutions):
            reached.update(apply(sol, pat))
    return dst_inst.atoms() - reached
