import random

from hypothesis import given, settings
from hypothesis import strategies as st

from harmless import bundled
from harmless.chase import ChaseStatus, relaxed_warded_chase, standard_chase
from harmless.corpus import random_program
from harmless.egd import UnificationGraph, build_sat_encoding, check_satisfiability, egd_fixpoint
from harmless.model import Atom, Instance, apply_term, const, match, null
from harmless.syntax import Program, parse_program

a, b, c = const("a"), const("b"), const("c")


def test_unification_graph_constant_slot():
    g = UnificationGraph()
    assert g.union(null(3), null(1)) is None
    assert g.representative(null(3)) == null(1)
    assert g.union(null(3), a) is None
    assert g.representative(null(1)) == a
    assert g.union(null(1), b) == (a, b)
    assert g.assignment() == {null(1): a, null(3): a}


def test_intro_assignments():
    p = bundled.load("parts")
    base = relaxed_warded_chase(p)
    fx = egd_fixpoint(base.instance, p.egds, shadow=base.shadow_facts())
    assert not fx.failed
    camshaft_null = next(x.args[1] for x in base.instance if x.predicate == "partOf" and x.args[0] == const("camshaft"))
    assert fx.assignment[camshaft_null] == const("engine")


def test_clusters_merge_into_one_component():
    p = bundled.load("clusters_by_attribute")
    tgd = standard_chase(p.without_egds()).instance
    fx = egd_fixpoint(tgd, p.egds)
    cluster_nulls = {x.args[1] for x in tgd if x.predicate == "comp"}
    assert len(cluster_nulls) >= 2
    assert len({fx.assignment.get(n, n) for n in cluster_nulls}) == 1


def test_split_key_fails_with_both_constants():
    p = bundled.load("split_key")
    fx = egd_fixpoint(standard_chase(p.without_egds()).instance, p.egds)
    assert fx.failed
    assert {fx.violation.left, fx.violation.right} == {b, c}


def test_no_triggers_is_identity():
    inst = Instance([Atom("p", (a, null(1)))])
    fx = egd_fixpoint(inst, parse_program("q(X,Y) -> X = Y.").egds)
    assert fx.assignment == {} and fx.instance == inst and fx.graph.edges == []


def test_encoding_counts_and_empty_egds():
    inst = Instance([Atom("p", (a, b)), Atom("p", (c, null(1)))])
    enc = build_sat_encoding(inst, [])
    assert len(enc.base.facts(enc.neq)) == 3 * 2
    assert [r.label for r in enc.rules] == ["eq_symmetry", "eq_transitivity"]
    out = standard_chase(enc.program(), limit=10**6)
    assert next(match(enc.check_query.body, out.instance), None) is None


def test_encoding_detects_split_key():
    p = bundled.load("split_key")
    base = relaxed_warded_chase(p)
    enc = build_sat_encoding(base.instance, p.egds)
    out = standard_chase(enc.program(), limit=10**6)
    assert next(match(enc.check_query.body, out.instance), None) is not None


def test_encoding_renames_clashing_predicates():
    p = parse_program("eq(X,Y) -> X = Y. eq(a,a).")
    enc = build_sat_encoding(relaxed_warded_chase(p).instance, p.egds)
    assert enc.eq != "eq"


def test_satisfiability_on_examples():
    assert check_satisfiability(bundled.load("parts"), method="both").satisfiable
    res = check_satisfiability(bundled.load("split_key"), method="both")
    assert not res.satisfiable and res.agree
    tgd_only = bundled.load("split_key").without_egds()
    assert check_satisfiability(tgd_only, method="both").satisfiable


def _naive_unify(inst, egds):
    """Rewrite nulls one trigger at a time until nothing changes."""
    facts = set(inst)
    h = {}
    while True:
        step = None
        for e in egds:
            for trig in match(e.body, Instance(facts)):
                x, y = apply_term(trig, e.left), apply_term(trig, e.right)
                if x != y:
                    step = (x, y)
                    break
            if step:
                break
        if step is None:
            return h, False
        x, y = step
        if x.is_constant and y.is_constant:
            return h, True
        old, new = (x, y) if x.is_null else (y, x)
        h = {k: (new if v == old else v) for k, v in h.items()}
        h[old] = new
        facts = {Atom(f.predicate, tuple(new if t == old else t for t in f.args)) for f in facts}


def _partition(nulls, h):
    groups = {}
    for n in nulls:
        groups.setdefault(h.get(n, n), set()).add(n)
    return sorted(sorted(map(str, g)) for g in groups.values())


def _chased(seed):
    p = random_program(random.Random(seed))
    out = standard_chase(p.without_egds(), limit=200)
    return p, out


@settings(max_examples=120, deadline=None)
@given(st.integers(0, 10**6))
def test_fixpoint_matches_naive_rewriting(seed):
    p, out = _chased(seed)
    if out.status is not ChaseStatus.SATURATED:
        return
    fx = egd_fixpoint(out.instance, p.egds)
    h, failed = _naive_unify(out.instance, p.egds)
    assert fx.failed == failed
    if failed:
        return
    nulls = out.instance.nulls()
    assert _partition(nulls, fx.assignment) == _partition(nulls, h)
    for n in nulls:
        assert fx.assignment.get(n, n).is_constant == h.get(n, n).is_constant
    # h is idempotent, fixes constants, and the result satisfies the EGDs
    for n, t in fx.assignment.items():
        assert fx.assignment.get(t, t) == t
    for e in p.egds:
        for trig in match(e.body, fx.instance):
            assert apply_term(trig, e.left) == apply_term(trig, e.right)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 1000), st.integers(1, 4))
def test_partition_is_order_and_batch_independent(seed, shuffle, batch):
    p, out = _chased(seed)
    if out.status is not ChaseStatus.SATURATED:
        return
    ref = egd_fixpoint(out.instance, p.egds)
    shuffled = egd_fixpoint(out.instance, p.egds, seed=shuffle)
    batched = egd_fixpoint(out.instance, p.egds, batch_threshold=batch)
    assert ref.failed == shuffled.failed == batched.failed
    if ref.failed:
        return
    nulls = out.instance.nulls()
    assert _partition(nulls, ref.assignment) == _partition(nulls, shuffled.assignment)
    assert batched.instance == ref.instance
    assert shuffled.instance == ref.instance


def test_unification_report_shape():
    p = bundled.load("split_key")
    doc = egd_fixpoint(standard_chase(p.without_egds()).instance, p.egds).to_dict()
    assert doc["failed"] and set(doc["violation"]["constants"]) == {"b", "c"}
