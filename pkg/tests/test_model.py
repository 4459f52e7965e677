import itertools

from hypothesis import given, settings
from hypothesis import strategies as st

from harmless.model import (
    Atom,
    Instance,
    NullFactory,
    apply,
    apply_atom,
    canonical,
    compose,
    const,
    find_homomorphism,
    holds,
    isomorphic,
    match,
    null,
    uncovered_facts,
    var,
)

X, Y, Z = var("X"), var("Y"), var("Z")
a, b, c = const("a"), const("b"), const("c")


def A(pred, *args):
    return Atom(pred, tuple(args))


def test_term_kinds_and_rendering():
    assert a.is_constant and not a.is_null
    assert null(3).is_null and str(null(3)) == "_:n3"
    assert X.is_variable and str(X) == "X"


def test_null_factory_starts_after_existing_nulls():
    f = NullFactory.after([A("p", null(4), a)])
    assert f.fresh() == null(5)


def test_instance_deduplicates_and_rewrites():
    inst = Instance([A("p", null(1), a), A("p", null(2), a)])
    assert len(inst) == 2
    inst.add(A("p", null(1), a))
    assert len(inst) == 2
    merges = inst.rewrite({null(2): null(1)})
    assert len(inst) == 1 and merges
    assert A("p", null(1), a) in inst


def test_match_respects_joins_and_neq():
    inst = Instance([A("e", a, b), A("e", b, c), A("e", c, c)])
    paths = {(s[X], s[Z]) for s in match([A("e", X, Y), A("e", Y, Z)], inst)}
    assert paths == {(a, c), (b, c), (c, c)}
    loops_excluded = list(match([A("e", X, Y)], inst, neq=[(X, Y)]))
    assert len(loops_excluded) == 2


def test_holds_with_constants():
    inst = Instance([A("p", a, null(1))])
    assert holds([A("p", a, X)], inst)
    assert not holds([A("p", b, X)], inst)


def test_compose_and_apply():
    s1 = {X: Y}
    s2 = {Y: a}
    assert compose(s1, s2) == {X: a, Y: a}
    assert apply(compose(s1, s2), [A("p", X, Z)]) == (A("p", a, Z),)


def test_isomorphism_is_null_renaming():
    assert isomorphic(A("p", null(1), null(2)), A("p", null(7), null(3)))
    assert not isomorphic(A("p", null(1), null(1)), A("p", null(7), null(3)))
    assert not isomorphic(A("p", null(1), a), A("p", null(1), b))


def _brute_homs(src, dst, onto):
    """All null maps src -> terms of dst, checked exhaustively."""
    nulls = sorted({t for f in src for t in f.args if t.is_null})
    terms = sorted({t for f in dst for t in f.args}, key=str)
    dst_set = set(dst)
    for image in itertools.product(terms, repeat=len(nulls)):
        h = dict(zip(nulls, image))
        mapped = {apply_atom(h, f) for f in src}
        if mapped <= dst_set and (not onto or mapped == dst_set):
            return True
    return False


facts_st = st.lists(
    st.builds(
        lambda p, x, y: A(p, x, y),
        st.sampled_from(["p", "q"]),
        st.sampled_from([a, b, null(1), null(2), null(3)]),
        st.sampled_from([a, b, null(1), null(2), null(3)]),
    ),
    max_size=4,
    unique=True,
)
dst_st = st.lists(
    st.builds(
        lambda p, x, y: A(p, x, y),
        st.sampled_from(["p", "q"]),
        st.sampled_from([a, b, null(8)]),
        st.sampled_from([a, b, null(8)]),
    ),
    max_size=4,
    unique=True,
)


@settings(max_examples=200, deadline=None)
@given(facts_st, dst_st, st.booleans())
def test_find_homomorphism_agrees_with_brute_force(src, dst, onto):
    h = find_homomorphism(src, dst, onto=onto)
    assert (h is not None) == _brute_homs(src, dst, onto)
    if h is not None:
        mapped = {apply_atom(h, f) for f in src}
        assert mapped <= set(dst)
        if onto:
            assert mapped == set(dst)


def test_uncovered_facts_names_missing_images():
    src = [A("p", null(1), a)]
    dst = [A("p", b, a), A("q", a, a)]
    assert A("q", a, a) in uncovered_facts(src, dst)


@given(st.lists(st.sampled_from([a, b, null(1), null(2), null(5)]), min_size=1, max_size=4))
def test_canonical_invariant_under_null_renaming(args):
    renaming = {null(1): null(11), null(2): null(12), null(5): null(15)}
    f = Atom("p", tuple(args))
    g = apply_atom(renaming, f)
    assert canonical(f) == canonical(g)
