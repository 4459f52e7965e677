import itertools
import random

import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from harmless import HarmlessReasoner, bundled
from harmless.analysis import analyze
from harmless.corpus import CorpusConfig, certified_programs, random_program
from harmless.estimator import check_facts, check_program
from harmless.model import Atom, const
from harmless.reason import NotCertified

CLUSTERS = bundled.source("clusters_neq")


def test_fit_transform_predict():
    r = HarmlessReasoner(bundled.source("parts"))
    inst = r.fit_transform()
    assert Atom("partOf", (const("thrust"), const("camshaft"))) in inst
    assert r.predict("? partOf(thrust,camshaft), partOf(camshaft,engine).") == [True]
    assert not r.unsatisfiable_ and r.n_facts_in_ == 9


def test_fit_on_external_database():
    r = HarmlessReasoner(CLUSTERS).fit([("p", 1, 2), ("p", 2, 2)])
    (pairs,) = r.predict("?(X,Y) s(Z,X), s(Z,Y).")
    assert {(str(x), str(y)) for x, y in pairs} == {("1", "2"), ("2", "1"), ("1", "1"), ("2", "2")}
    r.fit("p(7,k). p(8,k).")
    assert r.predict("? s(Z,7), s(Z,8).") == [True]


def test_params_and_clone():
    r = HarmlessReasoner(CLUSTERS, limit=500, constants_only=True)
    assert r.get_params()["limit"] == 500
    c = clone(r)
    assert c.get_params() == r.get_params() and not hasattr(c, "outcome_")


def test_unfitted_and_invalid_inputs():
    with pytest.raises(NotFittedError):
        HarmlessReasoner(CLUSTERS).predict("? s(Z,1).")
    with pytest.raises(ValueError):
        HarmlessReasoner(CLUSTERS, on_uncertified="sometimes").fit()
    with pytest.raises(ValueError):
        HarmlessReasoner(CLUSTERS, limit=0).fit()
    with pytest.raises(ValueError):
        check_facts([("p", 1)], check_program(CLUSTERS))
    with pytest.raises(TypeError):
        check_facts([42])


def test_uncertified_policies():
    with pytest.raises(NotCertified):
        HarmlessReasoner(bundled.source("siblings")).fit()
    r = HarmlessReasoner(bundled.source("siblings"), on_uncertified="standard").fit()
    assert r.predict("? siblings(a,c).") == [True]


def test_unsatisfiable_entails_boolean_queries():
    r = HarmlessReasoner(bundled.source("split_key")).fit()
    assert r.unsatisfiable_
    assert r.predict(["? nothing(x).", "?(X) r(X,Y)."]) == [True, None]


def test_corpus_respects_configured_bounds():
    cfg = CorpusConfig()
    rng = random.Random(3)
    for _ in range(200):
        p = random_program(rng, cfg)
        schema = p.schema()
        assert len(schema) <= cfg.max_predicates
        assert max(schema.values()) <= cfg.max_arity
        assert len(p.tgds) <= cfg.max_tgds and len(p.egds) <= cfg.max_egds
        assert len(p.facts) <= cfg.max_facts
        assert len({t for a in p.facts for t in a.args}) <= cfg.max_domain


def test_certified_programs_are_accepted_and_tainted():
    for p in itertools.islice(certified_programs(5), 30):
        strict = analyze(p, strict=True)
        assert strict.accepted and strict.tainted
        assert analyze(p).accepted
