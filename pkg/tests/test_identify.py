import random
from fractions import Fraction as F
from itertools import product

import pytest

from causalid import (IDENTIFIED, KNOWN_NON_IDENTIFIABLE,
                      NOT_WITHIN_BUDGET, CausalGraph, GraphError, Query,
                      backdoor_admissible, backdoor_formula, catalog,
                      evaluate, find_backdoor_sets, frontdoor_admissible,
                      frontdoor_formula, get_entry, identify,
                      random_model, render, rule1_applicable,
                      rule2_applicable, rule3_applicable, run_entry,
                      unavailable)
from causalid.expr import alpha_equal
from causalid.identify import _role_isomorphic, find_frontdoor_sets

from conftest import random_dag


# -- back-door criterion ------------------------------------------------------

def test_backdoor_adjustment_example():
    g = get_entry("adjustment-example").graph
    assert backdoor_admissible(g, {"X"}, {"Y"}, {"Z3", "Z4"})
    assert not backdoor_admissible(g, {"X"}, {"Y"}, {"Z4"})


def test_backdoor_loyalty(loyalty_graph):
    assert backdoor_admissible(loyalty_graph, {"X"}, {"Y"}, {"Z"})
    assert find_backdoor_sets(loyalty_graph, {"X"}, {"Y"}) == \
        [frozenset({"Z"})]


def test_backdoor_two_node_empty_set():
    g = CausalGraph(["X", "Y"], [("X", "Y")])
    assert backdoor_admissible(g, {"X"}, {"Y"}, set())
    assert find_backdoor_sets(g, {"X"}, {"Y"}) == [frozenset()]


def test_backdoor_rejects_latent_member(frontdoor_graph):
    with pytest.raises(GraphError, match="latent"):
        backdoor_admissible(frontdoor_graph, {"X"}, {"Y"}, {"U"})


def test_backdoor_descendant_fails(chain):
    # Z descends from X in the chain, so it is inadmissible
    assert not backdoor_admissible(chain, {"X"}, {"Y"}, {"Z"})


def test_no_backdoor_set_for_frontdoor_graph(frontdoor_graph):
    assert find_backdoor_sets(frontdoor_graph, {"X"}, {"Y"}) == []


def test_backdoor_formula_evaluates(confounder_model):
    e = backdoor_formula(("X",), ("Y",), ("Z",))
    assert evaluate(e, confounder_model, {"X": 1, "Y": 1}) == F(7, 10)


# -- front-door criterion ------------------------------------------------------

def test_frontdoor_cases(frontdoor_graph, chain, pricing_graph):
    assert frontdoor_admissible(frontdoor_graph, {"X"}, {"Y"}, {"Z"})
    assert frontdoor_admissible(chain, {"X"}, {"Y"}, {"Z"})
    assert not frontdoor_admissible(pricing_graph, {"X"}, {"Y"}, {"Z"})
    sales = get_entry("sales-training").graph
    assert frontdoor_admissible(sales, {"X"}, {"Y"}, {"Z"})
    with pytest.raises(GraphError, match="latent"):
        frontdoor_admissible(frontdoor_graph, {"X"}, {"Y"}, {"U"})
    assert find_frontdoor_sets(frontdoor_graph, {"X"}, {"Y"}) == \
        [frozenset({"Z"})]


def test_frontdoor_formula_oracle(frontdoor_graph):
    e = frontdoor_formula(("X",), ("Y",), ("Z",))
    m = random_model(frontdoor_graph, random.Random(3), cards=(2, 3))
    for xv in m.domains["X"]:
        oracle = m.do_marginal({"X": xv}, ("Y",))
        for yv in m.domains["Y"]:
            assert evaluate(e, m, {"X": xv, "Y": yv}) == \
                oracle.p({"Y": yv})


# -- rewrite-rule guards ----------------------------------------------------------

def test_rule2_two_node_exchange():
    g = CausalGraph(["Z", "Y"], [("Z", "Y")])
    # with nothing else in play, do(z) and z are exchangeable
    assert rule2_applicable(g, set(), {"Y"}, {"Z"}, set())
    m = random_model(g, random.Random(1))
    for zv in m.domains["Z"]:
        want = m.joint().conditional(("Y",), {"Z": zv})
        got = m.do_marginal({"Z": zv}, ("Y",))
        for yv in m.domains["Y"]:
            assert got.p({"Y": yv}) == want.p({"Y": yv})


def test_rule2_frontdoor_mediator_step(frontdoor_graph):
    # do(x) becomes a plain observation of x in p(z|do(x))
    assert rule2_applicable(frontdoor_graph, set(), {"Z"}, {"X"}, set())


def test_rule1_connected_is_false(chain):
    assert not rule1_applicable(chain, set(), {"Y"}, {"X"}, set())
    assert rule1_applicable(chain, set(), {"Y"}, {"X"}, {"Z"})


def test_rule3_removal(frontdoor_graph):
    # p(x|do(z)) = p(x): interventions on a non-ancestor drop out
    assert rule3_applicable(frontdoor_graph, set(), {"X"}, {"Z"}, set())
    assert not rule3_applicable(frontdoor_graph, set(), {"Y"}, {"X"}, set())


def test_rule_guard_validation(chain):
    with pytest.raises(GraphError, match="disjoint"):
        rule1_applicable(chain, {"X"}, {"X"}, {"Z"}, set())
    with pytest.raises(GraphError, match="nonempty"):
        rule2_applicable(chain, {"X"}, {"Y"}, set(), set())


def test_rule_guard_monotone_under_edge_addition(loyalty_graph):
    g = loyalty_graph
    names = list(g.names)
    instances = []
    for x in names:
        for y in names:
            for z in names:
                if len({x, y, z}) < 3:
                    continue
                rest = [n for n in names if n not in (x, y, z)]
                for w in [()] + [(r,) for r in rest]:
                    instances.append(({x}, {y}, {z}, set(w)))
    for tail in names:
        for head in names:
            if tail == head or g.adjacent(tail, head):
                continue
            try:
                bigger = g.with_edge(tail, head)
            except GraphError:
                continue
            for X, Y, Z, W in instances:
                for rule in (rule1_applicable, rule2_applicable,
                             rule3_applicable):
                    if rule(bigger, X, Y, Z, W):
                        assert rule(g, X, Y, Z, W)


# -- the search ---------------------------------------------------------------

def test_identify_frontdoor_full_derivation(frontdoor_graph):
    res = identify(Query(frontdoor_graph, ("X",), ("Y",)))
    assert res.status == IDENTIFIED
    assert res.budget_spent == 9
    assert alpha_equal(res.formula,
                       frontdoor_formula(("X",), ("Y",), ("Z",)))
    # every licensing fact replays true on its stated mutilated graph
    for step in res.derivation:
        if step.guard is not None:
            assert step.guard.verify(frontdoor_graph)
    guards = [s.guard for s in res.derivation if s.guard is not None]
    assert [(g_.left, g_.right, g_.given, g_.cut_incoming, g_.cut_outgoing)
            for g_ in guards] == [
        (("Z",), ("X",), (), (), ("X",)),
        (("Y",), ("Z",), ("X",), ("X",), ("Z",)),
        (("Y",), ("X",), ("Z",), ("X", "Z"), ()),
        (("X",), ("Z",), (), ("Z",), ()),
        (("Y",), ("Z",), ("X",), (), ("Z",)),
    ]


def test_identify_budget_one_fails_on_frontdoor(frontdoor_graph):
    res = identify(Query(frontdoor_graph, ("X",), ("Y",)), budget=1)
    assert res.status == NOT_WITHIN_BUDGET
    assert res.budget_spent == 1


def test_identify_loyalty_within_four(loyalty_graph):
    res = identify(Query(loyalty_graph, ("X",), ("Y",)), budget=4)
    assert res.status == IDENTIFIED
    assert res.budget_spent == 4
    assert alpha_equal(res.formula, backdoor_formula(("X",), ("Y",),
                                                     ("Z",)))


def test_backdoor_implies_search_success_within_four():
    rng = random.Random(23)
    found = 0
    for _ in range(40):
        g = random_dag(rng, n=5, p=0.45, latent=0.25)
        obs = list(g.observed_names)
        if len(obs) < 2:
            continue
        x, y = obs[0], obs[1]
        sets = find_backdoor_sets(g, {x}, {y})
        if not sets:
            continue
        found += 1
        res = identify(Query(g, (x,), (y,)), budget=4)
        assert res.status == IDENTIFIED
        m = random_model(g, random.Random(99))
        want = backdoor_formula((x,), (y,), g.ordered(sets[0]))
        for xv in m.domains[x]:
            for yv in m.domains[y]:
                b = {x: xv, y: yv}
                assert evaluate(res.formula, m, b) == evaluate(want, m, b)
    assert found >= 10


def test_identify_pricing_known_non_identifiable(pricing_graph):
    res = identify(Query(pricing_graph, ("X",), ("Y",)))
    assert res.status == KNOWN_NON_IDENTIFIABLE


def test_non_identifiable_match_is_name_independent():
    g = CausalGraph([("H", True), "price", "volume", "turnover"],
                    [("H", "price"), ("H", "volume"),
                     ("price", "volume"), ("price", "turnover"),
                     ("volume", "turnover")])
    res = identify(Query(g, ("price",), ("turnover",)))
    assert res.status == KNOWN_NON_IDENTIFIABLE


def test_non_identifiable_requires_role_match(pricing_graph):
    # same shape but asking about a different effect: not in the catalog
    res = identify(Query(pricing_graph, ("Z",), ("Y",)))
    assert res.status != KNOWN_NON_IDENTIFIABLE


def test_role_isomorphism():
    a = CausalGraph([("U", True), "X", "Y"],
                    [("U", "X"), ("U", "Y"), ("X", "Y")])
    b = CausalGraph(["T", "O", ("H", True)],
                    [("H", "T"), ("H", "O"), ("T", "O")])
    assert _role_isomorphic(a, ("X",), ("Y",), b, ("T",), ("O",))
    assert not _role_isomorphic(a, ("Y",), ("X",), b, ("T",), ("O",))


def test_identify_rejects_latent_roles(frontdoor_graph):
    with pytest.raises(GraphError, match="observed"):
        Query(frontdoor_graph, ("U",), ("Y",))
    with pytest.raises(ValueError):
        identify(Query(frontdoor_graph, ("X",), ("Y",)), budget=0)


def test_identified_formulas_sound_on_many_models():
    rng_seed = 1000
    for entry in catalog():
        if entry.expectation.kind not in ("backdoor", "frontdoor",
                                          "do-equals-see"):
            continue
        res = identify(Query(entry.graph, entry.treatment, entry.outcome))
        assert res.status == IDENTIFIED, entry.name
        for k in range(50):
            m = random_model(entry.graph, random.Random(rng_seed + k))
            for xv in product(*[m.domains[x] for x in entry.treatment]):
                do = dict(zip(entry.treatment, xv))
                oracle = m.do_marginal(do, entry.outcome)
                for yv in product(*[m.domains[y] for y in entry.outcome]):
                    b = {**do, **dict(zip(entry.outcome, yv))}
                    assert evaluate(res.formula, m, b) == \
                        oracle.p(dict(zip(entry.outcome, yv))), entry.name


def test_derivation_steps_replay(loyalty_graph):
    res = identify(Query(loyalty_graph, ("X",), ("Y",)))
    assert [s.rule for s in res.derivation] == \
        ["marginalize", "chain", "rule3", "rule2"]
    for s in res.derivation:
        if s.guard is not None:
            assert s.guard.verify(loyalty_graph)
    assert render(res.derivation[-1].after) == render(res.formula)


# -- corpus ---------------------------------------------------------------------

def test_corpus_membership():
    names = [e.name for e in catalog()]
    for required in ("loyalty", "insurance", "sales-training", "pricing",
                     "rct-coin", "front-door"):
        assert required in names
    assert len(names) == len(set(names))
    assert any(e.reconstructed for e in catalog())
    assert {n for n, _ in unavailable()} & {"identifiable-catalog-a"}


def test_corpus_entries_all_pass():
    for entry in catalog():
        ok, detail = run_entry(entry)
        assert ok, f"{entry.name}: {detail}"


def test_loyalty_and_insurance_share_shape():
    a, b = get_entry("loyalty"), get_entry("insurance")
    assert a.graph == b.graph


def test_rct_coin_expectation():
    e = get_entry("rct-coin")
    res = identify(Query(e.graph, e.treatment, e.outcome))
    assert res.status == IDENTIFIED
    assert render(res.formula) == "p(Y|X)"


def test_pricing_marked_non_identifiable():
    assert get_entry("pricing").expectation.kind == "non-identifiable"
