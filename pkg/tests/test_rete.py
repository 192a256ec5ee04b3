"""Pattern matcher: compilation, matching semantics, and oracle equivalence."""

import random

import pytest

from tutorkit.errors import PatternCompileError, StateError
from tutorkit.layout import LayoutTree, column, input_field
from tutorkit.rete import (
    Pattern,
    compile_pattern,
    field_clause,
    match,
    pattern,
    relation_clause,
)
from tutorkit.wm import Value, close_relations, from_tutor_state

from conftest import make_wm
from oracles import binding_set_view, naive_match


def small_memory(values: dict):
    tree = LayoutTree(column("root", *[input_field(name) for name in values]))
    state = {k: Value.parse(v) for k, v in values.items() if v is not None}
    return close_relations(from_tutor_state(state, tree))


def test_constant_clause_matches_once(multiplication_wm):
    net = compile_pattern(pattern([field_clause(name="op", value=Value.symbol("x"))]))
    results = match(net, multiplication_wm)
    assert len(results) == 1
    assert results[0].as_dict() == {}


def test_empty_pattern_matches_any_memory_once(multiplication_wm):
    net = compile_pattern(pattern())
    assert len(match(net, multiplication_wm)) == 1


def test_shared_variable_unifies_across_clauses():
    wm = small_memory({"d1": 4, "d2": 4})
    net = compile_pattern(
        pattern([field_clause(name="d1", value="?v"), field_clause(name="d2", value="?v")])
    )
    results = match(net, wm)
    assert len(results) == 1
    assert results[0].get("v") == Value.number(4)


def test_unconstrained_clause_pair_binds_distinct_facts():
    # 3 facts, two unconstrained field clauses: 9 ordered pairs minus the 3
    # aliased ones = 6 bindings (frozen from hand enumeration under the
    # distinctness rule).
    wm = small_memory({"a": 1, "b": 2, "c": 3})
    net = compile_pattern(pattern([field_clause(name="?x"), field_clause(name="?y")]))
    results = match(net, wm)
    assert len(results) == 6
    assert all(r.fact_ids[0] != r.fact_ids[1] for r in results)


def test_no_match_on_wrong_symbol(multiplication_wm):
    net = compile_pattern(pattern([field_clause(name="op", value=Value.symbol("+"))]))
    assert match(net, multiplication_wm) == []


def test_negated_clause_filters_matches():
    wm_eq = small_memory({"d1": 4, "d2": 4})
    wm_ne = small_memory({"d1": 4, "d2": 5})
    net = compile_pattern(
        pattern(
            [field_clause(name="d1", value="?v")],
            negated=[relation_clause("equals", "d1", "d2")],
        )
    )
    assert match(net, wm_eq) == []
    assert len(match(net, wm_ne)) == 1


def test_unsafe_negated_variable_is_a_compile_error():
    with pytest.raises(PatternCompileError):
        compile_pattern(pattern([field_clause(name="a")], negated=[field_clause(value="?loose")]))


def test_matching_requires_a_closed_memory(fraction_tree):
    wm = from_tutor_state({"num1": Value.parse(3)}, fraction_tree)
    net = compile_pattern(pattern([field_clause(name="num1")]))
    with pytest.raises(StateError):
        match(net, wm)


def test_deterministic_ordering(multiplication_wm):
    net = compile_pattern(pattern([field_clause(name="?x"), field_clause(name="?y")]))
    first = [r.fact_ids for r in match(net, multiplication_wm)]
    second = [r.fact_ids for r in match(net, multiplication_wm)]
    assert first == second


def test_monotonicity_adding_facts_never_removes_bindings():
    smaller = small_memory({"a": 2, "b": 7})
    larger_tree = LayoutTree(
        column("root", input_field("a"), input_field("b"), input_field("c"), input_field("d"))
    )
    larger = close_relations(
        from_tutor_state(
            {"a": Value.parse(2), "b": Value.parse(7), "c": Value.parse(5)}, larger_tree
        )
    )
    assert set(smaller.facts) <= set(larger.facts)
    net = compile_pattern(
        pattern([field_clause(name="?f", value="?v"), relation_clause("less-than", "?x", "?y")])
    )
    small_results = binding_set_view(match(net, smaller))
    large_results = binding_set_view(match(net, larger))
    assert small_results <= large_results


# -- randomized oracle equivalence -------------------------------------------


FIELD_NAMES = ["fa", "fb", "fc", "fd", "fe", "ff"]


def random_memory(rng: random.Random):
    n = rng.randint(1, 6)
    names = FIELD_NAMES[:n]
    values = {}
    for name in names:
        kind = rng.random()
        if kind < 0.2:
            values[name] = None
        elif kind < 0.35:
            values[name] = rng.choice(["x", "+"])
        else:
            values[name] = rng.randint(0, 5)
    return small_memory(values)


def random_pattern(rng: random.Random, wm):
    facts = list(wm.facts)
    n_clauses = rng.randint(1, 4)
    var_names = ["p", "q", "r", "s"]
    clauses = []
    for _ in range(n_clauses):
        fact = rng.choice(facts)
        attrs = {}
        for attr, actual in fact.attributes:
            roll = rng.random()
            if roll < 0.35:
                continue  # leave the attribute unconstrained
            if roll < 0.6:
                attrs[attr.replace("-", "_")] = "?" + rng.choice(var_names)
            else:
                attrs[attr.replace("-", "_")] = actual
        clauses.append(
            field_clause(**attrs) if fact.kind == "field"
            else relation_clause(
                attrs.get("relation", fact.attr("relation")),
                attrs.get("a", fact.attr("a")),
                attrs.get("b", fact.attr("b")),
            )
        )
    negated = []
    if rng.random() < 0.25:
        bound = {v for c in clauses for v in c.variables()}
        fact = rng.choice(facts)
        neg_attrs = {}
        for attr, actual in fact.attributes:
            if rng.random() < 0.5:
                continue
            if bound and rng.random() < 0.3:
                neg_attrs[attr.replace("-", "_")] = "?" + rng.choice(sorted(bound))
            else:
                neg_attrs[attr.replace("-", "_")] = actual
        negated.append(
            field_clause(**neg_attrs) if fact.kind == "field"
            else relation_clause(
                neg_attrs.get("relation", fact.attr("relation")),
                neg_attrs.get("a", fact.attr("a")),
                neg_attrs.get("b", fact.attr("b")),
            )
        )
    return pattern(clauses, negated=negated)


@pytest.mark.parametrize("batch", range(4))
def test_oracle_equivalence_randomized(batch):
    rng = random.Random(1000 + batch)
    for _ in range(250):
        wm = random_memory(rng)
        pat = random_pattern(rng, wm)
        net = compile_pattern(pat)
        assert binding_set_view(match(net, wm)) == naive_match(pat, wm)
