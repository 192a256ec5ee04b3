"""Planner: decomposition, one-action-per-attempt, worked multiplication
example, trace soundness, and completeness against an exhaustive oracle."""

import random

import pytest

from tutorkit.errors import StructuralError
from tutorkit.htn import (
    CLICK_DONE,
    INPUT_VALUE,
    KnowledgeBase,
    Method,
    OperatorCall,
    StepRef,
    TaskCall,
)
from tutorkit.planner import (
    DONE_TARGET,
    attempt,
    attempt_step,
    explain_trace,
    replay_trace,
)
from tutorkit.rete import Const, Var, field_clause, pattern
from tutorkit.wm import Value

from conftest import make_wm
from oracles import exhaustive_actions


def step_method(task, cond_clauses, ops):
    return Method(task=task, conditions=pattern(cond_clauses), subtasks=tuple(ops),
                  provenance="authored")


def multiplication_kb() -> KnowledgeBase:
    """Hand-built fraction-multiplication knowledge: Solve Problem branches
    on the operator sign and decomposes into the two multiply steps plus the
    final Done click."""
    kb = KnowledgeBase()
    kb.add_method(step_method(
        "Solve Problem",
        [field_clause(name="op", value=Value.symbol("x"))],
        [TaskCall("MultiplyNumerators"), TaskCall("MultiplyDenominators"), TaskCall("ClickDone")],
    ))
    kb.add_method(step_method(
        "MultiplyNumerators",
        [field_clause(name="num1", value="?a"), field_clause(name="num2", value="?b")],
        [OperatorCall(op="multiply", args=(Var("a"), Var("b"))),
         OperatorCall(op=INPUT_VALUE, args=(StepRef(0),), out_field="ans-num")],
    ))
    kb.add_method(step_method(
        "MultiplyDenominators",
        [field_clause(name="den1", value="?a"), field_clause(name="den2", value="?b")],
        [OperatorCall(op="multiply", args=(Var("a"), Var("b"))),
         OperatorCall(op=INPUT_VALUE, args=(StepRef(0),), out_field="ans-den")],
    ))
    kb.add_method(step_method("ClickDone", [], [OperatorCall(op=CLICK_DONE)]))
    return kb


def test_worked_multiplication_example_three_actions_in_order(fraction_tree):
    kb = multiplication_kb()
    state = {"num1": 3, "den1": 4, "op": "x", "num2": 5, "den2": 6}

    wm = make_wm(fraction_tree, **{k.replace("-", "_"): v for k, v in state.items()})
    first = attempt(kb, wm, "Solve Problem")
    assert first is not None
    assert (first.action.kind, first.action.field, first.action.value) == (
        INPUT_VALUE, "ans-num", Value.number(15))
    chain_tasks = [entry[0] for entry in first.trace.method_chain]
    assert chain_tasks == ["Solve Problem", "MultiplyNumerators"]
    assert [s.op for s in first.trace.executed] == ["multiply", INPUT_VALUE]

    state["ans-num"] = 15
    wm = make_wm(fraction_tree, **{k.replace("-", "_"): v for k, v in state.items()})
    second = attempt(kb, wm, "Solve Problem")
    assert (second.action.kind, second.action.field, second.action.value) == (
        INPUT_VALUE, "ans-den", Value.number(24))

    state["ans-den"] = 24
    wm = make_wm(fraction_tree, **{k.replace("-", "_"): v for k, v in state.items()})
    third = attempt(kb, wm, "Solve Problem")
    assert third.action.kind == CLICK_DONE


def test_empty_kb_cannot_solve(multiplication_wm):
    assert attempt(KnowledgeBase(), multiplication_wm, "Solve Problem") is None


def test_unsatisfied_condition_cannot_solve(fraction_tree):
    kb = KnowledgeBase()
    kb.add_method(step_method(
        "Solve Problem",
        [field_clause(name="op", value=Value.symbol("+"))],
        [TaskCall("ClickDone")],
    ))
    kb.add_method(step_method("ClickDone", [], [OperatorCall(op=CLICK_DONE)]))
    wm = make_wm(fraction_tree, num1=3, den1=4, op="x", num2=5, den2=6)
    assert attempt(kb, wm, "Solve Problem") is None


def test_never_targets_a_filled_field(fraction_tree):
    kb = multiplication_kb()
    wm = make_wm(fraction_tree, num1=3, den1=4, op="x", num2=5, den2=6, ans_num=15)
    result = attempt(kb, wm, "Solve Problem")
    assert result.action.field == "ans-den"


def test_trace_replay_reproduces_the_action(fraction_tree):
    kb = multiplication_kb()
    wm = make_wm(fraction_tree, num1=3, den1=4, op="x", num2=5, den2=6)
    result = attempt(kb, wm, "Solve Problem")
    assert replay_trace(result.trace, wm) == result.action


def test_determinism(fraction_tree):
    kb = multiplication_kb()
    wm = make_wm(fraction_tree, num1=2, den1=9, op="x", num2=7, den2=3)
    a = attempt(kb, wm, "Solve Problem")
    b = attempt(kb, wm, "Solve Problem")
    assert a.action == b.action
    assert [s.op for s in a.trace.executed] == [s.op for s in b.trace.executed]


def test_depth_limit_is_a_structural_error(multiplication_wm):
    kb = KnowledgeBase()
    kb.add_method(step_method("loop", [], [TaskCall("loop")]))
    with pytest.raises(StructuralError):
        attempt(kb, multiplication_wm, "loop")


def test_attempt_step_targets_one_field(fraction_tree):
    kb = multiplication_kb()
    wm = make_wm(fraction_tree, num1=3, den1=4, op="x", num2=5, den2=6)
    result = attempt_step(kb, wm, "ans-den")
    assert result.action.field == "ans-den"
    assert attempt_step(kb, wm, DONE_TARGET).action.kind == CLICK_DONE
    assert attempt_step(kb, wm, "num1") is None  # already filled, no method targets it


def test_attempt_step_respects_exclusions(fraction_tree):
    kb = multiplication_kb()
    wm = make_wm(fraction_tree, num1=3, den1=4, op="x", num2=5, den2=6)
    first = attempt_step(kb, wm, "ans-num")
    excluded = frozenset({first.method_id})
    assert attempt_step(kb, wm, "ans-num", excluded) is None


# -- explanation text ---------------------------------------------------------


def test_explain_trace_mentions_sources_and_target(fraction_tree):
    kb = multiplication_kb()
    wm = make_wm(fraction_tree, num1=3, den1=4, op="x", num2=5, den2=6)
    result = attempt(kb, wm, "Solve Problem")
    explanation = explain_trace(result.trace)
    assert "multiplied num1 by num2" in explanation.text
    assert "put the result in ans-num" in explanation.text
    assert explanation.highlights == frozenset({"num1", "num2"})


def test_explain_trace_for_copy():
    trace_kb = KnowledgeBase()
    trace_kb.add_method(step_method(
        "t",
        [field_clause(name="den1", value="?v")],
        [OperatorCall(op="copy", args=(Var("v"),)),
         OperatorCall(op=INPUT_VALUE, args=(StepRef(0),), out_field="ans-den")],
    ))
    from tutorkit.evalsim import fraction_layout
    wm = make_wm(fraction_layout(), num1=1, den1=4, op="+", num2=2, den2=4)
    result = attempt(trace_kb, wm, "t")
    explanation = explain_trace(result.trace)
    assert "copied den1" in explanation.text
    assert explanation.highlights == frozenset({"den1"})


def test_explain_trace_for_done(multiplication_wm):
    kb = KnowledgeBase()
    kb.add_method(step_method("done", [], [OperatorCall(op=CLICK_DONE)]))
    result = attempt(kb, multiplication_wm, "done")
    explanation = explain_trace(result.trace)
    assert explanation.text == "I think the problem is complete."
    assert explanation.highlights == frozenset()


# -- completeness against the exhaustive oracle -------------------------------


def varied_kb(rng: random.Random) -> KnowledgeBase:
    kb = KnowledgeBase()
    symbols = ["x", "+"]
    kb.add_method(step_method(
        "Solve Problem",
        [field_clause(name="op", value=Value.symbol(rng.choice(symbols)))],
        [TaskCall("StepA"), TaskCall("StepB")],
    ))
    if rng.random() < 0.5:
        kb.add_method(step_method(
            "Solve Problem",
            [field_clause(name="op", value=Value.symbol(rng.choice(symbols)))],
            [TaskCall("StepB")],
        ))
    kb.add_method(step_method(
        "StepA",
        [field_clause(name="num1", value="?a"), field_clause(name="num2", value="?b")],
        [OperatorCall(op=rng.choice(["multiply", "add", "divide"]), args=(Var("a"), Var("b"))),
         OperatorCall(op=INPUT_VALUE, args=(StepRef(0),), out_field="ans-num")],
    ))
    kb.add_method(step_method(
        "StepB",
        [field_clause(name="den1", value="?a")],
        [OperatorCall(op="copy", args=(Var("a"),)),
         OperatorCall(op=INPUT_VALUE, args=(StepRef(0),), out_field="ans-den")],
    ))
    if rng.random() < 0.5:
        kb.add_method(step_method("Solve Problem", [], [TaskCall("Finish")]))
        kb.add_method(step_method("Finish", [], [OperatorCall(op=CLICK_DONE)]))
    return kb


@pytest.mark.parametrize("seed", range(3))
def test_attempt_matches_exhaustive_oracle(seed, fraction_tree):
    rng = random.Random(seed)
    for _ in range(40):
        kb = varied_kb(rng)
        fields = {}
        for name in ("num1", "den1", "num2", "den2", "ans_num", "ans_den"):
            roll = rng.random()
            if roll < 0.4:
                continue
            fields[name] = rng.randint(0, 4)
        fields["op"] = rng.choice(["x", "+"])
        wm = make_wm(fraction_tree, **fields)
        oracle = exhaustive_actions(kb, wm, "Solve Problem")
        result = attempt(kb, wm, "Solve Problem")
        if oracle:
            assert result is not None, f"planner missed {oracle}"
            key = (result.action.kind, result.action.field, result.action.value)
            assert key in oracle
        else:
            assert result is None
