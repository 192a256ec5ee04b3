"""Acceptance suite: one test per exit criterion, one pass/fail line each.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion
lines. All tolerances are exact as stated; seeds are pinned fixture data.
"""

import random
import time
from contextlib import contextmanager

import pytest

from tutorkit import layout as layout_mod
from tutorkit.evalsim import (
    DEFAULT_BIAS_SEED,
    DEFAULT_EVAL_SEED,
    DEFAULT_TRAIN_SEED,
    FRACTION_ADD_SAME_DENOM,
    FRACTION_MULTIPLY,
    SQUARE_25,
    evaluate,
    fraction_layout,
    generate,
    scripted_teacher,
    train,
    train_fraction,
)
from tutorkit.htn import standard_operator_library
from tutorkit.learner import explain, lgg_conditions
from tutorkit.rete import Const, Var, compile_pattern, field_clause, match, pattern
from tutorkit.service import Store
from tutorkit.session import replay
from tutorkit.wm import Value

import test_learner
import test_planner
import test_rete
import test_service
from oracles import binding_set_view, explanation_tree, naive_match, oracle_explanations


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"[FAIL] {name}")
        raise
    print(f"[PASS] {name}")


def test_fraction_model_correctness():
    with criterion("FR model correctness: 100% on 20 seeded problems (10 multiply + 10 add), < 5 s"):
        started = time.perf_counter()
        session, _ = train_fraction(DEFAULT_TRAIN_SEED)
        problems = generate(FRACTION_MULTIPLY, 10, DEFAULT_EVAL_SEED) + generate(
            FRACTION_ADD_SAME_DENOM, 10, DEFAULT_EVAL_SEED
        )
        report = evaluate(session.kb, problems)
        elapsed = time.perf_counter() - started
        failures = [r.first_divergence for r in report.per_problem if not r.solved]
        assert report.accuracy == 1.0, failures
        assert elapsed < 5.0, f"took {elapsed:.2f} s"


def test_square25_model_correctness():
    with criterion("S25 model correctness: 100% on 10 seeded problems, < 5 s"):
        started = time.perf_counter()
        session, _ = train(
            scripted_teacher(SQUARE_25), generate(SQUARE_25, 12, DEFAULT_TRAIN_SEED)
        )
        report = evaluate(session.kb, generate(SQUARE_25, 10, DEFAULT_EVAL_SEED))
        elapsed = time.perf_counter() - started
        failures = [r.first_divergence for r in report.per_problem if not r.solved]
        assert report.accuracy == 1.0, failures
        assert elapsed < 5.0, f"took {elapsed:.2f} s"


def test_failure_mode_reproduction():
    with criterion("Failure-mode reproduction: biased model solves exactly the numerator-1 problems"):
        biased = generate(FRACTION_MULTIPLY, 12, DEFAULT_BIAS_SEED, numerator_one_bias=True)
        session, _ = train(scripted_teacher(FRACTION_MULTIPLY), biased)
        problems = generate(FRACTION_MULTIPLY, 10, DEFAULT_EVAL_SEED)
        report = evaluate(session.kb, problems)
        for problem, result in zip(problems, report.per_problem):
            has_one = (
                problem.givens["num1"] == Value.number(1)
                or problem.givens["num2"] == Value.number(1)
            )
            assert result.solved == has_one, (
                {k: v.render() for k, v in problem.givens.items()},
                result.first_divergence,
            )
        assert report.accuracy < 1.0


def test_convergence_economy():
    with criterion("Convergence economy: FR multiplication reaches a zero-demonstration problem within 4"):
        problems = generate(FRACTION_MULTIPLY, 12, DEFAULT_TRAIN_SEED)
        _, report = train(scripted_teacher(FRACTION_MULTIPLY), problems)
        first_zero = next(
            (i + 1 for i, run in enumerate(report.runs) if run.demonstrations == 0), None
        )
        assert first_zero is not None and first_zero <= 4, (
            f"first zero-demonstration problem: {first_zero}"
        )


def test_rete_oracle_equivalence():
    with criterion("Rete oracle equivalence: 1,000 randomized pattern/memory instances"):
        rng = random.Random(424242)
        checked = 0
        while checked < 1000:
            wm = test_rete.random_memory(rng)
            if len(wm.facts) > 12:
                continue
            pat = test_rete.random_pattern(rng, wm)
            if len(pat.clauses) > 4:
                continue
            net = compile_pattern(pat)
            assert binding_set_view(match(net, wm)) == naive_match(pat, wm)
            checked += 1


def test_explanation_oracle_equivalence():
    with criterion("Explanation oracle equivalence: 500 randomized memories (<= 6 fields, depth <= 2)"):
        mentals = [op for op in standard_operator_library() if op.kind == "mental"]
        rng = random.Random(171717)
        for _ in range(500):
            n = rng.randint(1, 6)
            values = {f"f{i}": rng.randint(0, 6) for i in range(n)}
            wm = test_learner.memory(values)
            target = Value.number(rng.randint(0, 30))
            mine = {explanation_tree(e) for e in explain(wm, target, mentals, 2)}
            assert mine == oracle_explanations(wm, target, mentals, 2)


def test_lgg_law_suite():
    with criterion("lgg laws: idempotence, commutativity up to renaming, subsumption, pair memoization"):
        rng = random.Random(33)
        for _ in range(300):
            p = test_learner._random_state_pattern(rng)
            assert lgg_conditions(p, p) == p
            q = test_learner._random_state_pattern(rng)
            assert test_learner._canonical(lgg_conditions(p, q)) == test_learner._canonical(
                lgg_conditions(q, p)
            )
        # subsumption: the merge matches both origin memories
        wm_a = test_learner.memory({"num1": 3, "num2": 5, "den": 4})
        wm_b = test_learner.memory({"num1": 2, "num2": 5, "den": 9})
        from tutorkit.learner import Demonstration, induce_method

        cond_a = induce_method(Demonstration(None, None, "d", wm_a), []).conditions
        cond_b = induce_method(Demonstration(None, None, "d", wm_b), []).conditions
        merged = lgg_conditions(cond_a, cond_b)
        assert naive_match(merged, wm_a) and naive_match(merged, wm_b)
        # shared-variable pair memoization
        a = pattern([field_clause(name="num1", value=Value.number(3)),
                     field_clause(name="num2", value=Value.number(3))])
        b = pattern([field_clause(name="num1", value=Value.number(5)),
                     field_clause(name="num2", value=Value.number(5))])
        out = lgg_conditions(a, b)
        attrs = {dict(c.attrs)["name"].value: dict(c.attrs)["value"] for c in out.clauses}
        assert isinstance(attrs["num1"], Var) and attrs["num1"] == attrs["num2"]


def test_replay_determinism():
    with criterion("Replay determinism: transcripts rebuild byte-identical agents"):
        # every end-to-end training run in this suite, replayed
        fr_session, _ = train_fraction(DEFAULT_TRAIN_SEED)
        s25_session, _ = train(
            scripted_teacher(SQUARE_25), generate(SQUARE_25, 12, DEFAULT_TRAIN_SEED)
        )
        biased_session, _ = train(
            scripted_teacher(FRACTION_MULTIPLY),
            generate(FRACTION_MULTIPLY, 12, DEFAULT_BIAS_SEED, numerator_one_bias=True),
        )
        for session in (fr_session, s25_session, biased_session):
            rebuilt = replay(session.transcript())
            assert rebuilt.kb.to_json() == session.kb.to_json()


def test_worked_multiplication_example():
    with criterion("Worked example: authored multiplication kb produces the three actions in order"):
        test_planner.test_worked_multiplication_example_three_actions_in_order(fraction_layout())


def test_service_crash_consistency(tmp_path):
    with criterion("Service crash consistency: kill-after-ack recovery matches the live agent"):
        data_dir = str(tmp_path / "accept-data")
        store = Store(data_dir)
        record = store.create_tutor("t", layout_mod.to_doc(fraction_layout()))
        handle = store.open_session(record.tutor_id)
        test_service.drive_training_messages(store, handle.session_id)
        live = handle.session.kb.to_doc()
        recovered = Store(data_dir).get_tutor(record.tutor_id).agent_doc
        assert recovered == live
