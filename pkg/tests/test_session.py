"""Training protocol: phase transitions, legality, transcripts, replay."""

import itertools

import pytest

from tutorkit.errors import ProtocolError, SetupIncompleteError
from tutorkit.evalsim import (
    FRACTION_MULTIPLY,
    fraction_layout,
    generate,
    run_problem,
    scripted_teacher,
    train,
)
from tutorkit.session import (
    AWAITING_DEMO,
    AWAITING_DONE_CONFIRM,
    AWAITING_FEEDBACK,
    AWAITING_LABEL,
    LEGAL_MESSAGES,
    PROBLEM_COMPLETE,
    SETUP,
    Session,
    TranscriptDocument,
    confirm_done,
    demonstrate,
    done_button,
    feedback,
    label_msg,
    replay,
    reset_msg,
    set_field,
    start_problem_msg,
)
from tutorkit.wm import Value


def fresh_session(**givens):
    session = Session(layout=fraction_layout(), clock=itertools.count(1).__next__)
    for field, value in givens.items():
        session.step(set_field(field.replace("_", "-"), value))
    return session


MULT_GIVENS = dict(num1=3, den1=2, op="x", num2=4, den2=7)


def test_fresh_agent_asks_for_a_demonstration():
    session = fresh_session(**MULT_GIVENS)
    msg = session.start_problem()
    assert msg.kind == "request-demonstration"
    assert msg.field == "ans-num"
    assert session.phase == AWAITING_DEMO


def test_start_requires_an_initialized_problem():
    session = fresh_session()
    with pytest.raises(SetupIncompleteError):
        session.start_problem()
    assert session.phase == SETUP


def test_demonstration_requests_a_label_with_field_default():
    session = fresh_session(**MULT_GIVENS)
    session.start_problem()
    msg = session.step(demonstrate("ans-num", 12))
    assert msg.kind == "request-label"
    assert msg.default_label == "ans-num"
    assert session.phase == AWAITING_LABEL


def test_full_first_problem_walkthrough():
    session = fresh_session(**MULT_GIVENS)
    session.start_problem()
    session.step(demonstrate("ans-num", 12))
    msg = session.step(label_msg(""))
    # den step: no method yet, so another demonstration request
    assert msg.kind == "request-demonstration"
    assert msg.field == "ans-den"
    session.step(demonstrate("ans-den", 14))
    msg = session.step(label_msg(""))
    assert msg.kind == "request-demonstration"
    assert msg.field is None  # every input is filled: the Done step remains
    msg = session.step(done_button())
    assert msg.kind == "problem-reset"
    assert session.phase == PROBLEM_COMPLETE
    assert session.tutor_state == {}


def second_problem_session():
    """Train one full problem, then pose it again.

    A single demonstration keeps non-source fields as constants, so the
    re-posed problem is the one state the one-problem agent is sure to act
    on; generalization across problems is exercised in the harness tests."""
    session = fresh_session(**MULT_GIVENS)
    session.start_problem()
    session.step(demonstrate("ans-num", 12))
    session.step(label_msg(""))
    session.step(demonstrate("ans-den", 14))
    session.step(label_msg(""))
    session.step(done_button())
    for field, value in MULT_GIVENS.items():
        session.step(set_field(field.replace("_", "-"), value))
    return session


def test_trained_agent_attempts_with_explanation_and_highlights():
    session = second_problem_session()
    msg = session.start_problem()
    assert msg.kind == "attempted-action"
    assert msg.field == "ans-num"
    assert msg.value == Value.number(12)
    assert "num1" in msg.explanation and "num2" in msg.explanation
    assert set(msg.highlights) == {"num1", "num2"}
    assert session.phase == AWAITING_FEEDBACK


def test_positive_feedback_fills_the_field_and_advances():
    session = second_problem_session()
    session.start_problem()
    msg = session.step(feedback("yes"))
    assert session.tutor_state["ans-num"] == Value.number(12)
    assert msg.kind in ("attempted-action", "request-demonstration")


def test_negative_feedback_on_sole_method_requests_demonstration():
    session = second_problem_session()
    session.start_problem()
    msg = session.step(feedback("no"))
    assert msg.kind == "request-demonstration"
    assert "ans-num" not in session.tutor_state  # response was removed
    assert session.phase == AWAITING_DEMO


def test_done_query_and_confirmation():
    session = second_problem_session()
    session.start_problem()
    session.step(feedback("yes"))   # ans-num
    msg = session.step(feedback("yes"))  # ans-den
    assert msg.kind == "done-query"
    assert session.phase == AWAITING_DONE_CONFIRM
    msg = session.step(confirm_done("yes"))
    assert msg.kind == "problem-reset"
    assert session.phase == PROBLEM_COMPLETE


def test_confirm_done_no_behaves_like_negative_feedback():
    session = second_problem_session()
    session.start_problem()
    session.step(feedback("yes"))
    session.step(feedback("yes"))
    msg = session.step(confirm_done("no"))
    # the single done method is excluded; nothing else can click Done
    assert msg.kind == "request-demonstration"
    assert session.phase == AWAITING_DEMO


def test_illegal_messages_raise_and_do_not_mutate():
    session = fresh_session(**MULT_GIVENS)
    events_before = len(session.events)
    phase = session.phase
    with pytest.raises(ProtocolError) as exc:
        session.step(feedback("yes"))
    assert exc.value.expected == LEGAL_MESSAGES[SETUP]
    assert session.phase == phase
    assert len(session.events) == events_before


def test_message_legality_table_is_phase_pure():
    assert set(LEGAL_MESSAGES) == {
        SETUP, AWAITING_DEMO, AWAITING_LABEL, AWAITING_FEEDBACK,
        AWAITING_DONE_CONFIRM, PROBLEM_COMPLETE,
    }
    assert "demonstrate" in LEGAL_MESSAGES[AWAITING_DEMO]
    assert "label" in LEGAL_MESSAGES[AWAITING_LABEL]
    assert "feedback" in LEGAL_MESSAGES[AWAITING_FEEDBACK]
    assert "confirm-done" in LEGAL_MESSAGES[AWAITING_DONE_CONFIRM]


def test_reset_clears_everything():
    session = second_problem_session()
    session.start_problem()
    msg = session.step(reset_msg())
    assert msg.kind == "problem-reset"
    assert session.phase == SETUP
    assert session.tutor_state == {}


def test_done_button_from_feedback_phase_completes_the_problem():
    session = second_problem_session()
    session.start_problem()
    msg = session.step(done_button())
    assert msg.kind == "problem-reset"
    assert session.phase == PROBLEM_COMPLETE


def test_liveness_every_training_phase_reaches_complete_within_three():
    # From each resting training phase there is a legal message sequence of
    # length <= 3 ending in problem-complete.
    def reach(phase_builder, messages):
        session = phase_builder()
        for msg in messages:
            session.step(msg)
        return session.phase == PROBLEM_COMPLETE

    def at_demo():
        s = fresh_session(**MULT_GIVENS)
        s.start_problem()
        return s

    def at_label():
        s = at_demo()
        s.step(demonstrate("ans-num", 12))
        return s

    def at_feedback():
        s = second_problem_session()
        s.start_problem()
        return s

    def at_done_confirm():
        s = second_problem_session()
        s.start_problem()
        s.step(feedback("yes"))
        s.step(feedback("yes"))
        return s

    assert reach(at_demo, [done_button()])
    assert reach(at_label, [label_msg(""), done_button()])
    assert reach(at_feedback, [done_button()])
    assert reach(at_done_confirm, [confirm_done("yes")])


def test_untouched_session_has_a_header_only_transcript():
    session = fresh_session()
    doc = session.transcript()
    assert doc.header["format"] == "transcript"
    assert doc.header["layout"]["format"] == "layout"
    assert doc.header["agent"]["format"] == "agent"
    assert doc.events == []
    assert doc.to_jsonl().count("\n") == 1  # just the header line


def test_transcript_contains_ordered_events_with_timestamps():
    session = fresh_session(**MULT_GIVENS)
    session.start_problem()
    doc = session.transcript()
    assert doc.header["format"] == "transcript"
    seqs = [e.seq for e in doc.events]
    assert seqs == list(range(len(seqs)))
    actors = {e.actor for e in doc.events}
    assert actors == {"teacher", "agent"}


def test_transcript_round_trips_through_jsonl():
    session = fresh_session(**MULT_GIVENS)
    session.start_problem()
    session.step(demonstrate("ans-num", 12))
    text = session.transcript().to_jsonl()
    doc = TranscriptDocument.from_jsonl(text)
    assert len(doc.events) == len(session.events)


def test_replay_rebuilds_an_identical_agent():
    problems = generate(FRACTION_MULTIPLY, 6, 50)
    policy = scripted_teacher(FRACTION_MULTIPLY)
    session, _ = train(policy, problems)
    live = session.kb.to_json()
    rebuilt = replay(session.transcript())
    assert rebuilt.kb.to_json() == live


def test_replay_flags_divergence():
    session = fresh_session(**MULT_GIVENS)
    session.start_problem()
    doc = session.transcript()
    tampered = []
    for event in doc.events:
        edoc = event.to_doc()
        if edoc["actor"] == "agent" and edoc["event"] == "request-demonstration":
            edoc["payload"] = {"kind": "request-demonstration", "field": "ans-den"}
        tampered.append(edoc)
    with pytest.raises(ProtocolError):
        replay(TranscriptDocument(header=doc.header, events=tampered))


def test_layout_events_recorded_and_replayed():
    session = fresh_session()
    session.record_layout_event(
        "layout-insert",
        {"parent": "answer", "index": 2,
         "node": {"id": "scratch", "kind": "input", "name": "scratch"}},
    )
    for field, value in MULT_GIVENS.items():
        session.step(set_field(field.replace("_", "-"), value))
    # replay applies the edit to the header layout before the messages
    import tutorkit.layout as layout_mod
    doc = session.transcript()
    rebuilt = replay(doc)
    assert "scratch" in rebuilt.layout.input_names()
