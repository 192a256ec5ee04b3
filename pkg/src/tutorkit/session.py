"""Training-protocol state machine.

Drives the interaction loop between a teacher (human UI or scripted policy)
and the agent: the teacher initializes a problem and starts it; the agent
attempts steps or requests demonstrations; demonstrations get task labels;
attempts get yes/no feedback; Done closes the problem and resets the
interface. Every message lands in a replayable transcript.

Step order: the next unsolved step is the first empty input field in layout
pre-order; once every input is filled the agent must click Done, which the
teacher confirms.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from typing import Callable, Optional

from . import layout as layout_mod
from .errors import ProtocolError, SetupIncompleteError, StructuralMismatchError
from .htn import CLICK_DONE, KnowledgeBase, value_from_doc, value_to_doc
from .layout import LayoutTree
from .learner import Demonstration, integrate_demonstration, integrate_feedback
from .planner import DONE_TARGET, PlanResult, attempt_step, explain_trace
from .wm import Value, close_relations, from_tutor_state

TRANSCRIPT_FORMAT_VERSION = 1

SETUP = "setup"
AWAITING_DEMO = "awaiting-demo"
AWAITING_LABEL = "awaiting-label"
AWAITING_FEEDBACK = "awaiting-feedback"
AWAITING_DONE_CONFIRM = "awaiting-done-confirm"
PROBLEM_COMPLETE = "problem-complete"

DONE_TASK_LABEL = "done"

# Message legality is a pure function of phase.
LEGAL_MESSAGES: dict[str, tuple[str, ...]] = {
    SETUP: ("set-field", "start-problem", "reset"),
    AWAITING_DEMO: ("demonstrate", "done-button", "reset"),
    AWAITING_LABEL: ("label", "reset"),
    AWAITING_FEEDBACK: ("feedback", "done-button", "reset"),
    AWAITING_DONE_CONFIRM: ("confirm-done", "reset"),
    PROBLEM_COMPLETE: ("set-field", "start-problem", "reset"),
}


@dataclass(frozen=True)
class TeacherMessage:
    kind: str
    field: Optional[str] = None
    value: Optional[Value] = None
    text: Optional[str] = None
    verdict: Optional[str] = None  # yes | no

    def to_doc(self) -> dict:
        doc: dict = {"kind": self.kind}
        if self.field is not None:
            doc["field"] = self.field
        if self.value is not None:
            doc["value"] = value_to_doc(self.value)
        if self.text is not None:
            doc["text"] = self.text
        if self.verdict is not None:
            doc["verdict"] = self.verdict
        return doc

    @staticmethod
    def from_doc(doc: dict) -> "TeacherMessage":
        return TeacherMessage(
            kind=doc["kind"],
            field=doc.get("field"),
            value=value_from_doc(doc["value"]) if "value" in doc else None,
            text=doc.get("text"),
            verdict=doc.get("verdict"),
        )


def set_field(field: str, raw_value) -> TeacherMessage:
    return TeacherMessage(kind="set-field", field=field, value=Value.parse(raw_value))


def start_problem_msg() -> TeacherMessage:
    return TeacherMessage(kind="start-problem")


def demonstrate(field: str, raw_value) -> TeacherMessage:
    return TeacherMessage(kind="demonstrate", field=field, value=Value.parse(raw_value))


def label_msg(text: str = "") -> TeacherMessage:
    return TeacherMessage(kind="label", text=text)


def feedback(verdict: str) -> TeacherMessage:
    return TeacherMessage(kind="feedback", verdict=verdict)


def confirm_done(verdict: str) -> TeacherMessage:
    return TeacherMessage(kind="confirm-done", verdict=verdict)


def done_button() -> TeacherMessage:
    return TeacherMessage(kind="done-button")


def reset_msg() -> TeacherMessage:
    return TeacherMessage(kind="reset")


@dataclass(frozen=True)
class AgentMessage:
    kind: str  # request-demonstration | request-label | attempted-action | done-query | problem-reset
    field: Optional[str] = None
    value: Optional[Value] = None
    explanation: Optional[str] = None
    highlights: tuple = ()
    default_label: Optional[str] = None

    def to_doc(self) -> dict:
        doc: dict = {"kind": self.kind}
        if self.field is not None:
            doc["field"] = self.field
        if self.value is not None:
            doc["value"] = value_to_doc(self.value)
        if self.explanation is not None:
            doc["explanation"] = self.explanation
        if self.highlights:
            doc["highlights"] = sorted(self.highlights)
        if self.default_label is not None:
            doc["default_label"] = self.default_label
        return doc

    @staticmethod
    def from_doc(doc: dict) -> "AgentMessage":
        return AgentMessage(
            kind=doc["kind"],
            field=doc.get("field"),
            value=value_from_doc(doc["value"]) if "value" in doc else None,
            explanation=doc.get("explanation"),
            highlights=tuple(doc.get("highlights", ())),
            default_label=doc.get("default_label"),
        )


@dataclass(frozen=True)
class Event:
    seq: int
    ts: float
    actor: str  # teacher | agent
    event: str
    payload: dict

    def to_doc(self) -> dict:
        return {"seq": self.seq, "timestamp": self.ts, "actor": self.actor,
                "event": self.event, "payload": self.payload}


@dataclass
class TranscriptDocument:
    header: dict
    events: list

    def to_jsonl(self) -> str:
        lines = [json.dumps(self.header, ensure_ascii=True, separators=(",", ":"))]
        for e in self.events:
            doc = e.to_doc() if isinstance(e, Event) else e
            lines.append(json.dumps(doc, ensure_ascii=True, separators=(",", ":")))
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_jsonl(text: str) -> "TranscriptDocument":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ProtocolError("empty transcript")
        header = json.loads(lines[0])
        if header.get("format") != "transcript" or header.get("version") != TRANSCRIPT_FORMAT_VERSION:
            raise ProtocolError("not a supported transcript document")
        events = [json.loads(ln) for ln in lines[1:]]
        return TranscriptDocument(header=header, events=events)


@dataclass
class _Pending:
    """Pending agent attempt (awaiting feedback / done confirmation) or
    pending demonstration (awaiting its label)."""

    result: Optional[PlanResult] = None
    wm: object = None
    target: Optional[str] = None
    demo_field: Optional[str] = None
    demo_value: Optional[Value] = None


class Session:
    """One teacher, one agent, one tutor; serialized message handling."""

    def __init__(
        self,
        layout: LayoutTree,
        kb: Optional[KnowledgeBase] = None,
        clock: Optional[Callable[[], float]] = None,
    ):
        self.layout = layout
        self.kb = kb if kb is not None else KnowledgeBase()
        self.phase = SETUP
        self.tutor_state: dict[str, Value] = {}
        self.pending: Optional[_Pending] = None
        self.excluded: frozenset = frozenset()
        self.events: list[Event] = []
        self._seq = 0
        self._clock = clock if clock is not None else time.time
        self._initial_agent_doc = self.kb.to_doc()
        self._layout_doc = layout_mod.to_doc(layout)

    # -- protocol surface ------------------------------------------------

    def legal_messages(self) -> tuple[str, ...]:
        return LEGAL_MESSAGES[self.phase]

    def start_problem(self) -> AgentMessage:
        return self.step(start_problem_msg())

    def step(self, msg: TeacherMessage) -> Optional[AgentMessage]:
        """Apply one teacher message; illegal messages raise without any
        state change."""
        if msg.kind not in self.legal_messages():
            raise ProtocolError(
                f"{msg.kind!r} is not legal in phase {self.phase!r}",
                expected=self.legal_messages(),
            )
        handler = getattr(self, "_on_" + msg.kind.replace("-", "_"))
        handler(msg, dry_run=True)  # raise before anything mutates
        self._record("teacher", msg.kind, msg.to_doc())
        reply = handler(msg, dry_run=False)
        if reply is not None:
            self._record("agent", reply.kind, reply.to_doc())
        return reply

    def transcript(self) -> TranscriptDocument:
        header = {
            "format": "transcript",
            "version": TRANSCRIPT_FORMAT_VERSION,
            "layout": self._layout_doc,
            "agent": self._initial_agent_doc,
        }
        return TranscriptDocument(header=header, events=list(self.events))

    # -- handlers ----------------------------------------------------------

    def _on_set_field(self, msg, dry_run):
        if msg.field not in self.layout.input_names():
            raise StructuralMismatchError(f"unknown field name: {msg.field!r}")
        if dry_run:
            return None
        value = msg.value if msg.value is not None else Value.empty()
        if value.is_empty:
            self.tutor_state.pop(msg.field, None)
        else:
            self.tutor_state[msg.field] = value
        self.phase = SETUP
        return None

    def _on_start_problem(self, msg, dry_run):
        if not any(not v.is_empty for v in self.tutor_state.values()):
            raise SetupIncompleteError("initialize at least one field before starting")
        if dry_run:
            return None
        self.excluded = frozenset()
        return self._agent_turn()

    def _on_demonstrate(self, msg, dry_run):
        if msg.field not in self.layout.input_names():
            raise StructuralMismatchError(f"unknown field name: {msg.field!r}")
        if self.tutor_state.get(msg.field) is not None:
            raise ProtocolError(f"field {msg.field!r} is already filled")
        if msg.value is None or msg.value.is_empty:
            raise ProtocolError("a demonstration needs a value")
        if dry_run:
            return None
        wm = self._observe()
        self.pending = _Pending(wm=wm, demo_field=msg.field, demo_value=msg.value)
        self.phase = AWAITING_LABEL
        return AgentMessage(kind="request-label", field=msg.field, default_label=msg.field)

    def _on_label(self, msg, dry_run):
        if dry_run:
            return None
        pending = self.pending
        label = (msg.text or "").strip() or pending.demo_field
        demo = Demonstration(
            field=pending.demo_field,
            value=pending.demo_value,
            task_label=label,
            wm=pending.wm,
        )
        integrate_demonstration(self.kb, demo)
        self.tutor_state[pending.demo_field] = pending.demo_value
        self.pending = None
        self.excluded = frozenset()
        return self._agent_turn()

    def _on_feedback(self, msg, dry_run):
        if msg.verdict not in ("yes", "no"):
            raise ProtocolError("feedback verdict must be yes or no")
        if dry_run:
            return None
        pending = self.pending
        directive = integrate_feedback(
            self.kb, pending.wm, pending.target, pending.result, msg.verdict, self.excluded
        )
        if directive.kind == "advance-to-next-step":
            action = pending.result.action
            self.tutor_state[action.field] = action.value
            self.pending = None
            self.excluded = frozenset()
            return self._agent_turn()
        self.excluded = directive.excluded
        if directive.kind == "retry":
            return self._present_attempt(directive.retry, pending.wm, pending.target)
        self.pending = None
        self.phase = AWAITING_DEMO
        return AgentMessage(kind="request-demonstration", field=pending.target)

    def _on_confirm_done(self, msg, dry_run):
        if msg.verdict not in ("yes", "no"):
            raise ProtocolError("confirm-done verdict must be yes or no")
        if dry_run:
            return None
        pending = self.pending
        if msg.verdict == "yes":
            return self._complete_problem()
        directive = integrate_feedback(
            self.kb, pending.wm, DONE_TARGET, pending.result, "no", self.excluded
        )
        self.excluded = directive.excluded
        if directive.kind == "retry":
            return self._present_attempt(directive.retry, pending.wm, DONE_TARGET)
        self.pending = None
        self.phase = AWAITING_DEMO
        return AgentMessage(kind="request-demonstration", field=None)

    def _on_done_button(self, msg, dry_run):
        if dry_run:
            return None
        # Clicking Done is itself a demonstration of the final step; any
        # pending attempt is discarded unapplied.
        self.pending = None
        wm = self._observe()
        demo = Demonstration(field=None, value=None, task_label=DONE_TASK_LABEL, wm=wm)
        integrate_demonstration(self.kb, demo)
        return self._complete_problem()

    def _on_reset(self, msg, dry_run):
        if dry_run:
            return None
        self.tutor_state.clear()
        self.pending = None
        self.excluded = frozenset()
        self.phase = SETUP
        return AgentMessage(kind="problem-reset")

    # -- internals ---------------------------------------------------------

    def _observe(self):
        return close_relations(from_tutor_state(self.tutor_state, self.layout))

    def _next_target(self) -> str:
        for name in self.layout.input_names():
            if self.tutor_state.get(name) is None:
                return name
        return DONE_TARGET

    def _agent_turn(self) -> AgentMessage:
        wm = self._observe()
        target = self._next_target()
        result = attempt_step(self.kb, wm, target, self.excluded)
        if result is None:
            self.pending = None
            self.phase = AWAITING_DEMO
            return AgentMessage(
                kind="request-demonstration",
                field=None if target == DONE_TARGET else target,
            )
        return self._present_attempt(result, wm, target)

    def _present_attempt(self, result: PlanResult, wm, target: str) -> AgentMessage:
        self.pending = _Pending(result=result, wm=wm, target=target)
        if result.action.kind == CLICK_DONE:
            self.phase = AWAITING_DONE_CONFIRM
            return AgentMessage(kind="done-query")
        explanation = explain_trace(result.trace)
        self.phase = AWAITING_FEEDBACK
        return AgentMessage(
            kind="attempted-action",
            field=result.action.field,
            value=result.action.value,
            explanation=explanation.text,
            highlights=tuple(sorted(explanation.highlights)),
        )

    def _complete_problem(self) -> AgentMessage:
        self.tutor_state.clear()
        self.pending = None
        self.excluded = frozenset()
        self.phase = PROBLEM_COMPLETE
        return AgentMessage(kind="problem-reset")

    def _record(self, actor: str, event: str, payload: dict) -> None:
        self.events.append(
            Event(seq=self._seq, ts=self._clock(), actor=actor, event=event, payload=payload)
        )
        self._seq += 1

    def record_layout_event(self, kind: str, payload: dict) -> None:
        """Layout edits performed while this tutor is open land in the same
        transcript so replay sees the interface history."""
        self._record("teacher", kind, payload)


def replay(doc: TranscriptDocument, verify_agent: bool = True) -> Session:
    """Rebuild a session by re-running the teacher's messages from the
    transcript header's initial layout and agent.

    Agent turns are recomputed; with verify_agent the recorded agent
    messages are checked against the recomputed ones, so a transcript
    replayed on a drifted engine fails loudly instead of silently diverging.
    """
    tree = layout_mod.from_doc(doc.header["layout"])
    kb = KnowledgeBase.from_doc(doc.header["agent"])
    session = Session(layout=tree, kb=kb)
    for raw in doc.events:
        edoc = raw.to_doc() if isinstance(raw, Event) else raw
        if edoc["actor"] == "agent":
            continue
        if edoc["event"].startswith("layout-"):
            _apply_layout_event(session, edoc)
            continue
        reply = session.step(TeacherMessage.from_doc(edoc["payload"]))
        if verify_agent and reply is not None:
            expected = _next_agent_event(doc.events, edoc["seq"])
            if expected is not None and expected != reply.to_doc():
                raise ProtocolError(
                    f"replay diverged at seq {edoc['seq']}: {expected} != {reply.to_doc()}"
                )
    return session


def _next_agent_event(events, after_seq: int) -> Optional[dict]:
    for raw in events:
        edoc = raw.to_doc() if isinstance(raw, Event) else raw
        if edoc["seq"] > after_seq and edoc["actor"] == "agent":
            return edoc["payload"]
    return None


def _apply_layout_event(session: Session, edoc: dict) -> None:
    payload = edoc["payload"]
    kind = edoc["event"]
    if kind == "layout-insert":
        layout_mod.insert(
            session.layout,
            payload["parent"],
            payload["index"],
            layout_mod.node_from_doc(payload["node"]),
        )
    elif kind == "layout-delete":
        layout_mod.delete(session.layout, payload["node"])
    elif kind == "layout-reorder":
        layout_mod.reorder(session.layout, payload["node"], payload["parent"], payload["index"])
