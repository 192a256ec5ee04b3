"""Performance component: decompose a task over a working memory and produce
the next interface action.

Planning is one action per attempt: the training protocol requests feedback
after every step, so decomposition pauses at the first interface operator
and the remaining state is re-derived from the updated tutor on the next
attempt. Backtracking is exhaustive over method alternatives and bindings,
bounded by a fixed decomposition depth.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .errors import OperatorFailure, StructuralError
from .htn import (
    CLICK_DONE,
    INPUT_VALUE,
    KnowledgeBase,
    Method,
    OperatorCall,
    StepRef,
    TaskCall,
    _var_field_map,
)
from .rete import BindingSet, Const, Var, match
from .wm import Value, WorkingMemory, lookup, require_closed

MAX_DECOMPOSITION_DEPTH = 32

DONE_TARGET = "__done__"  # pseudo-target once every input is filled


@dataclass(frozen=True)
class FieldAction:
    """The agent's move: fill one empty field, or click Done."""

    kind: str  # input-value | click-done
    field: Optional[str] = None
    value: Optional[Value] = None


@dataclass(frozen=True)
class OpStep:
    """One executed operator: argument provenance plus the produced value.

    arg sources are ("field", name) | ("step", subtask-index) | ("const",)
    so a trace can be replayed against the same working memory. Step
    references are local to the method instance identified by `frame`.
    """

    op: str
    sources: tuple
    inputs: tuple
    result: Optional[Value]
    out_field: Optional[str] = None
    frame: int = 0
    subtask_index: int = 0


@dataclass
class PlanTrace:
    method_chain: list = field(default_factory=list)  # (task, method-id, BindingSet)
    executed: list = field(default_factory=list)  # OpStep


@dataclass
class PlanResult:
    action: FieldAction
    trace: PlanTrace

    @property
    def method_id(self) -> str:
        """The root method of this attempt — the one a "no" excludes so the
        retry takes a genuinely different route."""
        return self.trace.method_chain[0][1]


_DONE = "done"
_ACTION = "action"


def attempt(
    kb: KnowledgeBase,
    wm: WorkingMemory,
    task: str,
    excluded: frozenset = frozenset(),
) -> Optional[PlanResult]:
    """Depth-first AND-OR search from `task`; returns the first interface
    action and its trace, or None when no decomposition applies.

    Backtracking is exhaustive: a branch that completes without producing an
    action (every target already filled) is a choice point like any other,
    so an action reachable through a later method is still found."""
    require_closed(wm)
    for status, action, chain, ops in _solve_task(kb, wm, task, excluded, 0, _Counter()):
        if status == _ACTION:
            return PlanResult(action=action, trace=PlanTrace(method_chain=list(chain), executed=list(ops)))
    return None


def attempt_step(
    kb: KnowledgeBase,
    wm: WorkingMemory,
    target: str,
    excluded: frozenset = frozenset(),
) -> Optional[PlanResult]:
    """Attempt the next problem step directly: try every method, across all
    task labels, whose terminal interface action addresses `target` (a field
    name, or DONE_TARGET for clicking Done)."""
    require_closed(wm)
    candidates = [m for m in kb.all_methods() if target in _method_targets(m)]
    candidates.sort(key=lambda m: (-m.conditions.clause_count(), kb.insertion_rank(m)))
    counter = _Counter()
    for method in candidates:
        if method.id in excluded:
            continue
        for status, action, chain, ops in _try_method(kb, wm, method, excluded, 0, counter):
            if status == _ACTION:
                return PlanResult(action=action, trace=PlanTrace(method_chain=list(chain), executed=list(ops)))
    return None


class _Counter:
    """Frame ids for method instances within one attempt."""

    def __init__(self):
        self.n = 0

    def next(self) -> int:
        self.n += 1
        return self.n


def _method_targets(m: Method) -> set[str]:
    targets: set[str] = set()
    for st in m.subtasks:
        if isinstance(st, OperatorCall):
            if st.op == INPUT_VALUE and st.out_field:
                targets.add(st.out_field)
            elif st.op == CLICK_DONE:
                targets.add(DONE_TARGET)
    return targets


def _solve_task(kb, wm, task, excluded, depth, counter):
    """Yield every outcome of every method/binding for the task, in
    deterministic (specificity, insertion, binding, subtask) order."""
    if depth > MAX_DECOMPOSITION_DEPTH:
        raise StructuralError(f"decomposition exceeded depth {MAX_DECOMPOSITION_DEPTH}")
    for method in kb.methods_for(task):
        if method.id in excluded:
            continue
        yield from _try_method(kb, wm, method, excluded, depth, counter)


def _try_method(kb, wm, method, excluded, depth, counter):
    for binding in match(method.network(), wm):
        yield from _run_subtasks(kb, wm, method, binding, excluded, depth, counter)


def _run_subtasks(kb, wm, method, binding, excluded, depth, counter):
    frame = counter.next()
    base_chain = ((method.task, method.id, binding),)
    var_fields = _var_field_map(method.conditions)

    def rec(index, results, chain, ops):
        if index == len(method.subtasks):
            yield _DONE, None, chain, ops
            return
        st = method.subtasks[index]
        if isinstance(st, TaskCall):
            for status, action, sub_chain, sub_ops in _solve_task(
                kb, wm, st.task, excluded, depth + 1, counter
            ):
                if status == _ACTION:
                    yield _ACTION, action, chain + sub_chain, ops + sub_ops
                else:
                    yield from rec(index + 1, results, chain + sub_chain, ops + sub_ops)
            return
        op = kb.operator(st.op)
        if op.kind == "mental":
            try:
                sources, inputs = _resolve_args(st.args, binding, results, var_fields)
                value = op.apply(*inputs)
            except OperatorFailure:
                return  # dead end for this binding
            step = OpStep(op=st.op, sources=sources, inputs=inputs, result=value,
                          frame=frame, subtask_index=index)
            yield from rec(index + 1, {**results, index: value}, chain, ops + (step,))
            return
        if st.op == INPUT_VALUE:
            target = st.out_field
            if not _field_is_empty(wm, target):
                # teacher (or an earlier step) already filled it: skip
                yield from rec(index + 1, results, chain, ops)
                return
            try:
                sources, inputs = _resolve_args(st.args, binding, results, var_fields)
            except OperatorFailure:
                return
            value = inputs[0]
            if value.is_empty:
                return
            step = OpStep(op=INPUT_VALUE, sources=sources, inputs=inputs, result=value,
                          out_field=target, frame=frame, subtask_index=index)
            yield (_ACTION, FieldAction(kind=INPUT_VALUE, field=target, value=value),
                   chain, ops + (step,))
            return
        if st.op == CLICK_DONE:
            step = OpStep(op=CLICK_DONE, sources=(), inputs=(), result=None,
                          frame=frame, subtask_index=index)
            yield _ACTION, FieldAction(kind=CLICK_DONE), chain, ops + (step,)
            return
        raise StructuralError(f"cannot execute operator {st.op!r} in a decomposition")

    yield from rec(0, {}, base_chain, ())


def _resolve_args(args, binding: BindingSet, results: dict, var_fields: dict):
    sources = []
    inputs = []
    for a in args:
        if isinstance(a, StepRef):
            if a.index not in results:
                raise OperatorFailure(f"step {a.index} produced no value")
            sources.append(("step", a.index))
            inputs.append(results[a.index])
        elif isinstance(a, Var):
            try:
                value = binding.get(a.name)
            except KeyError as exc:
                raise OperatorFailure(f"unbound variable {a.name}") from exc
            if not isinstance(value, Value):
                raise OperatorFailure(f"variable {a.name} is not bound to a value")
            sources.append(("field", var_fields.get(a.name, a.name)))
            inputs.append(value)
        elif isinstance(a, Const):
            if not isinstance(a.value, Value):
                raise OperatorFailure("constant argument is not a value")
            sources.append(("const",))
            inputs.append(a.value)
        else:
            raise StructuralError(f"unknown argument kind {a!r}")
    return tuple(sources), tuple(inputs)


def _field_is_empty(wm: WorkingMemory, name: str) -> bool:
    try:
        return lookup(wm, name).is_empty
    except Exception:
        return False


def replay_trace(trace: PlanTrace, wm: WorkingMemory) -> Optional[FieldAction]:
    """Re-execute a trace's operators against the same memory; a sound trace
    reproduces its action. Step references resolve within their frame."""
    from .htn import standard_operator_library

    library = {op.name: op for op in standard_operator_library()}
    results: dict[tuple, Value] = {}
    action: Optional[FieldAction] = None
    for step in trace.executed:
        inputs = []
        for source, recorded in zip(step.sources, step.inputs):
            if source[0] == "field":
                inputs.append(lookup(wm, source[1]))
            elif source[0] == "step":
                inputs.append(results[(step.frame, source[1])])
            else:
                inputs.append(recorded)
        if step.op == INPUT_VALUE:
            action = FieldAction(kind=INPUT_VALUE, field=step.out_field, value=inputs[0])
        elif step.op == CLICK_DONE:
            action = FieldAction(kind=CLICK_DONE)
        else:
            results[(step.frame, step.subtask_index)] = library[step.op].apply(*inputs)
    return action


# -- explanation text ------------------------------------------------------

_TEMPLATES = {
    "add": "I added {0} and {1}",
    "subtract": "I subtracted {1} from {0}",
    "multiply": "I multiplied {0} by {1}",
    "divide": "I divided {0} by {1}",
    "concatenate": "I appended {1} to {0}",
    "left-digits": "I took the digits left of the ones place of {0}",
    "copy": "I copied {0}",
}


@dataclass(frozen=True)
class Explanation:
    text: str
    highlights: frozenset


def explain_trace(trace: PlanTrace) -> Explanation:
    """Deterministic natural-language account of a trace, plus the source
    fields to highlight for the teacher."""
    if not trace.executed:
        raise StructuralError("cannot explain an empty trace")
    highlights: set[str] = set()
    sentences: list[str] = []
    result_sentence = ""
    for step in trace.executed:
        for source in step.sources:
            if source[0] == "field":
                highlights.add(source[1])
        if step.op == CLICK_DONE:
            sentences.append("I think the problem is complete.")
            continue
        if step.op == INPUT_VALUE:
            result_sentence = f" and put the result in {step.out_field}"
            continue
        names = [_describe(s, v) for s, v in zip(step.sources, step.inputs)]
        sentences.append(_TEMPLATES[step.op].format(*names))
    if not sentences:
        sentences.append("I used the value shown")
    text = "; then ".join(sentences) + result_sentence
    if not text.endswith("."):
        text += "."
    return Explanation(text=text, highlights=frozenset(highlights))


def _describe(source, value: Value) -> str:
    if source[0] == "field":
        return str(source[1])
    if source[0] == "step":
        return "the previous result"
    return value.render()
