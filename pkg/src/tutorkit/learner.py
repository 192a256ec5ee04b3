"""Learning component: explain demonstrations, induce methods, generalize
conditions by anti-unification, and integrate correctness feedback.

Explanation search is breadth-first by depth with ties broken by operator
declaration order and source order. Depth-0 explanations are copies of
existing field values; this deliberately lets a copy explanation shadow an
arithmetic one when both reproduce the demonstrated value (the numerator-1
trap), matching the deployed agent's observed behavior.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

from .errors import OperatorFailure, ProtocolError
from .htn import (
    CLICK_DONE,
    INPUT_VALUE,
    MENTAL,
    KnowledgeBase,
    Method,
    Operator,
    OperatorCall,
    StepRef,
    _var_field_map,
)
from .planner import PlanResult, attempt_step
from .rete import Clause, Const, Pattern, Var
from .wm import FIELD, RELATION, Value, WorkingMemory, lookup, require_closed


@dataclass(frozen=True)
class Demonstration:
    """The teacher filling one step directly in the interface (field=None
    for a click of the Done button)."""

    field: Optional[str]
    value: Optional[Value]
    task_label: str
    wm: WorkingMemory  # closed memory observed before the field was filled


@dataclass(frozen=True)
class Explanation:
    """An operator sequence reproducing the demonstrated value.

    steps are topologically ordered (op, arg-refs) pairs where an arg-ref is
    ("field", name) or ("step", index of an earlier step).
    """

    steps: tuple
    output: Value
    depth: int
    sources: tuple  # field names, in order of first use

    def signature(self) -> tuple:
        return self.steps


class _Node:
    __slots__ = ("expr", "value", "depth", "vid")

    def __init__(self, expr, value, depth, vid):
        self.expr = expr  # ("field", name) | (op-name, (child nodes...))
        self.value = value
        self.depth = depth
        self.vid = vid  # interned value id: cheap cache keys and compares


def iter_explanations(
    wm: WorkingMemory, value: Value, operators: Sequence[Operator], max_depth: int
) -> Iterator[Explanation]:
    """Yield explanations in canonical order: depth ascending, then operator
    declaration order, then source order (field order, then creation order
    of derived values).

    The inner loops run over every argument tuple of every layer, so values
    are interned to integer ids and operator results cached per
    (operator, operand ids) — including failures.
    """
    require_closed(wm)
    if value is None or value.is_empty:
        return
    value_ids: dict = {}

    def vid(v) -> int:
        i = value_ids.get(v)
        if i is None:
            i = len(value_ids)
            value_ids[v] = i
        return i

    target_vid = vid(value)
    nodes: list[_Node] = []
    for fact in wm.field_facts():
        v = fact.attr("value")
        if not v.is_empty:
            nodes.append(_Node(("field", fact.attr("name")), v, 0, vid(v)))
    for node in nodes:
        if node.vid == target_vid:
            yield _copy_explanation(node)
    mentals = [op for op in operators if op.kind == MENTAL and op.name != "copy"]
    cache: dict = {}
    miss = object()
    prev_start = 0
    for depth in range(1, max_depth + 1):
        frontier = len(nodes)
        last_layer = depth == max_depth  # its nodes never feed another layer
        produced: list[_Node] = []
        for op_index, op in enumerate(mentals):
            fn = op.fn
            if op.arity == 1:
                # exactly the previous layer (its nodes are the tail slice)
                for a in nodes[prev_start:frontier]:
                    key = (op_index, a.vid)
                    entry = cache.get(key, miss)
                    if entry is miss:
                        try:
                            result = fn(a.value)
                            entry = (result, vid(result))
                        except OperatorFailure:
                            entry = None
                        cache[key] = entry
                    if entry is None:
                        continue
                    if last_layer:
                        if entry[1] == target_vid:
                            yield _flatten(_Node((op.name, (a,)), entry[0], depth, entry[1]))
                        continue
                    node = _Node((op.name, (a,)), entry[0], depth, entry[1])
                    produced.append(node)
                    if entry[1] == target_vid:
                        yield _flatten(node)
                continue
            for ai in range(frontier):
                a = nodes[ai]
                # at least one argument from the previous layer keeps each
                # expression in exactly one layer; order stays lexicographic
                # because that layer is contiguous at the tail
                if a.depth == depth - 1:
                    b_lo, b_hi = 0, frontier
                else:
                    b_lo, b_hi = prev_start, frontier
                a_vid = a.vid
                a_value = a.value
                for bi in range(b_lo, b_hi):
                    b = nodes[bi]
                    key = (op_index, a_vid, b.vid)
                    entry = cache.get(key, miss)
                    if entry is miss:
                        try:
                            result = fn(a_value, b.value)
                            entry = (result, vid(result))
                        except OperatorFailure:
                            entry = None
                        cache[key] = entry
                    if entry is None:
                        continue
                    if last_layer:
                        if entry[1] == target_vid:
                            yield _flatten(_Node((op.name, (a, b)), entry[0], depth, entry[1]))
                        continue
                    node = _Node((op.name, (a, b)), entry[0], depth, entry[1])
                    produced.append(node)
                    if entry[1] == target_vid:
                        yield _flatten(node)
        prev_start = frontier
        nodes.extend(produced)


def explain(
    wm: WorkingMemory, value: Value, operators: Sequence[Operator], max_depth: int
) -> list[Explanation]:
    """All explanations up to max_depth, in canonical order; empty list when
    the value is not derivable."""
    return list(iter_explanations(wm, value, operators, max_depth))


def first_explanation(
    wm: WorkingMemory, value: Value, operators: Sequence[Operator], max_depth: int
) -> Optional[Explanation]:
    for e in iter_explanations(wm, value, operators, max_depth):
        return e
    return None


def _copy_explanation(node: _Node) -> Explanation:
    name = node.expr[1]
    return Explanation(
        steps=(("copy", (("field", name),)),),
        output=node.value,
        depth=0,
        sources=(name,),
    )


def _flatten(root: _Node) -> Explanation:
    steps: list = []
    sources: list[str] = []
    index_of: dict[int, int] = {}

    def ref(node: _Node):
        if node.expr[0] == "field" and node.depth == 0:
            name = node.expr[1]
            if name not in sources:
                sources.append(name)
            return ("field", name)
        if id(node) in index_of:
            return ("step", index_of[id(node)])
        op, children = node.expr
        arg_refs = tuple(ref(c) for c in children)
        steps.append((op, arg_refs))
        index_of[id(node)] = len(steps) - 1
        return ("step", len(steps) - 1)

    ref(root)
    return Explanation(steps=tuple(steps), output=root.value, depth=root.depth, sources=tuple(sources))


def replay_explanation(e: Explanation, wm: WorkingMemory, operators: Sequence[Operator]) -> Value:
    """Execute an explanation over the memory it was found in."""
    library = {op.name: op for op in operators}
    results: list[Value] = []
    for op_name, arg_refs in e.steps:
        args = []
        for kind, key in arg_refs:
            args.append(lookup(wm, key) if kind == "field" else results[key])
        results.append(library[op_name].fn(*args))
    return results[-1]


# -- method induction -----------------------------------------------------


def induce_method(demo: Demonstration, explanations: Sequence[Explanation]) -> Method:
    """Build a method from a demonstration.

    With an explanation: subtasks are its operator calls plus a terminal
    input into the demonstrated field; conditions are the conjunction of
    every fact in the observed memory, with source-field values variablized
    and bound into the operator arguments, everything else constant.

    Without one: a memorized method — the full constant conjunction of the
    state, always outputting the demonstrated constant.
    """
    if demo.field is None:
        return Method(
            task=demo.task_label,
            conditions=_state_conjunction(demo.wm, var_fields={}),
            subtasks=(OperatorCall(op=CLICK_DONE),),
            provenance="learned",
        )
    if explanations:
        e = explanations[0]
        var_of = {name: Var(f"v{i + 1}") for i, name in enumerate(e.sources)}
        subtasks = []
        for op_name, arg_refs in e.steps:
            args = tuple(
                var_of[key] if kind == "field" else StepRef(key) for kind, key in arg_refs
            )
            subtasks.append(OperatorCall(op=op_name, args=args))
        subtasks.append(
            OperatorCall(op=INPUT_VALUE, args=(StepRef(len(e.steps) - 1),), out_field=demo.field)
        )
        return Method(
            task=demo.task_label,
            conditions=_state_conjunction(demo.wm, var_fields=var_of),
            subtasks=tuple(subtasks),
            provenance="learned",
        )
    return Method(
        task=demo.task_label,
        conditions=_state_conjunction(demo.wm, var_fields={}),
        subtasks=(OperatorCall(op=INPUT_VALUE, args=(Const(demo.value),), out_field=demo.field),),
        provenance="memorized",
    )


# Relation kinds a learned condition may conjoin. Strict-order facts over
# random operand draws are incidental orderings (and a < a*b style near-
# truths survive condition merging long enough to block generalization), so
# learned conditions keep only equality relations; order facts stay in
# working memory for hand-authored patterns to use.
CONDITION_RELATIONS = frozenset({"equals"})


def _state_conjunction(wm: WorkingMemory, var_fields: dict) -> Pattern:
    clauses = []
    for fact in wm.facts:
        if fact.kind == RELATION and fact.attr("relation") not in CONDITION_RELATIONS:
            continue
        if fact.kind == FIELD:
            name = fact.attr("name")
            value_term = var_fields.get(name) or Const(fact.attr("value"))
            clauses.append(
                Clause(
                    kind=FIELD,
                    attrs=(
                        ("name", Const(name)),
                        ("value", value_term),
                        ("contained-in", Const(fact.attr("contained-in"))),
                    ),
                )
            )
        else:
            clauses.append(
                Clause(
                    kind=RELATION,
                    attrs=(
                        ("relation", Const(fact.attr("relation"))),
                        ("a", Const(fact.attr("a"))),
                        ("b", Const(fact.attr("b"))),
                    ),
                )
            )
    return Pattern(clauses=tuple(clauses))


# -- least-general generalization ------------------------------------------


def lgg_conditions(a: Pattern, b: Pattern) -> Pattern:
    """Anti-unify two condition conjunctions.

    Clauses align by field name (field facts) or by relation name plus
    argument names (relation facts); unalignable clauses drop out — that is
    how a d1==d2 condition survives merges across same-denominator states
    and disappears over mixed ones. Aligned attributes keep equal constants
    and variablize differing terms, with a shared table mapping each
    distinct term pair to one variable.

    Identical variable pairs keep their name (so p ⊔ p = p structurally);
    fresh variables for differing pairs are drawn from names not preserved
    anywhere, preventing accidental aliasing across slots.
    """
    b_index = {_clause_key(c): c for c in b.clauses}
    # pass 1: align and record term pairs
    skeleton: list[tuple[str, list]] = []
    pair_keys: list[tuple] = []
    preserved: set[str] = set()
    for ca in a.clauses:
        cb = b_index.get(_clause_key(ca))
        if cb is None:
            continue
        attrs: list = []
        ok = True
        for (name_a, ta), (name_b, tb) in zip(ca.attrs, cb.attrs):
            if name_a != name_b:
                ok = False
                break
            if ta == tb and isinstance(ta, Const):
                attrs.append((name_a, ta))
            else:
                key = (ta, tb)
                if key not in pair_keys:
                    pair_keys.append(key)
                if isinstance(ta, Var) and ta == tb:
                    preserved.add(ta.name)
                attrs.append((name_a, key))
        if ok:
            skeleton.append((ca.kind, attrs))
    # pass 2: one variable per distinct pair; equal-variable pairs keep
    # their name, the rest get fresh names outside the preserved set
    names: dict[tuple, Var] = {}
    counter = 0
    for key in pair_keys:
        ta, tb = key
        if isinstance(ta, Var) and ta == tb:
            names[key] = ta
        else:
            counter += 1
            while f"v{counter}" in preserved:
                counter += 1
            names[key] = Var(f"v{counter}")
    merged = []
    for kind, attrs in skeleton:
        final = tuple(
            (name, t if isinstance(t, (Const, Var)) else names[t]) for name, t in attrs
        )
        merged.append(Clause(kind=kind, attrs=final))
    negated = tuple(c for c in a.negated if c in set(b.negated))
    return Pattern(clauses=tuple(merged), negated=negated)


def _clause_key(c: Clause):
    attrs = dict(c.attrs)
    if c.kind == FIELD:
        name = attrs.get("name")
        return (FIELD, name.value if isinstance(name, Const) else name)
    parts = [c.kind]
    for key in ("relation", "a", "b"):
        t = attrs.get(key)
        parts.append(t.value if isinstance(t, Const) else t)
    return tuple(parts)


# -- integration -----------------------------------------------------------


def integrate_demonstration(kb: KnowledgeBase, demo: Demonstration) -> Method:
    """Explain, induce, and file the method; a same-decomposition sibling
    under the task label merges with it via lgg instead of accumulating."""
    explanation = None
    if demo.field is not None:
        explanation = first_explanation(demo.wm, demo.value, kb.mental_operators(), kb.max_depth)
    induced = induce_method(demo, [explanation] if explanation else [])
    bucket = kb.tasks.get(demo.task_label, [])
    induced_sig = induced.decomposition_signature()
    for existing in list(bucket):
        if existing.decomposition_signature() == induced_sig:
            conditions = lgg_conditions(existing.conditions, induced.conditions)
            merged = Method(
                task=demo.task_label,
                conditions=conditions,
                subtasks=_remap_subtasks(existing, conditions),
                provenance=existing.provenance,
                merge_count=existing.merge_count + 1,
            )
            return kb.replace_method(demo.task_label, existing, merged)
    return kb.add_method(induced)


def _remap_subtasks(method: Method, merged: Pattern) -> tuple:
    """Rewire field-sourced arguments onto the merged pattern's value terms
    (a source slot may have generalized to a different variable, or stayed
    constant when both states agreed)."""
    field_of_var = _var_field_map(method.conditions)
    term_of_field = {}
    for cl in merged.clauses:
        attrs = dict(cl.attrs)
        if cl.kind == FIELD and isinstance(attrs.get("name"), Const):
            term_of_field[attrs["name"].value] = attrs.get("value")
    out = []
    for st in method.subtasks:
        if not isinstance(st, OperatorCall):
            out.append(st)
            continue
        args = []
        for a in st.args:
            if isinstance(a, Var) and a.name in field_of_var:
                args.append(term_of_field[field_of_var[a.name]])
            else:
                args.append(a)
        out.append(OperatorCall(op=st.op, args=tuple(args), out_field=st.out_field))
    return tuple(out)


@dataclass(frozen=True)
class Directive:
    kind: str  # advance-to-next-step | retry | request-demonstration
    excluded: frozenset = frozenset()
    retry: Optional[PlanResult] = None


def integrate_feedback(
    kb: KnowledgeBase,
    wm: WorkingMemory,
    target: str,
    result: PlanResult,
    verdict: str,
    excluded: frozenset = frozenset(),
) -> Directive:
    """Fold a yes/no into the protocol: yes advances; no excludes the applied
    method for this step instance and either retries with the exclusion set
    or requests a demonstration. The knowledge base is never modified —
    negative feedback deletes nothing.
    """
    if verdict not in ("yes", "no"):
        raise ProtocolError(f"feedback must be yes or no, got {verdict!r}")
    _check_trace_fresh(wm, result)
    if verdict == "yes":
        return Directive(kind="advance-to-next-step", excluded=excluded)
    new_excluded = excluded | {result.method_id}
    retry = attempt_step(kb, wm, target, new_excluded)
    if retry is not None:
        return Directive(kind="retry", excluded=new_excluded, retry=retry)
    return Directive(kind="request-demonstration", excluded=new_excluded)


def _check_trace_fresh(wm: WorkingMemory, result: PlanResult) -> None:
    action = result.action
    if action.kind == INPUT_VALUE:
        try:
            current = lookup(wm, action.field)
        except Exception as exc:
            raise ProtocolError(f"feedback on a stale trace: {exc}") from exc
        if not current.is_empty:
            raise ProtocolError(
                f"feedback on a stale trace: field {action.field!r} is no longer empty"
            )
