"""HTN knowledge: tasks, methods, operators, and their serialization.

The structure is an AND-OR tree: to solve a task, one method suffices (OR);
a method's subtasks must all complete (AND). Methods are either authored by
hand, learned from a demonstration's operator trace, or memorized (a
constant-output fallback tied to one exact state). Operators are
pre-authored; there is no operator learning.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Union

from .errors import OperatorFailure, StructuralError
from .rete import Clause, Const, MatcherNetwork, Pattern, Term, Var, compile_pattern
from .wm import Value, standard_relations

AGENT_FORMAT_VERSION = 1

MENTAL = "mental"
INTERFACE = "interface"
RELATION_KIND = "relation"

INPUT_VALUE = "input-value"
CLICK_DONE = "click-done"

DEFAULT_MAX_DEPTH = 2  # mental-search depth; small for performance


@dataclass(frozen=True)
class Operator:
    """Primitive executable knowledge.

    Mental operators map argument values to a value (raising OperatorFailure
    outside their domain, which search skips silently); interface operators
    act on the tutor; relation operators only ever assert boolean facts
    during relational inference.
    """

    name: str
    kind: str
    arity: int
    fn: Optional[Callable] = None

    def apply(self, *args: Value) -> Value:
        if self.kind != MENTAL:
            raise OperatorFailure(f"{self.name} is not a mental operator")
        if len(args) != self.arity:
            raise OperatorFailure(f"{self.name} expects {self.arity} arguments")
        return self.fn(*args)


def _require_numbers(name, *args):
    for a in args:
        if not a.is_number:
            raise OperatorFailure(f"{name} needs numbers")


def _add(a: Value, b: Value) -> Value:
    _require_numbers("add", a, b)
    return Value.number(a.payload + b.payload)


def _subtract(a: Value, b: Value) -> Value:
    _require_numbers("subtract", a, b)
    return Value.number(a.payload - b.payload)


def _multiply(a: Value, b: Value) -> Value:
    _require_numbers("multiply", a, b)
    return Value.number(a.payload * b.payload)


def _divide(a: Value, b: Value) -> Value:
    _require_numbers("divide", a, b)
    if b.payload == 0:
        raise OperatorFailure("division by zero")
    return Value.number(Fraction(a.payload) / Fraction(b.payload))


def _digits(name: str, v: Value) -> str:
    if v.is_number:
        if not isinstance(v.payload, int) or v.payload < 0:
            raise OperatorFailure(f"{name} needs digit-like arguments")
        return str(v.payload)
    if v.kind in ("text", "symbol"):
        return str(v.payload)
    raise OperatorFailure(f"{name} cannot use an empty value")


def _concatenate(a: Value, b: Value) -> Value:
    return Value.parse(_digits("concatenate", a) + _digits("concatenate", b))


def _left_digits(a: Value) -> Value:
    if not (a.is_number and isinstance(a.payload, int) and a.payload >= 0):
        raise OperatorFailure("left-digits needs a nonnegative integer")
    return Value.number(a.payload // 10)


def _copy(a: Value) -> Value:
    if a.is_empty:
        raise OperatorFailure("cannot copy an empty field")
    return a


def standard_operator_library() -> list[Operator]:
    """The pre-authored operator set, in declaration order.

    Declaration order matters: explanation search breaks depth ties by it.
    """
    rels = {r.name: r for r in standard_relations()}
    return [
        Operator("add", MENTAL, 2, _add),
        Operator("subtract", MENTAL, 2, _subtract),
        Operator("multiply", MENTAL, 2, _multiply),
        Operator("divide", MENTAL, 2, _divide),
        Operator("concatenate", MENTAL, 2, _concatenate),
        Operator("left-digits", MENTAL, 1, _left_digits),
        Operator("copy", MENTAL, 1, _copy),
        Operator(INPUT_VALUE, INTERFACE, 1),
        Operator(CLICK_DONE, INTERFACE, 0),
        Operator("equals", RELATION_KIND, 2, rels["equals"].holds),
        Operator("less-than", RELATION_KIND, 2, rels["less-than"].holds),
    ]


# -- subtask structure ---------------------------------------------------


@dataclass(frozen=True)
class StepRef:
    """Reference to the result of an earlier operator call in the same
    method (0-based index into the subtask list)."""

    index: int

    def __repr__(self):
        return f"StepRef({self.index})"


Arg = Union[Const, Var, StepRef]


@dataclass(frozen=True)
class OperatorCall:
    op: str
    args: tuple = ()
    out_field: Optional[str] = None  # input-value target


@dataclass(frozen=True)
class TaskCall:
    task: str


Subtask = Union[OperatorCall, TaskCall]


@dataclass
class Method:
    """One way to achieve a task: applicability conditions plus an ordered
    subtask sequence."""

    task: str
    conditions: Pattern
    subtasks: tuple
    provenance: str = "authored"  # learned | memorized | authored
    merge_count: int = 1
    id: str = ""
    _network: Optional[MatcherNetwork] = field(default=None, repr=False, compare=False)

    def network(self) -> MatcherNetwork:
        if self._network is None:
            self._network = compile_pattern(self.conditions)
        return self._network

    def signature(self) -> tuple:
        """Structural identity of conditions + subtasks, for duplicate
        merging."""
        return (self.conditions, self.subtasks)

    def decomposition_signature(self) -> tuple:
        """Operator names and argument roles, ignoring condition details.

        Field-sourced variable arguments are identified by the field whose
        value slot binds them, so two methods copy(num2)->input(ans) learned
        from different states compare equal.
        """
        roles = []
        field_of_var = _var_field_map(self.conditions)
        for st in self.subtasks:
            if isinstance(st, TaskCall):
                roles.append(("task", st.task))
                continue
            arg_roles = []
            for a in st.args:
                if isinstance(a, StepRef):
                    arg_roles.append(("step", a.index))
                elif isinstance(a, Var):
                    arg_roles.append(("field", field_of_var.get(a.name, "?" + a.name)))
                else:
                    arg_roles.append(("const", a.value))
            roles.append(("op", st.op, st.out_field, tuple(arg_roles)))
        return tuple(roles)


def _var_field_map(pat: Pattern) -> dict:
    """Map variable name -> first field whose value slot carries it."""
    out: dict = {}
    for cl in pat.clauses:
        if cl.kind != "field":
            continue
        attrs = dict(cl.attrs)
        name_t = attrs.get("name")
        value_t = attrs.get("value")
        if isinstance(value_t, Var) and isinstance(name_t, Const):
            out.setdefault(value_t.name, name_t.value)
    return out


class KnowledgeBase:
    """Methods multimapped by task label, plus the operator library."""

    def __init__(self, operators: Optional[list[Operator]] = None, max_depth: int = DEFAULT_MAX_DEPTH):
        self.operators: list[Operator] = list(operators) if operators is not None else standard_operator_library()
        self.max_depth = max_depth
        self.tasks: dict[str, list[Method]] = {}
        self._method_seq = 0
        self._rank_seq = 0
        self._insertion: dict[str, int] = {}

    def operator(self, name: str) -> Operator:
        for op in self.operators:
            if op.name == name:
                return op
        raise StructuralError(f"unknown operator {name!r}")

    def mental_operators(self) -> list[Operator]:
        return [op for op in self.operators if op.kind == MENTAL]

    def add_method(self, m: Method) -> Method:
        """Append m under its task; an exact duplicate (same conditions and
        subtasks) merges into the existing method instead."""
        m.network()  # compile now: rejects unsafe patterns at insertion time
        bucket = self.tasks.setdefault(m.task, [])
        for existing in bucket:
            if existing.signature() == m.signature():
                existing.merge_count += m.merge_count
                return existing
        if not m.id:
            m.id = f"m{self._method_seq}"
            self._method_seq += 1
        self._insertion[m.id] = self._rank_seq
        self._rank_seq += 1
        bucket.append(m)
        return m

    def replace_method(self, task: str, old: Method, merged: Method) -> Method:
        """Swap a generalized method in for the one it subsumes, keeping the
        replaced method's identity and insertion rank."""
        merged.id = old.id
        merged.task = task
        self.tasks[task] = [merged if m is old else m for m in self.tasks[task]]
        return merged

    def methods_for(self, task: str) -> list[Method]:
        """Deterministic order: most-specific first (clause count
        descending), then insertion order. Specific (memorized) knowledge
        shadows general methods."""
        bucket = self.tasks.get(task, [])
        return sorted(bucket, key=lambda m: (-m.conditions.clause_count(), self._insertion[m.id]))

    def all_methods(self) -> list[Method]:
        out = []
        for bucket in self.tasks.values():
            out.extend(bucket)
        return sorted(out, key=lambda m: self._insertion[m.id])

    def insertion_rank(self, m: Method) -> int:
        return self._insertion[m.id]

    def referenced_fields(self) -> set[str]:
        """Every interface field the agent's methods write to or condition
        on; used by the service to validate layout edits."""
        fields: set[str] = set()
        for m in self.all_methods():
            for st in m.subtasks:
                if isinstance(st, OperatorCall) and st.out_field:
                    fields.add(st.out_field)
        return fields

    # -- serialization -------------------------------------------------

    def to_doc(self) -> dict:
        return {
            "format": "agent",
            "version": AGENT_FORMAT_VERSION,
            "max_depth": self.max_depth,
            "operators": [op.name for op in self.operators],
            "tasks": {
                task: [_method_to_doc(m, self._insertion[m.id]) for m in bucket]
                for task, bucket in self.tasks.items()
            },
            "method_seq": self._method_seq,
        }

    def to_json(self) -> str:
        return canonical_json(self.to_doc())

    @staticmethod
    def from_doc(doc: dict) -> "KnowledgeBase":
        if doc.get("format") != "agent" or doc.get("version") != AGENT_FORMAT_VERSION:
            raise StructuralError("not a supported agent document")
        library = {op.name: op for op in standard_operator_library()}
        try:
            operators = [library[name] for name in doc["operators"]]
        except KeyError as exc:
            raise StructuralError(f"unknown operator in agent document: {exc}") from exc
        kb = KnowledgeBase(operators=operators, max_depth=doc["max_depth"])
        ranked: list[tuple[int, str, Method]] = []
        for task, methods in doc["tasks"].items():
            for mdoc in methods:
                m = _method_from_doc(mdoc)
                m.task = task
                ranked.append((mdoc["rank"], task, m))
        for rank, task, m in ranked:
            kb.tasks.setdefault(task, []).append(m)
            kb._insertion[m.id] = rank
        kb._method_seq = doc.get("method_seq", len(ranked))
        kb._rank_seq = max((r for r, _, _ in ranked), default=-1) + 1
        return kb

    @staticmethod
    def from_json(text: str) -> "KnowledgeBase":
        return KnowledgeBase.from_doc(json.loads(text))


def canonical_json(doc: dict) -> str:
    """Stable byte representation; insertion order is semantic, so keys are
    not re-sorted."""
    return json.dumps(doc, ensure_ascii=True, separators=(",", ":"))


# -- document encoding ---------------------------------------------------


def value_to_doc(v: object) -> dict:
    if isinstance(v, Value):
        return {"t": v.kind, "v": v.render()}
    if isinstance(v, str):
        return {"t": "id", "v": v}
    raise StructuralError(f"cannot serialize constant {v!r}")


def value_from_doc(doc: dict) -> object:
    t, raw = doc["t"], doc["v"]
    if t == "id":
        return raw
    if t == "empty":
        return Value.empty()
    if t == "number":
        return Value.parse(raw)
    if t == "text":
        return Value.text(raw)
    if t == "symbol":
        return Value.symbol(raw)
    raise StructuralError(f"unknown value tag {t!r}")


def _term_to_doc(t: Term) -> dict:
    if isinstance(t, Var):
        return {"var": t.name}
    return {"const": value_to_doc(t.value)}


def _term_from_doc(doc: dict) -> Term:
    if "var" in doc:
        return Var(doc["var"])
    return Const(value_from_doc(doc["const"]))


def _clause_to_doc(cl: Clause) -> dict:
    return {"kind": cl.kind, "attrs": [[a, _term_to_doc(t)] for a, t in cl.attrs]}


def _clause_from_doc(doc: dict) -> Clause:
    return Clause(kind=doc["kind"], attrs=tuple((a, _term_from_doc(t)) for a, t in doc["attrs"]))


def _arg_to_doc(a: Arg) -> dict:
    if isinstance(a, StepRef):
        return {"step": a.index}
    return _term_to_doc(a)


def _arg_from_doc(doc: dict) -> Arg:
    if "step" in doc:
        return StepRef(doc["step"])
    return _term_from_doc(doc)


def _subtask_to_doc(st: Subtask) -> dict:
    if isinstance(st, TaskCall):
        return {"task": st.task}
    doc: dict = {"op": st.op, "args": [_arg_to_doc(a) for a in st.args]}
    if st.out_field is not None:
        doc["field"] = st.out_field
    return doc


def _subtask_from_doc(doc: dict) -> Subtask:
    if "task" in doc:
        return TaskCall(doc["task"])
    return OperatorCall(
        op=doc["op"],
        args=tuple(_arg_from_doc(a) for a in doc["args"]),
        out_field=doc.get("field"),
    )


def _method_to_doc(m: Method, rank: int) -> dict:
    return {
        "id": m.id,
        "rank": rank,
        "provenance": m.provenance,
        "merge_count": m.merge_count,
        "conditions": {
            "clauses": [_clause_to_doc(c) for c in m.conditions.clauses],
            "negated": [_clause_to_doc(c) for c in m.conditions.negated],
        },
        "subtasks": [_subtask_to_doc(s) for s in m.subtasks],
    }


def _method_from_doc(doc: dict) -> Method:
    task = doc.get("task", "")
    method = Method(
        task=task,
        conditions=Pattern(
            clauses=tuple(_clause_from_doc(c) for c in doc["conditions"]["clauses"]),
            negated=tuple(_clause_from_doc(c) for c in doc["conditions"]["negated"]),
        ),
        subtasks=tuple(_subtask_from_doc(s) for s in doc["subtasks"]),
        provenance=doc["provenance"],
        merge_count=doc["merge_count"],
        id=doc["id"],
    )
    return method
