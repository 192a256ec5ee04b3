"""Working memory: tutor state rendered as facts, plus derived relation facts.

Every tutor step rebuilds its working memory from scratch: the interface
fields become field facts (empty ones included, so conditions can test for
blanks), and relational inference then adds one relation fact per relation
operator per ordered pair of distinct non-empty facts. There is no truth
maintenance; a closed memory is immutable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Optional, Sequence, Union

from .errors import FieldNotFoundError, StateError, StructuralMismatchError

Number = Union[int, Fraction]

NUMBER = "number"
TEXT = "text"
SYMBOL = "symbol"
EMPTY = "empty"

# Operator glyphs a teacher can type into a field (multiplication is "x" in
# the fraction tutors).
SYMBOL_GLYPHS = frozenset({"+", "-", "x", "*", "/", "=", "×", "÷"})

_INT_RE = re.compile(r"^-?\d+$")
_RATIONAL_RE = re.compile(r"^-?\d+/\d+$")


@dataclass(frozen=True)
class Value:
    """Tagged scalar held by one interface field.

    Exactly one of: number (exact int/rational), text, symbol, empty.
    Numbers are never floats; fraction arithmetic and digit concatenation
    need exactness.
    """

    kind: str
    payload: object = None

    @staticmethod
    def number(n: Number) -> "Value":
        if isinstance(n, Fraction) and n.denominator == 1:
            n = int(n)
        if not isinstance(n, (int, Fraction)):
            raise TypeError(f"not an exact number: {n!r}")
        return Value(NUMBER, n)

    @staticmethod
    def text(s: str) -> "Value":
        return Value(TEXT, s)

    @staticmethod
    def symbol(s: str) -> "Value":
        return Value(SYMBOL, s)

    @staticmethod
    def empty() -> "Value":
        return EMPTY_VALUE

    @staticmethod
    def parse(raw: object) -> "Value":
        """Canonicalize raw teacher/generator input into a Value.

        Numerals become exact numbers so a typed "1225" compares equal to a
        computed concatenation result; operator glyphs become symbols;
        everything else is text. None/"" is empty.
        """
        if raw is None:
            return EMPTY_VALUE
        if isinstance(raw, Value):
            return raw
        if isinstance(raw, bool):
            raise TypeError("booleans are not field values")
        if isinstance(raw, (int, Fraction)):
            return Value.number(raw)
        if isinstance(raw, float):
            raise TypeError("floats are not exact field values")
        s = str(raw)
        if s == "":
            return EMPTY_VALUE
        if _INT_RE.match(s):
            return Value.number(int(s))
        if _RATIONAL_RE.match(s):
            return Value.number(Fraction(s))
        if s in SYMBOL_GLYPHS:
            return Value.symbol(s)
        return Value.text(s)

    def render(self) -> str:
        """Textual field representation; parse(render(v)) == v for numbers."""
        if self.kind == EMPTY:
            return ""
        if self.kind == NUMBER:
            n = self.payload
            if isinstance(n, Fraction):
                return f"{n.numerator}/{n.denominator}"
            return str(n)
        return str(self.payload)

    @property
    def is_empty(self) -> bool:
        return self.kind == EMPTY

    @property
    def is_number(self) -> bool:
        return self.kind == NUMBER

    def __repr__(self) -> str:  # compact in test output
        if self.kind == EMPTY:
            return "Value.empty()"
        return f"Value.{self.kind}({self.render()!r})"


EMPTY_VALUE = Value(EMPTY, None)

FIELD = "field"
RELATION = "relation"


@dataclass(frozen=True)
class Fact:
    """One attribute-value record in working memory.

    Field facts carry {name, value, contained-in}; relation facts carry
    {relation, a, b} where a/b are the ids (== names) of the field facts the
    relation was derived from.
    """

    id: str
    kind: str
    attributes: tuple  # ordered (attr, value) pairs; values are Value or str

    def attr(self, name: str) -> object:
        for k, v in self.attributes:
            if k == name:
                return v
        raise KeyError(name)

    def attr_map(self) -> dict:
        return dict(self.attributes)


def field_fact(name: str, value: Value, contained_in: str) -> Fact:
    return Fact(
        id=name,
        kind=FIELD,
        attributes=(("name", name), ("value", value), ("contained-in", contained_in)),
    )


def relation_fact(relation: str, a: str, b: str) -> Fact:
    return Fact(
        id=f"{relation}({a},{b})",
        kind=RELATION,
        attributes=(("relation", relation), ("a", a), ("b", b)),
    )


@dataclass(frozen=True)
class RelationOperator:
    """Predicate over two field values; closure asserts one fact per ordered
    pair for which it holds."""

    name: str
    holds: Callable[[Value, Value], bool]


def _equals(a: Value, b: Value) -> bool:
    return a.kind == b.kind and a.payload == b.payload


def _less_than(a: Value, b: Value) -> bool:
    return a.is_number and b.is_number and a.payload < b.payload


def standard_relations() -> list[RelationOperator]:
    """The fixed relation vocabulary: equals over same-variant values,
    less-than over numbers."""
    return [
        RelationOperator("equals", _equals),
        RelationOperator("less-than", _less_than),
    ]


@dataclass(frozen=True)
class WorkingMemory:
    facts: tuple
    closed: bool = False

    def field_facts(self) -> tuple:
        return tuple(f for f in self.facts if f.kind == FIELD)

    def relation_facts(self) -> tuple:
        return tuple(f for f in self.facts if f.kind == RELATION)

    def by_id(self, fact_id: str) -> Fact:
        for f in self.facts:
            if f.id == fact_id:
                return f
        raise KeyError(fact_id)


def from_tutor_state(state: Mapping[str, object], layout) -> WorkingMemory:
    """Convert the current tutor state into field facts.

    One fact per interface field in layout pre-order, including empty ones;
    label elements contribute a fact carrying their static text. No relation
    facts yet; run close_relations before matching.
    """
    input_names = set(layout.input_names())
    for name in state:
        if name not in input_names:
            raise StructuralMismatchError(f"unknown field name: {name!r}")
    facts = []
    for name, text, container in layout.field_slots():
        if text is not None:
            facts.append(field_fact(name, Value.text(text), container))
        else:
            facts.append(field_fact(name, Value.parse(state.get(name)), container))
    return WorkingMemory(facts=tuple(facts), closed=False)


def close_relations(
    wm: WorkingMemory, relations: Optional[Sequence[RelationOperator]] = None
) -> WorkingMemory:
    """Run relational inference: derive one relation fact per operator per
    ordered pair of distinct non-empty field facts for which it holds.

    Idempotent: closing a closed memory returns it unchanged.
    """
    if wm.closed:
        return wm
    if relations is None:
        relations = standard_relations()
    fields = wm.field_facts()
    non_empty = [f for f in fields if not f.attr("value").is_empty]
    derived = []
    for rel in relations:
        for fa in non_empty:
            for fb in non_empty:
                if fa.id == fb.id:
                    continue
                if rel.holds(fa.attr("value"), fb.attr("value")):
                    derived.append(relation_fact(rel.name, fa.id, fb.id))
    return WorkingMemory(facts=tuple(fields) + tuple(derived), closed=True)


def lookup(wm: WorkingMemory, name: str) -> Value:
    for f in wm.field_facts():
        if f.attr("name") == name:
            return f.attr("value")
    raise FieldNotFoundError(f"no field fact named {name!r}")


def require_closed(wm: WorkingMemory) -> None:
    if not wm.closed:
        raise StateError("working memory has not been closed under relational inference")
