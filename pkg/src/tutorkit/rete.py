"""Pattern matcher over working memory.

Patterns are conjunctions of fact templates with variables. Compilation
builds a rete-style network: one alpha node per clause (constant tests,
feeding an alpha memory) and a left-to-right chain of beta joins applying
variable-consistency and fact-distinctness tests, ending in negated-clause
filters. Matching is batch per tutor step — there is no retraction or
incremental re-matching across steps.

Distinct positive clauses must bind distinct facts: conditions derived from
state conjunctions enumerate distinct interface fields, and aliasing would
create spurious matches.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .errors import PatternCompileError
from .wm import WorkingMemory, require_closed


@dataclass(frozen=True)
class Const:
    value: object  # Value or str (fact id / field name)

    def __repr__(self):
        return f"Const({self.value!r})"


@dataclass(frozen=True)
class Var:
    name: str

    def __repr__(self):
        return f"?{self.name}"


Term = Union[Const, Var]


def term(x: object) -> Term:
    """Coerce shorthand into a Term: Var/Const pass through, strings starting
    with "?" become variables, everything else a constant."""
    if isinstance(x, (Const, Var)):
        return x
    if isinstance(x, str) and x.startswith("?"):
        return Var(x[1:])
    return Const(x)


@dataclass(frozen=True)
class Clause:
    kind: str  # fact kind this template applies to
    attrs: tuple  # ordered (attr-name, Term) pairs

    def attr_terms(self) -> tuple:
        return self.attrs

    def variables(self) -> set[str]:
        return {t.name for _, t in self.attrs if isinstance(t, Var)}


def clause(kind: str, **attrs) -> Clause:
    return Clause(kind=kind, attrs=tuple((k.replace("_", "-"), term(v)) for k, v in attrs.items()))


def field_clause(**attrs) -> Clause:
    return clause("field", **attrs)


def relation_clause(relation: str, a: object, b: object) -> Clause:
    return clause("relation", relation=relation, a=a, b=b)


@dataclass(frozen=True)
class Pattern:
    clauses: tuple = ()
    negated: tuple = ()

    def variables(self) -> set[str]:
        out: set[str] = set()
        for c in self.clauses:
            out |= c.variables()
        return out

    def clause_count(self) -> int:
        return len(self.clauses) + len(self.negated)


def pattern(clauses=(), negated=()) -> Pattern:
    return Pattern(clauses=tuple(clauses), negated=tuple(negated))


@dataclass(frozen=True)
class BindingSet:
    """One complete match: variable bindings plus the fact id bound by each
    positive clause, in clause order."""

    variables: tuple  # ordered (name, value) pairs
    fact_ids: tuple

    def get(self, name: str) -> object:
        for k, v in self.variables:
            if k == name:
                return v
        raise KeyError(name)

    def as_dict(self) -> dict:
        return dict(self.variables)


def _match_clause(cl: Clause, fact, env: dict) -> Optional[dict]:
    """Unify one clause against one fact under env; returns the extended env
    or None. Facts may carry attributes the clause does not mention."""
    if fact.kind != cl.kind:
        return None
    new = env
    fact_attrs = fact.attr_map()
    for attr, t in cl.attrs:
        if attr not in fact_attrs:
            return None
        actual = fact_attrs[attr]
        if isinstance(t, Const):
            if t.value != actual:
                return None
        else:
            bound = new.get(t.name, _UNBOUND)
            if bound is _UNBOUND:
                if new is env:
                    new = dict(env)
                new[t.name] = actual
            elif bound != actual:
                return None
    return new if new is not env else dict(env)


_UNBOUND = object()


class _AlphaNode:
    """Constant-test node: caches which facts satisfy a clause's ground
    attribute constraints."""

    def __init__(self, cl: Clause):
        self.clause = cl
        self.const_attrs = tuple((a, t.value) for a, t in cl.attrs if isinstance(t, Const))

    def select(self, wm: WorkingMemory) -> list:
        memory = []
        for fact in wm.facts:
            if fact.kind != self.clause.kind:
                continue
            attrs = fact.attr_map()
            if all(a in attrs and attrs[a] == v for a, v in self.const_attrs):
                memory.append(fact)
        return memory


class MatcherNetwork:
    """Compiled pattern: alpha nodes and the join/negation plan."""

    def __init__(self, pat: Pattern):
        unsafe = set()
        positive_vars = pat.variables()
        for neg in pat.negated:
            unsafe |= neg.variables() - positive_vars
        if unsafe:
            raise PatternCompileError(
                "negated clauses use variables absent from positive clauses: "
                + ", ".join(sorted(unsafe))
            )
        self.pattern = pat
        self.alphas = [_AlphaNode(c) for c in pat.clauses]
        self.neg_alphas = [_AlphaNode(c) for c in pat.negated]
        self.var_order = _variable_order(pat)

    def match(self, wm: WorkingMemory) -> list[BindingSet]:
        require_closed(wm)
        # Beta memory 0 holds the empty token; each join level pairs the
        # previous beta memory with the next alpha memory. Token-major,
        # fact-minor iteration keeps the output lexicographic in (clause
        # order, fact order).
        tokens: list[tuple[dict, tuple]] = [({}, ())]
        for alpha in self.alphas:
            memory = alpha.select(wm)
            joined: list[tuple[dict, tuple]] = []
            for env, used in tokens:
                for fact in memory:
                    if fact.id in used:
                        continue
                    extended = _match_clause(alpha.clause, fact, env)
                    if extended is not None:
                        joined.append((extended, used + (fact.id,)))
            tokens = joined
            if not tokens:
                break
        results: list[BindingSet] = []
        for env, used in tokens:
            if self._negations_clear(wm, env):
                ordered = tuple((v, env[v]) for v in self.var_order if v in env)
                results.append(BindingSet(variables=ordered, fact_ids=used))
        return results

    def _negations_clear(self, wm: WorkingMemory, env: dict) -> bool:
        for alpha, neg in zip(self.neg_alphas, self.pattern.negated):
            for fact in alpha.select(wm):
                if _match_clause(neg, fact, env) is not None:
                    return False
        return True


def _variable_order(pat: Pattern) -> list[str]:
    order: list[str] = []
    for c in pat.clauses:
        for _, t in c.attrs:
            if isinstance(t, Var) and t.name not in order:
                order.append(t.name)
    return order


def compile_pattern(pat: Pattern) -> MatcherNetwork:
    return MatcherNetwork(pat)


def match(network: MatcherNetwork, wm: WorkingMemory) -> list[BindingSet]:
    """Complete, duplicate-free bindings in deterministic order (clause
    order, then fact order within each alpha memory)."""
    return network.match(wm)
