"""Tutor interface model: nested rows/columns of inputs and labels.

Only structure feeds the agent — styling is out of scope. Rows and columns
nest arbitrarily; inputs and labels are leaves. The containment edges become
the contained-in attributes of working-memory facts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

from .errors import NameConflictError, NotFoundError, StructuralError

ROOT_ID = "root"

CONTAINER_KINDS = ("row", "column")
LEAF_KINDS = ("input", "label")

LAYOUT_FORMAT_VERSION = 1


@dataclass
class LayoutNode:
    id: str
    kind: str  # row | column | input | label
    children: list = field(default_factory=list)
    text: Optional[str] = None  # labels only
    name: Optional[str] = None  # inputs only

    @property
    def is_container(self) -> bool:
        return self.kind in CONTAINER_KINDS

    def copy(self) -> "LayoutNode":
        return LayoutNode(
            id=self.id,
            kind=self.kind,
            children=[c.copy() for c in self.children],
            text=self.text,
            name=self.name,
        )


def row(node_id: str, *children: LayoutNode) -> LayoutNode:
    return LayoutNode(id=node_id, kind="row", children=list(children))


def column(node_id: str, *children: LayoutNode) -> LayoutNode:
    return LayoutNode(id=node_id, kind="column", children=list(children))


def input_field(name: str, node_id: Optional[str] = None) -> LayoutNode:
    return LayoutNode(id=node_id or name, kind="input", name=name)


def label(node_id: str, text: str) -> LayoutNode:
    return LayoutNode(id=node_id, kind="label", text=text)


class LayoutTree:
    """Tree of interface elements with an implicit root container."""

    def __init__(self, root: Optional[LayoutNode] = None, version: int = 0):
        self.root = root if root is not None else column(ROOT_ID)
        self.version = version
        self._validate()

    # -- traversal -----------------------------------------------------

    def walk(self) -> Iterator[tuple[LayoutNode, Optional[LayoutNode]]]:
        """Pre-order (node, parent) pairs, root first."""

        def rec(node, parent):
            yield node, parent
            for child in node.children:
                yield from rec(child, node)

        yield from rec(self.root, None)

    def find(self, node_id: str) -> LayoutNode:
        for node, _ in self.walk():
            if node.id == node_id:
                return node
        raise NotFoundError(f"no layout node {node_id!r}")

    def parent_of(self, node_id: str) -> LayoutNode:
        for node, parent in self.walk():
            if node.id == node_id:
                if parent is None:
                    raise StructuralError("root has no parent")
                return parent
        raise NotFoundError(f"no layout node {node_id!r}")

    def input_names(self) -> list[str]:
        return [n.name for n, _ in self.walk() if n.kind == "input"]

    def field_slots(self) -> list[tuple[str, Optional[str], str]]:
        """Pre-order (fact-name, label-text-or-None, container-id) triples:
        one per input (text None) and one per label (text set)."""
        slots = []
        for node, parent in self.walk():
            container = parent.id if parent is not None else ROOT_ID
            if node.kind == "input":
                slots.append((node.name, None, container))
            elif node.kind == "label":
                slots.append((node.id, node.text or "", container))
        return slots

    def _validate(self) -> None:
        seen_ids = set()
        seen_names = set()
        for node, _ in self.walk():
            if node.id in seen_ids:
                raise StructuralError(f"duplicate node id {node.id!r}")
            seen_ids.add(node.id)
            if node.kind not in CONTAINER_KINDS + LEAF_KINDS:
                raise StructuralError(f"unknown node kind {node.kind!r}")
            if node.kind in LEAF_KINDS and node.children:
                raise StructuralError(f"{node.kind} {node.id!r} cannot have children")
            if node.kind == "input":
                if not node.name:
                    raise StructuralError(f"input {node.id!r} has no field name")
                if node.name in seen_names:
                    raise NameConflictError(f"duplicate field name {node.name!r}")
                seen_names.add(node.name)
        if not self.root.is_container:
            raise StructuralError("root must be a row or column")

    def copy(self) -> "LayoutTree":
        return LayoutTree(self.root.copy(), version=self.version)


# -- editing operations ------------------------------------------------


def insert(tree: LayoutTree, parent_id: str, index: int, node: LayoutNode) -> LayoutTree:
    parent = tree.find(parent_id)
    if not parent.is_container:
        raise StructuralError(f"{parent.kind} {parent_id!r} cannot contain children")
    if index < 0 or index > len(parent.children):
        raise StructuralError(f"index {index} out of range for {parent_id!r}")
    for existing, _ in tree.walk():
        if existing.id == node.id:
            raise StructuralError(f"node id {node.id!r} already present")
        if node.kind == "input" and existing.kind == "input" and existing.name == node.name:
            raise NameConflictError(f"duplicate field name {node.name!r}")
    parent.children.insert(index, node)
    tree.version += 1
    tree._validate()
    return tree


def delete(tree: LayoutTree, node_id: str) -> LayoutTree:
    if node_id == tree.root.id:
        raise StructuralError("cannot delete the root container")
    parent = tree.parent_of(node_id)
    parent.children = [c for c in parent.children if c.id != node_id]
    tree.version += 1
    return tree


def reorder(tree: LayoutTree, node_id: str, new_parent_id: str, new_index: int) -> LayoutTree:
    """Relocate a node; moving a container into its own subtree is refused."""
    node = tree.find(node_id)
    if node_id == tree.root.id:
        raise StructuralError("cannot move the root container")
    descendant_ids = {n.id for n, _ in _walk_subtree(node)}
    if new_parent_id in descendant_ids:
        raise StructuralError("cannot move a node into its own subtree")
    new_parent = tree.find(new_parent_id)
    if not new_parent.is_container:
        raise StructuralError(f"{new_parent.kind} {new_parent_id!r} cannot contain children")
    old_parent = tree.parent_of(node_id)
    position = old_parent.children.index(node)
    old_parent.children.pop(position)
    if new_parent is old_parent and new_index > position:
        # index computed against the list before removal
        pass
    if new_index < 0 or new_index > len(new_parent.children):
        old_parent.children.insert(position, node)
        raise StructuralError(f"index {new_index} out of range for {new_parent_id!r}")
    new_parent.children.insert(new_index, node)
    tree.version += 1
    tree._validate()
    return tree


def _walk_subtree(node: LayoutNode):
    yield node, None
    for child in node.children:
        yield from _walk_subtree(child)


def containment_relations(tree: LayoutTree) -> list[tuple[str, str]]:
    """One (child-id, parent-id) pair per edge, deterministic pre-order."""
    return [(node.id, parent.id) for node, parent in tree.walk() if parent is not None]


# -- serialization -----------------------------------------------------


def node_to_doc(node: LayoutNode) -> dict:
    doc: dict = {"id": node.id, "kind": node.kind}
    if node.kind == "input":
        doc["name"] = node.name
    elif node.kind == "label":
        doc["text"] = node.text or ""
    else:
        doc["children"] = [node_to_doc(c) for c in node.children]
    return doc


def node_from_doc(doc: dict) -> LayoutNode:
    kind = doc["kind"]
    if kind == "input":
        return LayoutNode(id=doc["id"], kind="input", name=doc["name"])
    if kind == "label":
        return LayoutNode(id=doc["id"], kind="label", text=doc.get("text", ""))
    children = [node_from_doc(c) for c in doc.get("children", [])]
    return LayoutNode(id=doc["id"], kind=kind, children=children)


def to_doc(tree: LayoutTree) -> dict:
    return {
        "format": "layout",
        "version": LAYOUT_FORMAT_VERSION,
        "revision": tree.version,
        "root": node_to_doc(tree.root),
    }


def from_doc(doc: dict) -> LayoutTree:
    if doc.get("format") != "layout" or doc.get("version") != LAYOUT_FORMAT_VERSION:
        raise StructuralError("not a supported layout document")
    return LayoutTree(node_from_doc(doc["root"]), version=doc.get("revision", 0))
