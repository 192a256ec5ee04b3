/**
 * Client-side mirror of the layout document: the nested row/column tree of
 * inputs and labels, with the same validation the service applies, so edits
 * fail inline instead of on save.
 */

export type NodeKind = "row" | "column" | "input" | "label";

export interface LayoutNode {
  id: string;
  kind: NodeKind;
  name?: string;
  text?: string;
  children?: LayoutNode[];
}

export interface LayoutDoc {
  format: "layout";
  version: 1;
  revision: number;
  root: LayoutNode;
}

export class LayoutError extends Error {}

export function emptyLayout(): LayoutDoc {
  return {
    format: "layout",
    version: 1,
    revision: 0,
    root: { id: "root", kind: "column", children: [] },
  };
}

export function isContainer(node: LayoutNode): boolean {
  return node.kind === "row" || node.kind === "column";
}

export function cloneDoc(doc: LayoutDoc): LayoutDoc {
  return JSON.parse(JSON.stringify(doc)) as LayoutDoc;
}

export function walk(
  node: LayoutNode,
  parent: LayoutNode | null = null,
  visit?: (node: LayoutNode, parent: LayoutNode | null) => void,
  acc: Array<[LayoutNode, LayoutNode | null]> = [],
): Array<[LayoutNode, LayoutNode | null]> {
  acc.push([node, parent]);
  if (visit) visit(node, parent);
  for (const child of node.children ?? []) {
    walk(child, node, visit, acc);
  }
  return acc;
}

export function findNode(doc: LayoutDoc, id: string): LayoutNode | null {
  for (const [node] of walk(doc.root)) {
    if (node.id === id) return node;
  }
  return null;
}

export function parentOf(doc: LayoutDoc, id: string): LayoutNode | null {
  for (const [node, parent] of walk(doc.root)) {
    if (node.id === id) return parent;
  }
  return null;
}

export function inputNames(doc: LayoutDoc): string[] {
  return walk(doc.root)
    .map(([node]) => node)
    .filter((node) => node.kind === "input")
    .map((node) => node.name ?? "");
}

export function freshId(doc: LayoutDoc, prefix: string): string {
  let n = 1;
  while (findNode(doc, `${prefix}-${n}`) !== null) n += 1;
  return `${prefix}-${n}`;
}

function assertValid(doc: LayoutDoc): void {
  const ids = new Set<string>();
  const names = new Set<string>();
  for (const [node] of walk(doc.root)) {
    if (ids.has(node.id)) throw new LayoutError(`duplicate element id ${node.id}`);
    ids.add(node.id);
    if (!isContainer(node) && (node.children?.length ?? 0) > 0) {
      throw new LayoutError(`${node.kind} ${node.id} cannot have children`);
    }
    if (node.kind === "input") {
      const name = node.name ?? "";
      if (name === "") throw new LayoutError(`input ${node.id} needs a field name`);
      if (names.has(name)) throw new LayoutError(`duplicate field name ${name}`);
      names.add(name);
    }
  }
}

/** Insert a new node under a container; returns a new document. */
export function insertNode(
  doc: LayoutDoc,
  parentId: string,
  index: number,
  node: LayoutNode,
): LayoutDoc {
  const next = cloneDoc(doc);
  const parent = findNode(next, parentId);
  if (parent === null) throw new LayoutError(`no element ${parentId}`);
  if (!isContainer(parent)) throw new LayoutError(`${parent.kind} cannot contain elements`);
  const children = parent.children ?? (parent.children = []);
  if (index < 0 || index > children.length) throw new LayoutError(`index ${index} out of range`);
  children.splice(index, 0, node);
  assertValid(next);
  next.revision += 1;
  return next;
}

export function deleteNode(doc: LayoutDoc, id: string): LayoutDoc {
  if (id === doc.root.id) throw new LayoutError("the root container cannot be deleted");
  const next = cloneDoc(doc);
  const parent = parentOf(next, id);
  if (parent === null) throw new LayoutError(`no element ${id}`);
  parent.children = (parent.children ?? []).filter((child) => child.id !== id);
  next.revision += 1;
  return next;
}

export function reorderNode(
  doc: LayoutDoc,
  id: string,
  newParentId: string,
  newIndex: number,
): LayoutDoc {
  const next = cloneDoc(doc);
  const node = findNode(next, id);
  if (node === null) throw new LayoutError(`no element ${id}`);
  const descendants = new Set(walk(node).map(([n]) => n.id));
  if (descendants.has(newParentId)) {
    throw new LayoutError("an element cannot move into its own subtree");
  }
  const oldParent = parentOf(next, id);
  if (oldParent === null) throw new LayoutError("the root container cannot move");
  oldParent.children = (oldParent.children ?? []).filter((child) => child.id !== id);
  const newParent = findNode(next, newParentId);
  if (newParent === null || !isContainer(newParent)) {
    throw new LayoutError(`cannot place elements under ${newParentId}`);
  }
  const children = newParent.children ?? (newParent.children = []);
  if (newIndex < 0 || newIndex > children.length) {
    throw new LayoutError(`index ${newIndex} out of range`);
  }
  children.splice(newIndex, 0, node);
  assertValid(next);
  next.revision += 1;
  return next;
}

export function editAttributes(
  doc: LayoutDoc,
  id: string,
  edits: { id?: string; name?: string; text?: string },
): LayoutDoc {
  const next = cloneDoc(doc);
  const node = findNode(next, id);
  if (node === null) throw new LayoutError(`no element ${id}`);
  if (edits.name !== undefined) {
    if (node.kind !== "input") throw new LayoutError("only inputs have field names");
    node.name = edits.name;
  }
  if (edits.text !== undefined) {
    if (node.kind !== "label") throw new LayoutError("only labels have text");
    node.text = edits.text;
  }
  if (edits.id !== undefined && edits.id !== node.id) {
    if (node.id === next.root.id) throw new LayoutError("the root id is fixed");
    node.id = edits.id;
  }
  assertValid(next);
  next.revision += 1;
  return next;
}

/** Structural equality: shape, kinds, ordering, names and label text; the
 * revision counter is bookkeeping and does not participate. */
export function structurallyEqual(a: LayoutDoc, b: LayoutDoc): boolean {
  const strip = (node: LayoutNode): unknown => ({
    id: node.id,
    kind: node.kind,
    name: node.name,
    text: node.text,
    children: (node.children ?? []).map(strip),
  });
  return JSON.stringify(strip(a.root)) === JSON.stringify(strip(b.root));
}
