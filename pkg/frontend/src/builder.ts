/**
 * Builder view state: a pure reducer over the layout document plus
 * selection and the side-panel editor. Rendering derives entirely from the
 * state; every edit re-validates through the layout model before it lands,
 * and reorder is a first-class action so misplaced elements never force a
 * delete-and-redo spiral.
 */

import {
  LayoutDoc,
  LayoutError,
  LayoutNode,
  NodeKind,
  deleteNode,
  editAttributes,
  emptyLayout,
  findNode,
  freshId,
  insertNode,
  reorderNode,
} from "./layoutModel.js";

export interface BuilderState {
  layout: LayoutDoc;
  tutorId: string | null;
  tutorVersion: number;
  selectedId: string | null;
  dirty: boolean;
  error: string | null;
}

export type BuilderAction =
  | { type: "load"; layout: LayoutDoc; tutorId: string; tutorVersion: number }
  | { type: "select"; id: string | null }
  | { type: "drop-new"; kind: NodeKind; parentId: string; index: number; id?: string; name?: string; text?: string }
  | { type: "delete-selected" }
  | { type: "duplicate-selected" }
  | { type: "reorder"; id: string; parentId: string; index: number }
  | { type: "edit-attributes"; id: string; edits: { id?: string; name?: string; text?: string } }
  | { type: "saved"; tutorVersion: number }
  | { type: "save-failed"; error: string };

export function initialBuilderState(): BuilderState {
  return {
    layout: emptyLayout(),
    tutorId: null,
    tutorVersion: 0,
    selectedId: null,
    dirty: false,
    error: null,
  };
}

export function builderReduce(state: BuilderState, action: BuilderAction): BuilderState {
  try {
    switch (action.type) {
      case "load":
        return {
          layout: action.layout,
          tutorId: action.tutorId,
          tutorVersion: action.tutorVersion,
          selectedId: null,
          dirty: false,
          error: null,
        };
      case "select":
        return { ...state, selectedId: action.id, error: null };
      case "drop-new": {
        const node = newNode(state.layout, action);
        const layout = insertNode(state.layout, action.parentId, action.index, node);
        return { ...state, layout, selectedId: node.id, dirty: true, error: null };
      }
      case "delete-selected": {
        if (state.selectedId === null) return state;
        const layout = deleteNode(state.layout, state.selectedId);
        return { ...state, layout, selectedId: null, dirty: true, error: null };
      }
      case "duplicate-selected": {
        if (state.selectedId === null) return state;
        const source = findNode(state.layout, state.selectedId);
        if (source === null) return state;
        const copy = duplicate(state.layout, source);
        const parent = parentIdOf(state.layout, state.selectedId);
        const siblings = findNode(state.layout, parent)?.children ?? [];
        const index = siblings.findIndex((child) => child.id === state.selectedId) + 1;
        const layout = insertNode(state.layout, parent, index, copy);
        return { ...state, layout, selectedId: copy.id, dirty: true, error: null };
      }
      case "reorder": {
        const layout = reorderNode(state.layout, action.id, action.parentId, action.index);
        return { ...state, layout, dirty: true, error: null };
      }
      case "edit-attributes": {
        const layout = editAttributes(state.layout, action.id, action.edits);
        const selectedId = action.edits.id ?? state.selectedId;
        return { ...state, layout, selectedId, dirty: true, error: null };
      }
      case "saved":
        return { ...state, tutorVersion: action.tutorVersion, dirty: false, error: null };
      case "save-failed":
        return { ...state, error: action.error };
    }
  } catch (err) {
    if (err instanceof LayoutError) {
      return { ...state, error: err.message };
    }
    throw err;
  }
}

function newNode(
  doc: LayoutDoc,
  action: { kind: NodeKind; id?: string; name?: string; text?: string },
): LayoutNode {
  const id = action.id ?? freshId(doc, action.kind);
  switch (action.kind) {
    case "row":
    case "column":
      return { id, kind: action.kind, children: [] };
    case "input":
      return { id, kind: "input", name: action.name ?? id };
    case "label":
      return { id, kind: "label", text: action.text ?? "" };
  }
}

function duplicate(doc: LayoutDoc, source: LayoutNode): LayoutNode {
  const copy = JSON.parse(JSON.stringify(source)) as LayoutNode;
  const ids = new Set<string>();
  const names = new Set<string>();
  const collect = (node: LayoutNode): void => {
    ids.add(node.id);
    if (node.kind === "input" && node.name) names.add(node.name);
    for (const child of node.children ?? []) collect(child);
  };
  collect(doc.root);
  const claim = (taken: Set<string>, base: string): string => {
    let n = 2;
    while (taken.has(`${base}-${n}`)) n += 1;
    const fresh = `${base}-${n}`;
    taken.add(fresh);
    return fresh;
  };
  const rename = (node: LayoutNode): void => {
    node.id = claim(ids, node.id);
    if (node.kind === "input") {
      node.name = claim(names, node.name ?? node.id);
    }
    for (const child of node.children ?? []) rename(child);
  };
  rename(copy);
  return copy;
}

function parentIdOf(doc: LayoutDoc, id: string): string {
  const stack: LayoutNode[] = [doc.root];
  while (stack.length > 0) {
    const node = stack.pop()!;
    for (const child of node.children ?? []) {
      if (child.id === id) return node.id;
      stack.push(child);
    }
  }
  return doc.root.id;
}

/** The component palette: exactly the four element kinds. */
export const PALETTE: readonly NodeKind[] = ["row", "column", "input", "label"];
