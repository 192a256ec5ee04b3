/**
 * Thin DOM layer: renders the builder and training view models and wires
 * events back into the reducers. All decisions live in builder.ts /
 * training.ts; this file only draws.
 */

import { ApiClient, ApiError } from "./api.js";
import {
  BuilderAction,
  BuilderState,
  PALETTE,
  builderReduce,
} from "./builder.js";
import { LayoutNode, findNode, isContainer } from "./layoutModel.js";
import {
  TrainingState,
  applyExchange,
  confirmDoneMessage,
  demonstrateMessage,
  doneButtonMessage,
  feedbackMessage,
  isControlEnabled,
  labelMessage,
  resetMessage,
  setFieldMessage,
  startProblemMessage,
} from "./training.js";
import { TeacherMessage } from "./protocol.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className = "",
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

// -- builder -------------------------------------------------------------------

export class BuilderView {
  state: BuilderState;

  constructor(
    private readonly host: HTMLElement,
    private readonly api: ApiClient,
    initial: BuilderState,
  ) {
    this.state = initial;
    this.render();
  }

  dispatch(action: BuilderAction): void {
    this.state = builderReduce(this.state, action);
    this.render();
  }

  async save(): Promise<void> {
    if (this.state.tutorId === null) return;
    try {
      const updated = await this.api.updateTutor(
        this.state.tutorId,
        this.state.tutorVersion,
        this.state.layout,
      );
      this.dispatch({ type: "saved", tutorVersion: updated.version });
    } catch (err) {
      const message = err instanceof ApiError ? err.message : String(err);
      this.dispatch({ type: "save-failed", error: message });
    }
  }

  private render(): void {
    this.host.replaceChildren();
    const palette = el("div", "palette");
    palette.append(el("h3", "", "Components"));
    for (const kind of PALETTE) {
      const item = el("button", "palette-item", kind);
      item.draggable = true;
      item.addEventListener("dragstart", (ev) => {
        ev.dataTransfer?.setData("text/palette", kind);
      });
      item.addEventListener("click", () => {
        const parentId = this.dropTarget();
        const index = this.childCount(parentId);
        this.dispatch({ type: "drop-new", kind, parentId, index });
      });
      palette.append(item);
    }

    const pane = el("div", "pane");
    pane.append(this.renderNode(this.state.layout.root));

    const side = el("div", "side-panel");
    side.append(this.renderAttributes());
    const save = el("button", "save", this.state.dirty ? "Save *" : "Save");
    save.addEventListener("click", () => void this.save());
    side.append(save);
    if (this.state.error) side.append(el("div", "error", this.state.error));

    this.host.append(palette, pane, side);
  }

  private dropTarget(): string {
    const selected = this.state.selectedId;
    if (selected) {
      const node = findNode(this.state.layout, selected);
      if (node && isContainer(node)) return node.id;
    }
    return this.state.layout.root.id;
  }

  private childCount(id: string): number {
    return findNode(this.state.layout, id)?.children?.length ?? 0;
  }

  private renderNode(node: LayoutNode): HTMLElement {
    const box = el("div", `element ${node.kind}`);
    box.dataset.id = node.id;
    if (node.id === this.state.selectedId) box.classList.add("selected");
    box.addEventListener("click", (ev) => {
      ev.stopPropagation();
      this.dispatch({ type: "select", id: node.id });
    });
    if (isContainer(node)) {
      box.addEventListener("dragover", (ev) => ev.preventDefault());
      box.addEventListener("drop", (ev) => {
        ev.preventDefault();
        ev.stopPropagation();
        const paletteKind = ev.dataTransfer?.getData("text/palette");
        const movedId = ev.dataTransfer?.getData("text/element");
        const index = node.children?.length ?? 0;
        if (paletteKind) {
          this.dispatch({
            type: "drop-new",
            kind: paletteKind as LayoutNode["kind"],
            parentId: node.id,
            index,
          });
        } else if (movedId) {
          this.dispatch({ type: "reorder", id: movedId, parentId: node.id, index });
        }
      });
      for (const child of node.children ?? []) {
        box.append(this.renderNode(child));
      }
    } else {
      box.draggable = true;
      box.addEventListener("dragstart", (ev) => {
        ev.dataTransfer?.setData("text/element", node.id);
        ev.stopPropagation();
      });
      box.append(
        el("span", "caption", node.kind === "input" ? node.name ?? "" : node.text ?? ""),
      );
    }
    return box;
  }

  private renderAttributes(): HTMLElement {
    const panel = el("div", "attributes");
    panel.append(el("h3", "", "Attributes"));
    const id = this.state.selectedId;
    const node = id ? findNode(this.state.layout, id) : null;
    if (!node) {
      panel.append(el("p", "hint", "Select an element"));
      return panel;
    }
    panel.append(el("p", "kind", node.kind));
    const attach = (labelText: string, value: string, commit: (next: string) => void): void => {
      const label = el("label", "", labelText);
      const input = el("input");
      input.value = value;
      input.addEventListener("change", () => commit(input.value));
      label.append(input);
      panel.append(label);
    };
    attach("id", node.id, (next) =>
      this.dispatch({ type: "edit-attributes", id: node.id, edits: { id: next } }),
    );
    if (node.kind === "input") {
      attach("field name", node.name ?? "", (next) =>
        this.dispatch({ type: "edit-attributes", id: node.id, edits: { name: next } }),
      );
    }
    if (node.kind === "label") {
      attach("text", node.text ?? "", (next) =>
        this.dispatch({ type: "edit-attributes", id: node.id, edits: { text: next } }),
      );
    }
    const remove = el("button", "", "Delete");
    remove.addEventListener("click", () => this.dispatch({ type: "delete-selected" }));
    const duplicate = el("button", "", "Duplicate");
    duplicate.addEventListener("click", () => this.dispatch({ type: "duplicate-selected" }));
    panel.append(remove, duplicate);
    return panel;
  }
}

// -- training -------------------------------------------------------------------

export class TrainingView {
  state: TrainingState;

  constructor(
    private readonly host: HTMLElement,
    private readonly api: ApiClient,
    private readonly layoutRoot: LayoutNode,
    initial: TrainingState,
  ) {
    this.state = initial;
    this.render();
    document.addEventListener("keydown", (ev) => {
      // delete/duplicate shortcuts requested by study participants live in
      // the builder; here Escape resets when legal
      if (ev.key === "Escape" && isControlEnabled(this.state, "reset")) {
        void this.send(resetMessage(this.state));
      }
    });
  }

  async send(message: TeacherMessage): Promise<void> {
    if (this.state.sessionId === null) return;
    try {
      const response = await this.api.postMessage(this.state.sessionId, message);
      this.state = applyExchange(this.state, message, response);
    } catch (err) {
      const detail =
        err instanceof ApiError && err.expected.length > 0
          ? `${err.message} (expected: ${err.expected.join(", ")})`
          : String(err);
      this.state = { ...this.state, error: detail };
    }
    this.render();
  }

  private render(): void {
    this.host.replaceChildren();
    const tutor = el("div", "tutor");
    tutor.append(this.renderNode(this.layoutRoot));
    const controls = el("div", "controls");
    const start = el("button", "", "Start Problem");
    start.disabled = !isControlEnabled(this.state, "start-problem");
    start.addEventListener("click", () => void this.send(startProblemMessage(this.state)));
    const done = el("button", "", "Done");
    done.disabled = !isControlEnabled(this.state, "done-button");
    done.addEventListener("click", () => void this.send(doneButtonMessage(this.state)));
    const reset = el("button", "", "Reset");
    reset.disabled = !isControlEnabled(this.state, "reset");
    reset.addEventListener("click", () => void this.send(resetMessage(this.state)));
    controls.append(start, done, reset);
    this.host.append(tutor, controls, this.renderDialog(), this.renderTranscript());
    if (this.state.error) this.host.append(el("div", "error", this.state.error));
  }

  private renderNode(node: LayoutNode): HTMLElement {
    if (node.kind === "label") {
      return el("span", "tutor-label", node.text ?? "");
    }
    if (node.kind === "input") {
      const wrap = el("span", "tutor-field");
      const input = el("input");
      input.value = this.state.fields[node.name ?? ""] ?? "";
      const editableSetup = isControlEnabled(this.state, "field-inputs");
      const editableDemo =
        isControlEnabled(this.state, "demonstrate-inputs") && input.value === "";
      input.disabled = !(editableSetup || editableDemo);
      if (this.state.highlights.includes(node.name ?? "")) wrap.classList.add("highlight");
      input.addEventListener("change", () => {
        const message = editableSetup
          ? setFieldMessage(this.state, node.name ?? "", input.value)
          : demonstrateMessage(this.state, node.name ?? "", input.value);
        void this.send(message);
      });
      wrap.append(input);
      return wrap;
    }
    const box = el("div", `tutor-${node.kind}`);
    for (const child of node.children ?? []) box.append(this.renderNode(child));
    return box;
  }

  private renderDialog(): HTMLElement {
    const dialog = el("div", `dialog frame-${this.state.frame}`);
    const message = this.state.dialog;
    if (!message) return dialog;
    switch (message.kind) {
      case "request-demonstration":
        dialog.append(
          el("p", "", message.field
            ? `Please demonstrate the next step by filling ${message.field}.`
            : "Please demonstrate the next step (or click Done)."),
        );
        break;
      case "request-label": {
        dialog.append(el("p", "", "What should this step be called?"));
        const input = el("input");
        input.value = this.state.labelDraft;
        const confirm = el("button", "", "OK");
        confirm.disabled = !isControlEnabled(this.state, "label-dialog");
        confirm.addEventListener("click", () =>
          void this.send(labelMessage(this.state, input.value)),
        );
        dialog.append(input, confirm);
        break;
      }
      case "attempted-action": {
        dialog.append(el("p", "", `Did I take the correct action? ${message.explanation ?? ""}`));
        const yes = el("button", "", "Yes");
        const no = el("button", "", "No");
        yes.disabled = no.disabled = !isControlEnabled(this.state, "feedback-yes-no");
        yes.addEventListener("click", () => void this.send(feedbackMessage(this.state, "yes")));
        no.addEventListener("click", () => void this.send(feedbackMessage(this.state, "no")));
        dialog.append(yes, no);
        break;
      }
      case "done-query": {
        dialog.append(el("p", "", "Is the problem correctly completed?"));
        const yes = el("button", "", "Yes");
        const no = el("button", "", "No");
        yes.disabled = no.disabled = !isControlEnabled(this.state, "confirm-done-yes-no");
        yes.addEventListener("click", () => void this.send(confirmDoneMessage(this.state, "yes")));
        no.addEventListener("click", () => void this.send(confirmDoneMessage(this.state, "no")));
        dialog.append(yes, no);
        break;
      }
      case "problem-reset":
        dialog.append(el("p", "", "The interface was reset; set up the next problem."));
        break;
    }
    return dialog;
  }

  private renderTranscript(): HTMLElement {
    const log = el("div", "transcript");
    for (const line of this.state.transcript.slice(-8)) {
      log.append(el("div", `line ${line.actor}`, `${line.actor}: ${line.summary}`));
    }
    return log;
  }
}
