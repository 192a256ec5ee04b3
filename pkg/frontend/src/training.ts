/**
 * Training view state: the tutor's field values, the current agent dialog,
 * highlighted source fields, and which controls are live. A pure function
 * of the last server response — the view constructs only messages the
 * current phase allows, mirroring the server's own legality table.
 */

import {
  AgentMessage,
  ControlId,
  DialogFrame,
  Phase,
  TeacherMessage,
  ValueDoc,
  dialogFrame,
  enabledControls,
  parseValue,
} from "./protocol.js";

export interface TranscriptLine {
  actor: "teacher" | "agent";
  summary: string;
}

export interface TrainingState {
  sessionId: string | null;
  phase: Phase;
  fields: Record<string, string>;
  dialog: AgentMessage | null;
  frame: DialogFrame;
  highlights: string[];
  labelDraft: string;
  transcript: TranscriptLine[];
  error: string | null;
}

export function initialTrainingState(): TrainingState {
  return {
    sessionId: null,
    phase: "setup",
    fields: {},
    dialog: null,
    frame: "none",
    highlights: [],
    labelDraft: "",
    transcript: [],
    error: null,
  };
}

export function controlsFor(state: TrainingState): ControlId[] {
  return enabledControls(state.phase);
}

export function isControlEnabled(state: TrainingState, control: ControlId): boolean {
  return controlsFor(state).includes(control);
}

/** Fold one (sent message, server response) exchange into the view. */
export function applyExchange(
  state: TrainingState,
  sent: TeacherMessage,
  response: { agent: AgentMessage | null; phase: Phase },
): TrainingState {
  let fields = state.fields;
  if (sent.kind === "set-field" && sent.field) {
    fields = { ...fields, [sent.field]: sent.value?.v ?? "" };
  }
  if (sent.kind === "demonstrate" && sent.field) {
    fields = { ...fields, [sent.field]: sent.value?.v ?? "" };
  }
  if (sent.kind === "feedback" && sent.verdict === "yes" && state.dialog?.field) {
    fields = { ...fields, [state.dialog.field]: state.dialog.value?.v ?? "" };
  }
  const agent = response.agent;
  if (agent?.kind === "problem-reset") {
    fields = {};
  }
  const transcript = [
    ...state.transcript,
    { actor: "teacher" as const, summary: describeTeacher(sent) },
    ...(agent ? [{ actor: "agent" as const, summary: describeAgent(agent) }] : []),
  ];
  return {
    ...state,
    phase: response.phase,
    fields,
    dialog: agent ?? state.dialog,
    frame: agent ? dialogFrame(agent) : state.frame,
    highlights: agent?.kind === "attempted-action" ? agent.highlights ?? [] : [],
    labelDraft: agent?.kind === "request-label" ? agent.default_label ?? "" : "",
    transcript,
    error: null,
  };
}

// -- message construction (gated by the protocol table) ----------------------

export class IllegalControlError extends Error {}

function requireEnabled(state: TrainingState, control: ControlId): void {
  if (!isControlEnabled(state, control)) {
    throw new IllegalControlError(
      `${control} is not available while the session is ${state.phase}`,
    );
  }
}

export function setFieldMessage(state: TrainingState, field: string, raw: string): TeacherMessage {
  requireEnabled(state, "field-inputs");
  return { kind: "set-field", field, value: parseValue(raw) };
}

export function startProblemMessage(state: TrainingState): TeacherMessage {
  requireEnabled(state, "start-problem");
  return { kind: "start-problem" };
}

export function demonstrateMessage(state: TrainingState, field: string, raw: string): TeacherMessage {
  requireEnabled(state, "demonstrate-inputs");
  return { kind: "demonstrate", field, value: parseValue(raw) };
}

export function labelMessage(state: TrainingState, text: string): TeacherMessage {
  requireEnabled(state, "label-dialog");
  return { kind: "label", text };
}

export function feedbackMessage(state: TrainingState, verdict: "yes" | "no"): TeacherMessage {
  requireEnabled(state, "feedback-yes-no");
  return { kind: "feedback", verdict };
}

export function confirmDoneMessage(state: TrainingState, verdict: "yes" | "no"): TeacherMessage {
  requireEnabled(state, "confirm-done-yes-no");
  return { kind: "confirm-done", verdict };
}

export function doneButtonMessage(state: TrainingState): TeacherMessage {
  requireEnabled(state, "done-button");
  return { kind: "done-button" };
}

export function resetMessage(state: TrainingState): TeacherMessage {
  requireEnabled(state, "reset");
  return { kind: "reset" };
}

// -- rendering helpers ---------------------------------------------------------

function renderDocValue(value: ValueDoc | undefined): string {
  return value?.v ?? "";
}

export function describeTeacher(msg: TeacherMessage): string {
  switch (msg.kind) {
    case "set-field":
      return `set ${msg.field} = ${renderDocValue(msg.value)}`;
    case "start-problem":
      return "started the problem";
    case "demonstrate":
      return `demonstrated ${msg.field} = ${renderDocValue(msg.value)}`;
    case "label":
      return msg.text ? `labelled the step "${msg.text}"` : "accepted the default label";
    case "feedback":
      return msg.verdict === "yes" ? "confirmed the action" : "rejected the action";
    case "confirm-done":
      return msg.verdict === "yes" ? "confirmed the problem is complete" : "said it is not complete";
    case "done-button":
      return "clicked Done";
    case "reset":
      return "reset the problem";
  }
}

export function describeAgent(msg: AgentMessage): string {
  switch (msg.kind) {
    case "request-demonstration":
      return msg.field
        ? `asked for a demonstration of ${msg.field}`
        : "asked for a demonstration of the next step";
    case "request-label":
      return `asked for a label (default: ${msg.default_label ?? ""})`;
    case "attempted-action":
      return `entered ${renderDocValue(msg.value)} into ${msg.field} — ${msg.explanation ?? ""}`;
    case "done-query":
      return "asked whether the problem is correctly completed";
    case "problem-reset":
      return "reset the interface";
  }
}
