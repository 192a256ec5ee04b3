/**
 * Wire protocol shared with the service: teacher/agent message documents,
 * session phases, and the phase -> legal-message table.
 *
 * The table is the single source of truth for which controls the training
 * view enables; the server enforces the same rules, so an out-of-sync UI
 * fails visibly in tests rather than at the user.
 */

export type Phase =
  | "setup"
  | "awaiting-demo"
  | "awaiting-label"
  | "awaiting-feedback"
  | "awaiting-done-confirm"
  | "problem-complete";

export type TeacherKind =
  | "set-field"
  | "start-problem"
  | "demonstrate"
  | "label"
  | "feedback"
  | "confirm-done"
  | "done-button"
  | "reset";

export type AgentKind =
  | "request-demonstration"
  | "request-label"
  | "attempted-action"
  | "done-query"
  | "problem-reset";

export interface ValueDoc {
  t: "number" | "text" | "symbol" | "empty" | "id";
  v: string;
}

export interface TeacherMessage {
  kind: TeacherKind;
  field?: string;
  value?: ValueDoc;
  text?: string;
  verdict?: "yes" | "no";
}

export interface AgentMessage {
  kind: AgentKind;
  field?: string | null;
  value?: ValueDoc;
  explanation?: string;
  highlights?: string[];
  default_label?: string;
}

export const LEGAL_MESSAGES: Record<Phase, readonly TeacherKind[]> = {
  "setup": ["set-field", "start-problem", "reset"],
  "awaiting-demo": ["demonstrate", "done-button", "reset"],
  "awaiting-label": ["label", "reset"],
  "awaiting-feedback": ["feedback", "done-button", "reset"],
  "awaiting-done-confirm": ["confirm-done", "reset"],
  "problem-complete": ["set-field", "start-problem", "reset"],
};

export const ALL_PHASES = Object.keys(LEGAL_MESSAGES) as Phase[];

/** Every interactive control in the training view, keyed by the single
 * teacher message kind it emits. */
export type ControlId =
  | "field-inputs"      // typing initial values (set-field)
  | "start-problem"
  | "demonstrate-inputs" // filling an empty field as a demonstration
  | "label-dialog"
  | "feedback-yes-no"
  | "confirm-done-yes-no"
  | "done-button"
  | "reset";

export const CONTROL_MESSAGE: Record<ControlId, TeacherKind> = {
  "field-inputs": "set-field",
  "start-problem": "start-problem",
  "demonstrate-inputs": "demonstrate",
  "label-dialog": "label",
  "feedback-yes-no": "feedback",
  "confirm-done-yes-no": "confirm-done",
  "done-button": "done-button",
  "reset": "reset",
};

export const ALL_CONTROLS = Object.keys(CONTROL_MESSAGE) as ControlId[];

/** Exactly the controls whose message is legal in the phase. */
export function enabledControls(phase: Phase): ControlId[] {
  const legal = LEGAL_MESSAGES[phase];
  return ALL_CONTROLS.filter((control) => legal.includes(CONTROL_MESSAGE[control]));
}

/** The interactive dialog frame a given agent message renders as:
 * A = demonstration request, B = label request, C = correctness feedback,
 * D = done confirmation. */
export type DialogFrame = "A" | "B" | "C" | "D" | "reset" | "none";

export function dialogFrame(message: AgentMessage | null): DialogFrame {
  if (message === null) return "none";
  switch (message.kind) {
    case "request-demonstration":
      return "A";
    case "request-label":
      return "B";
    case "attempted-action":
      return "C";
    case "done-query":
      return "D";
    case "problem-reset":
      return "reset";
  }
}

export function parseValue(raw: string): ValueDoc {
  const trimmed = raw.trim();
  if (trimmed === "") return { t: "empty", v: "" };
  if (/^-?\d+$/.test(trimmed) || /^-?\d+\/\d+$/.test(trimmed)) {
    return { t: "number", v: trimmed };
  }
  if (["+", "-", "x", "*", "/", "=", "×", "÷"].includes(trimmed)) {
    return { t: "symbol", v: trimmed };
  }
  return { t: "text", v: trimmed };
}

export function renderValue(doc: ValueDoc | undefined): string {
  if (!doc || doc.t === "empty") return "";
  return doc.v;
}
