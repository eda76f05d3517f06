// View state: the binding draft a form edits, and its projection into the
// wire format. Kept free of DOM so it is unit-testable; the server remains
// the validation authority, drafts only carry what the form collected.

import type { Action, Binding, GuardAtom, ToolDescriptor, Trigger } from "./types.js";

export interface DraftGuardAtom {
  field: string;
  op: "=" | "!=" | "<" | ">";
  value: string; // as typed; coerced on build
}

export interface BindingDraft {
  bindingId: string;
  sourceKind: "tool_event" | "phase_entered";
  sourceSlot: string;
  sourceEvent: string;
  sourcePhase: string;
  guardAtoms: DraftGuardAtom[];
  actionKind: "invoke_command" | "transition_phase";
  targetSlot: string;
  targetCommand: string;
  argMap: Record<string, string>; // param -> source expression, as typed
  targetPhase: string;
}

export function emptyDraft(): BindingDraft {
  return {
    bindingId: "",
    sourceKind: "tool_event",
    sourceSlot: "",
    sourceEvent: "",
    sourcePhase: "",
    guardAtoms: [],
    actionKind: "invoke_command",
    targetSlot: "",
    targetCommand: "",
    argMap: {},
    targetPhase: "",
  };
}

/** Literal coercion for guard values: numbers and booleans stay typed. */
export function coerceLiteral(text: string): unknown {
  const trimmed = text.trim();
  if (trimmed === "true") return true;
  if (trimmed === "false") return false;
  if (/^-?\d+$/.test(trimmed)) return parseInt(trimmed, 10);
  return text;
}

export function buildBinding(draft: BindingDraft): Binding {
  const source: Trigger =
    draft.sourceKind === "tool_event"
      ? { kind: "tool_event", slot_id: draft.sourceSlot, event_name: draft.sourceEvent }
      : { kind: "phase_entered", phase: draft.sourcePhase };

  const atoms: GuardAtom[] = draft.guardAtoms
    .filter((a) => a.field !== "")
    .map((a) => ({ field: a.field, op: a.op, value: coerceLiteral(a.value) }));

  const action: Action =
    draft.actionKind === "invoke_command"
      ? {
          kind: "invoke_command",
          slot_id: draft.targetSlot,
          command_name: draft.targetCommand,
          args: Object.fromEntries(
            Object.entries(draft.argMap).map(([name, expr]) => [
              name,
              expr.startsWith("$") || expr.startsWith("payload.") ? expr : coerceLiteral(expr),
            ]),
          ),
        }
      : { kind: "transition_phase", target_phase: draft.targetPhase };

  return {
    binding_id: draft.bindingId,
    source,
    guard: atoms.length > 0 ? { atoms } : null,
    actions: [action],
  };
}

/** The fields the form must fill before a POST is worth attempting. */
export function draftProblems(draft: BindingDraft): string[] {
  const problems: string[] = [];
  if (draft.bindingId.trim() === "") problems.push("binding id is required");
  if (draft.sourceKind === "tool_event") {
    if (!draft.sourceSlot) problems.push("source slot is required");
    if (!draft.sourceEvent) problems.push("source event is required");
  } else if (!draft.sourcePhase) {
    problems.push("source phase is required");
  }
  if (draft.actionKind === "invoke_command") {
    if (!draft.targetSlot) problems.push("target slot is required");
    if (!draft.targetCommand) problems.push("target command is required");
  } else if (!draft.targetPhase) {
    problems.push("target phase is required");
  }
  return problems;
}

/** Prefill the arg map with one empty expression per declared parameter. */
export function argTemplate(descriptor: ToolDescriptor, commandName: string): Record<string, string> {
  const command = descriptor.commands.find((c) => c.name === commandName);
  if (!command) return {};
  return Object.fromEntries(command.params.map((p) => [p.name, ""]));
}
