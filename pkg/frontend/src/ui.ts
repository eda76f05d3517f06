// DOM rendering helpers. Everything here is write-only projection of
// state; no server communication happens in this module.

import type { ActivitySnapshot, Binding, ToolDescriptor, TraceEntry, Violation } from "./types.js";

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  node.append(...children);
  return node;
}

export function clear(node: HTMLElement): void {
  while (node.firstChild) {
    node.removeChild(node.firstChild);
  }
}

/** Tool browser: the filtered integration surface only, never raw ops. */
export function renderDescriptor(target: HTMLElement, descriptor: ToolDescriptor): void {
  clear(target);
  target.append(
    el("h3", {}, `${descriptor.tool_id} ${descriptor.version} (${descriptor.activity_kind})`),
    el("p", { class: "hash" }, `artifact ${descriptor.artifact_hash.slice(0, 12)}…`),
    el("h4", {}, "commands"),
    el(
      "ul",
      { class: "commands" },
      ...descriptor.commands.map((c) =>
        el("li", {}, `${c.name}(${c.params.map((p) => `${p.name}: ${p.type}`).join(", ")}) → ${c.returns}`),
      ),
    ),
    el("h4", {}, "events"),
    el(
      "ul",
      { class: "events" },
      ...descriptor.events.map((e) =>
        el(
          "li",
          {},
          `${e.name}{${Object.entries(e.payload_schema)
            .map(([f, t]) => `${f}: ${t}`)
            .join(", ")}}`,
        ),
      ),
    ),
    el("p", {}, `roles: ${descriptor.roles.join(", ")}`),
  );
}

export function renderError(target: HTMLElement, message: string): void {
  clear(target);
  target.append(el("p", { class: "error-banner" }, message));
}

export function renderViolations(target: HTMLElement, violations: Violation[], fallback = ""): void {
  clear(target);
  if (violations.length === 0 && fallback === "") {
    return;
  }
  const items = violations.map((v) => el("li", {}, `${v.rule} at ${v.path}${v.detail ? `: ${v.detail}` : ""}`));
  target.append(
    el("div", { class: "violations" }, fallback ? el("p", {}, fallback) : "", el("ul", {}, ...items)),
  );
}

export function renderBindings(
  target: HTMLElement,
  bindings: Binding[],
  onDelete: (bindingId: string) => void,
): void {
  clear(target);
  for (const binding of bindings) {
    const source =
      binding.source.kind === "tool_event"
        ? `${binding.source.slot_id}/${binding.source.event_name}`
        : `phase ${binding.source.phase}`;
    const actions = binding.actions
      .map((a) => (a.kind === "invoke_command" ? `${a.slot_id}.${a.command_name}` : `→ ${a.target_phase}`))
      .join(", ");
    const remove = el("button", { class: "delete", type: "button" }, "remove");
    remove.addEventListener("click", () => onDelete(binding.binding_id));
    target.append(el("li", {}, `${binding.binding_id}: ${source} ⇒ ${actions} `, remove));
  }
}

export function renderPhase(target: HTMLElement, snapshot: ActivitySnapshot): void {
  target.textContent = `phase: ${snapshot.phase} (seq ${snapshot.seq})`;
}

export function describeEntry(entry: TraceEntry): string {
  const data = entry.data;
  switch (entry.kind) {
    case "EventReceived": {
      const event = data["event"] as { slot_id: string; event_name: string };
      return `event ${event.slot_id}/${event.event_name}`;
    }
    case "PhaseChanged":
      return `phase ${data["from"]} → ${data["to"]}`;
    case "CommandDispatched": {
      const command = data["command"] as { slot_id: string; command_name: string };
      return `dispatch ${command.slot_id}.${command.command_name}`;
    }
    case "CommandCompleted":
      return `completion ${data["status"]}`;
    case "GuardEvaluated":
      return `guard ${data["binding_id"]}: ${data["passed"] ? "pass" : "skip"}`;
    case "ParticipantJoined":
      return `joined ${data["user_id"]} as ${data["role"]}`;
    case "BindingAdded":
      return `binding added: ${(data["binding"] as { binding_id: string }).binding_id}`;
    case "BindingRemoved":
      return `binding removed: ${data["binding_id"]}`;
    default:
      return `${entry.kind}`;
  }
}

export function appendTraceEntry(target: HTMLElement, entry: TraceEntry): void {
  target.append(
    el("li", { class: `entry kind-${entry.kind}` }, `[${entry.idx}] seq ${entry.seq} ${entry.kind}: ${describeEntry(entry)}`),
  );
  target.scrollTop = target.scrollHeight;
}
