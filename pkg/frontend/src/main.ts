// Page wiring: instance picking, tool browsing, binding editing, live
// monitoring. The server is the single source of truth; nothing here is
// rendered optimistically.

import { ApiError, ConsoleApi } from "./api.js";
import { LiveMonitor } from "./monitor.js";
import { argTemplate, buildBinding, draftProblems, emptyDraft } from "./state.js";
import type { BindingDraft } from "./state.js";
import type { ToolDescriptor } from "./types.js";
import {
  appendTraceEntry,
  clear,
  el,
  renderBindings,
  renderDescriptor,
  renderError,
  renderPhase,
  renderViolations,
} from "./ui.js";

const api = new ConsoleApi("");
let instanceId: string | null = null;
let monitor: LiveMonitor | null = null;
let draft: BindingDraft = emptyDraft();
let lastDescriptor: ToolDescriptor | null = null;

function byId(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
}

async function refreshInstances(): Promise<void> {
  const select = byId("instance-select") as HTMLSelectElement;
  const { instances } = await api.listInstances();
  clear(select);
  for (const item of instances) {
    select.append(el("option", { value: item.instance_id }, `${item.definition_id} — ${item.instance_id.slice(0, 8)}`));
  }
  if (instances.length > 0 && instanceId === null) {
    await selectInstance(instances[0].instance_id);
  }
}

async function refreshSnapshot(): Promise<void> {
  if (!instanceId) return;
  const snapshot = await api.snapshot(instanceId);
  renderPhase(byId("phase"), snapshot);
  renderBindings(byId("binding-list") as HTMLElement, snapshot.bindings, (bindingId) => {
    void api.removeBinding(instanceId!, bindingId).then(refreshSnapshot);
  });
}

async function selectInstance(id: string): Promise<void> {
  instanceId = id;
  monitor?.stop();
  clear(byId("trace"));
  monitor = new LiveMonitor();
  monitor.onEntry((entry) => {
    appendTraceEntry(byId("trace"), entry);
    void refreshSnapshot();
  });
  void monitor.run((fromIdx) => api.streamUrl(id, fromIdx));
  await refreshSnapshot();
}

async function browseTool(): Promise<void> {
  const url = (byId("tool-url") as HTMLInputElement).value.trim();
  const panel = byId("tool-panel");
  if (!url) return;
  try {
    lastDescriptor = await api.describeTool(url);
    renderDescriptor(panel, lastDescriptor);
  } catch (error) {
    lastDescriptor = null;
    const message =
      error instanceof ApiError ? `${error.kind}: ${error.message}` : `unreachable: ${String(error)}`;
    renderError(panel, message);
  }
}

function readDraft(): void {
  draft = {
    ...draft,
    bindingId: (byId("draft-id") as HTMLInputElement).value,
    sourceKind: (byId("draft-source-kind") as HTMLSelectElement).value as BindingDraft["sourceKind"],
    sourceSlot: (byId("draft-source-slot") as HTMLInputElement).value,
    sourceEvent: (byId("draft-source-event") as HTMLInputElement).value,
    sourcePhase: (byId("draft-source-phase") as HTMLInputElement).value,
    actionKind: (byId("draft-action-kind") as HTMLSelectElement).value as BindingDraft["actionKind"],
    targetSlot: (byId("draft-target-slot") as HTMLInputElement).value,
    targetCommand: (byId("draft-target-command") as HTMLInputElement).value,
    targetPhase: (byId("draft-target-phase") as HTMLInputElement).value,
  };
  const argsText = (byId("draft-args") as HTMLTextAreaElement).value.trim();
  draft.argMap = {};
  if (argsText) {
    for (const line of argsText.split("\n")) {
      const eq = line.indexOf("=");
      if (eq > 0) {
        draft.argMap[line.slice(0, eq).trim()] = line.slice(eq + 1).trim();
      }
    }
  }
}

function prefillArgs(): void {
  if (!lastDescriptor) return;
  readDraft();
  const template = argTemplate(lastDescriptor, draft.targetCommand);
  (byId("draft-args") as HTMLTextAreaElement).value = Object.keys(template)
    .map((name) => `${name}=`)
    .join("\n");
}

async function submitDraft(): Promise<void> {
  if (!instanceId) return;
  readDraft();
  const inline = byId("draft-violations");
  const problems = draftProblems(draft);
  if (problems.length > 0) {
    renderViolations(inline, problems.map((p) => ({ rule: "incomplete", path: "draft", detail: p })));
    return;
  }
  try {
    await api.addBinding(instanceId, buildBinding(draft));
    renderViolations(inline, []);
    await refreshSnapshot();
  } catch (error) {
    if (error instanceof ApiError) {
      renderViolations(inline, error.violations, `${error.kind}: ${error.message}`);
    } else {
      renderViolations(inline, [], String(error));
    }
  }
}

function wire(): void {
  byId("browse").addEventListener("click", () => void browseTool());
  byId("draft-submit").addEventListener("click", () => void submitDraft());
  byId("draft-prefill").addEventListener("click", prefillArgs);
  (byId("instance-select") as HTMLSelectElement).addEventListener("change", (event) => {
    void selectInstance((event.target as HTMLSelectElement).value);
  });
  byId("refresh-instances").addEventListener("click", () => void refreshInstances());
  void refreshInstances();
}

document.addEventListener("DOMContentLoaded", wire);
