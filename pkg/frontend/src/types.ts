// Mirrors of the server's canonical JSON types (snake_case field names are
// the wire format, so they are kept verbatim).

export type SemanticType = "string" | "integer" | "boolean" | "user-ref" | "role-ref" | "json";

export interface OperationSignature {
  name: string;
  params: { name: string; type: SemanticType }[];
  returns: SemanticType | "void";
}

export interface EventSignature {
  name: string;
  payload_schema: Record<string, SemanticType>;
}

export interface ToolDescriptor {
  tool_id: string;
  version: string;
  activity_kind: string;
  commands: OperationSignature[];
  events: EventSignature[];
  roles: string[];
  artifact_hash: string;
}

export interface GuardAtom {
  field: string;
  op: "=" | "!=" | "<" | ">";
  value: unknown;
}

export type Trigger =
  | { kind: "tool_event"; slot_id: string; event_name: string }
  | { kind: "phase_entered"; phase: string };

export type Action =
  | { kind: "invoke_command"; slot_id: string; command_name: string; args: Record<string, unknown> }
  | { kind: "transition_phase"; target_phase: string };

export interface Binding {
  binding_id: string;
  source: Trigger;
  guard: { atoms: GuardAtom[] } | null;
  actions: Action[];
}

export interface SubInstanceInfo {
  slot_id: string;
  tool_id: string;
  artifact_hash: string;
  states: Record<string, string>;
}

export interface ActivitySnapshot {
  instance_id: string;
  definition_id: string;
  phase: string;
  participants: Record<string, string>;
  bindings: Binding[];
  sub_instances: SubInstanceInfo[];
  seq: number;
}

export interface InstanceSummary {
  instance_id: string;
  definition_id: string;
  phase: string;
  seq: number;
}

export interface TraceEntry {
  idx: number;
  seq: number;
  ts: number;
  kind: string;
  data: Record<string, unknown>;
}

export interface Violation {
  rule: string;
  path: string;
  detail: string;
}

export interface ApiErrorBody {
  error: { kind: string; detail: string; violations?: Violation[] };
}
