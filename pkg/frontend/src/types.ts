/** JSON shapes exchanged with the gateway's /api/v1 endpoints. */

export type PathChoice = "FUNCTION_CALLING" | "NL2SQL";
export type BackendChoice = "HTTP" | "SCRIPTED" | "RULES";
export type TurnStatus = "OK" | "NO_DATA" | "FAILED";

export interface SessionHandle {
  session_id: string;
  created_at: string;
  path: PathChoice;
  backend_mode: BackendChoice;
}

export interface TraceEntry {
  function: string;
  arguments: Record<string, unknown>;
  row_count: number;
}

export interface ValidationFix {
  kind: "TABLE_RENAME" | "FIELD_RENAME";
  from_name: string;
  to_name: string;
  edit_distance: number;
}

export interface DraftInfo {
  sql: string;
  origin: "EXAMPLE_SUBSTITUTION" | "GENERATED";
  explanation: string;
  fixes: ValidationFix[];
  source_example_id: string | null;
}

export interface Nl2SqlInfo {
  draft: DraftInfo | null;
  failed_step: string | null;
  row_count: number;
}

export interface TurnResponse {
  answer: string;
  status: TurnStatus;
  tool_trace: TraceEntry[];
  route_attempts?: number;
  function_attempts?: number;
  nl2sql: Nl2SqlInfo | null;
}

export interface HistoryMessage {
  role: "system" | "user" | "assistant" | "tool";
  content: string;
  tool_call_id?: string;
  tool_call?: {
    tool_name: string;
    arguments: Record<string, unknown>;
    call_id: string;
  };
}

export interface AuditRecord {
  record_id: number;
  session_id: string;
  turn: number;
  timestamp: string;
  step_kind: string;
  payload: Record<string, unknown>;
  path: string;
}

export interface ApiErrorBody {
  status: number;
  code: string;
  message: string;
}
