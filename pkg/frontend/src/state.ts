/** Transcript view model: pure reducers over server responses.
 *
 * The view is reconstructible from GET history alone (plus audit records for
 * baseline drafts), so a refreshed tab shows the identical transcript.
 */

import type {
  AuditRecord,
  DraftInfo,
  HistoryMessage,
  Nl2SqlInfo,
  SessionHandle,
  TraceEntry,
  TurnResponse,
  TurnStatus,
} from "./types.js";

export interface TurnView {
  userText: string;
  answer: string;
  status: TurnStatus;
  trace: TraceEntry[];
  draft: DraftInfo | null;
  /** True when a follow-up was answered from history with no new retrieval. */
  answeredFromHistory: boolean;
}

export interface TranscriptView {
  session: SessionHandle;
  turns: TurnView[];
  /** Inline error for the last failed send; the transcript itself is kept. */
  inlineError: string | null;
}

export function emptyTranscript(session: SessionHandle): TranscriptView {
  return { session, turns: [], inlineError: null };
}

function answeredFromHistory(
  session: SessionHandle,
  trace: TraceEntry[],
  turnIndex: number,
): boolean {
  return session.path === "FUNCTION_CALLING" && turnIndex > 0 && trace.length === 0;
}

export function applyTurn(
  view: TranscriptView,
  userText: string,
  response: TurnResponse,
): TranscriptView {
  const draft = response.nl2sql?.draft ?? null;
  const turn: TurnView = {
    userText,
    answer: response.answer,
    status: response.status,
    trace: response.tool_trace,
    draft,
    answeredFromHistory: answeredFromHistory(
      view.session,
      response.tool_trace,
      view.turns.length,
    ),
  };
  return { ...view, turns: [...view.turns, turn], inlineError: null };
}

export function applyError(view: TranscriptView, message: string): TranscriptView {
  return { ...view, inlineError: message };
}

/** The gateway appends a glossary block to user prompts; show the typed text. */
export function stripDefinitionsBlock(text: string): string {
  const marker = "\n\nDefinitions:\n";
  const at = text.indexOf(marker);
  return at === -1 ? text : text.slice(0, at);
}

interface ToolMessagePayload {
  function?: string;
  arguments?: Record<string, unknown>;
  row_count?: number;
}

/** Rebuild the transcript from the server history (refresh path). */
export function fromHistory(
  session: SessionHandle,
  history: HistoryMessage[],
  auditRecords: AuditRecord[] = [],
): TranscriptView {
  const turns: TurnView[] = [];
  let current: TurnView | null = null;

  for (const message of history) {
    if (message.role === "system") {
      continue; // prompts and validation feedback are not transcript content
    }
    if (message.role === "user") {
      if (current !== null) {
        turns.push(current);
      }
      current = {
        userText: stripDefinitionsBlock(message.content),
        answer: "",
        status: "OK",
        trace: [],
        draft: null,
        answeredFromHistory: false,
      };
      continue;
    }
    if (current === null) {
      continue;
    }
    if (message.role === "tool") {
      try {
        const payload = JSON.parse(message.content) as ToolMessagePayload;
        if (payload.function) {
          current.trace.push({
            function: payload.function,
            arguments: payload.arguments ?? {},
            row_count: payload.row_count ?? 0,
          });
        }
      } catch {
        // unreadable tool payloads leave the trace entry out
      }
      continue;
    }
    // assistant message: a tool call marker has empty content, the answer has text
    if (message.content) {
      current.answer = message.content;
    }
  }
  if (current !== null) {
    turns.push(current);
  }

  const drafts = draftsByTurn(auditRecords);
  const answers = answersByTurn(auditRecords);
  turns.forEach((turn, index) => {
    turn.draft = drafts.get(index + 1) ?? null;
    const status = answers.get(index + 1);
    if (status) {
      turn.status = status;
    }
    turn.answeredFromHistory = answeredFromHistory(session, turn.trace, index);
  });
  return { session, turns, inlineError: null };
}

function draftsByTurn(records: AuditRecord[]): Map<number, DraftInfo> {
  const out = new Map<number, DraftInfo>();
  for (const record of records) {
    if (record.path !== "NL2SQL" || record.step_kind !== "SQL_EXECUTED") {
      continue;
    }
    const payload = record.payload as {
      sql?: string;
      origin?: DraftInfo["origin"];
      fixes?: DraftInfo["fixes"];
      source_example_id?: string | null;
    };
    if (!payload.sql || !payload.origin) {
      continue;
    }
    out.set(record.turn, {
      sql: payload.sql,
      origin: payload.origin,
      explanation: "",
      fixes: payload.fixes ?? [],
      source_example_id: payload.source_example_id ?? null,
    });
  }
  return out;
}

function answersByTurn(records: AuditRecord[]): Map<number, TurnStatus> {
  const out = new Map<number, TurnStatus>();
  for (const record of records) {
    if (record.step_kind !== "ANSWER") {
      continue;
    }
    const status = (record.payload as { status?: TurnStatus }).status;
    if (status) {
      out.set(record.turn, status);
    }
  }
  return out;
}

/** Comparable projection used by the refresh-reconstruction check. */
export function transcriptFingerprint(view: TranscriptView): string {
  return JSON.stringify(
    view.turns.map((turn) => ({
      user: turn.userText,
      answer: turn.answer,
      trace: turn.trace,
      fromHistory: turn.answeredFromHistory,
    })),
  );
}

export function describeNl2Sql(info: Nl2SqlInfo | null): string {
  if (!info || !info.draft) {
    return "";
  }
  const fixes = info.draft.fixes.length
    ? ` (${info.draft.fixes.length} identifier fix${info.draft.fixes.length > 1 ? "es" : ""})`
    : "";
  return `${info.draft.origin}${fixes}: ${info.draft.sql}`;
}
