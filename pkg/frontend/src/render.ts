/** Pure HTML renderers for the transcript view; no DOM access here. */

import type { TranscriptView, TurnView } from "./state.js";
import type { TraceEntry } from "./types.js";

export const NO_RETRIEVAL_BADGE = "answered from history · no new retrieval";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderSessionBadge(view: TranscriptView): string {
  const pathLabel =
    view.session.path === "FUNCTION_CALLING" ? "Function-Calling" : "NL-to-SQL";
  const backendLabel = view.session.backend_mode === "RULES" ? "Hermetic" : view.session.backend_mode;
  return `<span class="session-badge">${escapeHtml(pathLabel)} / ${escapeHtml(backendLabel)}</span>`;
}

export function renderTraceEntry(entry: TraceEntry): string {
  const args = escapeHtml(JSON.stringify(entry.arguments));
  return (
    `<li class="trace-entry"><code>${escapeHtml(entry.function)}</code>` +
    `<span class="trace-args">${args}</span>` +
    `<span class="trace-rows">${entry.row_count} rows</span></li>`
  );
}

export function renderTrace(turn: TurnView): string {
  if (turn.draft) {
    const fixes = turn.draft.fixes
      .map(
        (fix) =>
          `<li>${escapeHtml(fix.kind)}: ${escapeHtml(fix.from_name)} → ` +
          `${escapeHtml(fix.to_name)} (distance ${fix.edit_distance})</li>`,
      )
      .join("");
    return (
      `<details class="trace"><summary>SQL draft (${escapeHtml(turn.draft.origin)})</summary>` +
      `<code class="draft-sql">${escapeHtml(turn.draft.sql)}</code>` +
      `<ul class="fixes">${fixes}</ul></details>`
    );
  }
  if (turn.trace.length === 0) {
    return "";
  }
  const entries = turn.trace.map(renderTraceEntry).join("");
  return (
    `<details class="trace"><summary>${turn.trace.length} tool call` +
    `${turn.trace.length > 1 ? "s" : ""}</summary><ul>${entries}</ul></details>`
  );
}

export function renderBadges(turn: TurnView): string {
  const badges: string[] = [`<span class="badge status-${turn.status.toLowerCase()}">${turn.status}</span>`];
  if (turn.answeredFromHistory) {
    badges.push(`<span class="badge no-retrieval">${escapeHtml(NO_RETRIEVAL_BADGE)}</span>`);
  }
  return badges.join("");
}

export function renderTurn(turn: TurnView): string {
  return (
    `<div class="turn">` +
    `<div class="bubble user">${escapeHtml(turn.userText)}</div>` +
    `<div class="bubble assistant">${escapeHtml(turn.answer)}${renderBadges(turn)}` +
    `${renderTrace(turn)}</div>` +
    `</div>`
  );
}

export function renderErrorBubble(message: string): string {
  return `<div class="bubble error">${escapeHtml(message)}</div>`;
}

export function renderTranscript(view: TranscriptView): string {
  const turns = view.turns.map(renderTurn).join("");
  const error = view.inlineError ? renderErrorBubble(view.inlineError) : "";
  return `<div class="transcript">${turns}${error}</div>`;
}
