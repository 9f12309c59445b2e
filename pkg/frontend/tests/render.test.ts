import { describe, expect, it } from "vitest";

import {
  NO_RETRIEVAL_BADGE,
  escapeHtml,
  renderErrorBubble,
  renderSessionBadge,
  renderTrace,
  renderTranscript,
  renderTurn,
} from "../src/render.js";
import { applyError, applyTurn, emptyTranscript, type TurnView } from "../src/state.js";
import type { SessionHandle } from "../src/types.js";

const SESSION: SessionHandle = {
  session_id: "s-render",
  created_at: "2026-01-01T00:00:00+00:00",
  path: "FUNCTION_CALLING",
  backend_mode: "RULES",
};

function turn(overrides: Partial<TurnView>): TurnView {
  return {
    userText: "q",
    answer: "a",
    status: "OK",
    trace: [],
    draft: null,
    answeredFromHistory: false,
    ...overrides,
  };
}

describe("renderTrace", () => {
  it("renders function calls with arguments and row counts", () => {
    const html = renderTrace(
      turn({
        trace: [
          {
            function: "count_work_orders_by_equipment",
            arguments: { equip_id: "056-SG2" },
            row_count: 1,
          },
        ],
      }),
    );
    expect(html).toContain("count_work_orders_by_equipment");
    expect(html).toContain("056-SG2");
    expect(html).toContain("1 rows");
  });

  it("renders baseline drafts with their fixes attached", () => {
    const html = renderTrace(
      turn({
        draft: {
          sql: "SELECT wr_id FROM work_request",
          origin: "GENERATED",
          explanation: "",
          fixes: [
            { kind: "TABLE_RENAME", from_name: "work_requests", to_name: "work_request",
              edit_distance: 1 },
          ],
          source_example_id: null,
        },
      }),
    );
    expect(html).toContain("GENERATED");
    expect(html).toContain("TABLE_RENAME");
    expect(html).toContain("work_requests");
  });

  it("renders nothing when there is no trace", () => {
    expect(renderTrace(turn({}))).toBe("");
  });
});

describe("renderTurn", () => {
  it("shows the no-retrieval badge only for history-answered turns", () => {
    expect(renderTurn(turn({ answeredFromHistory: true }))).toContain(NO_RETRIEVAL_BADGE);
    expect(renderTurn(turn({}))).not.toContain(NO_RETRIEVAL_BADGE);
  });

  it("escapes model and user text", () => {
    const html = renderTurn(turn({ userText: "<script>x</script>", answer: "a & b" }));
    expect(html).not.toContain("<script>");
    expect(html).toContain("&lt;script&gt;");
    expect(html).toContain("a &amp; b");
  });
});

describe("renderTranscript", () => {
  it("keeps the transcript when an inline error is shown", () => {
    let view = emptyTranscript(SESSION);
    view = applyTurn(view, "q", {
      answer: "fine",
      status: "OK",
      tool_trace: [],
      nl2sql: null,
    });
    view = applyError(view, "gateway returned 502");
    const html = renderTranscript(view);
    expect(html).toContain("fine");
    expect(html).toContain("gateway returned 502");
  });

  it("renders the session badge labels", () => {
    const html = renderSessionBadge(emptyTranscript(SESSION));
    expect(html).toContain("Function-Calling / Hermetic");
  });
});

describe("escapeHtml", () => {
  it("escapes the dangerous characters", () => {
    expect(escapeHtml(`<a href="x">&</a>`)).toBe(
      "&lt;a href=&quot;x&quot;&gt;&amp;&lt;/a&gt;",
    );
  });

  it("error bubbles escape their contents", () => {
    expect(renderErrorBubble("<b>boom</b>")).toContain("&lt;b&gt;boom&lt;/b&gt;");
  });
});
