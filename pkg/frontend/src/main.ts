/** Browser wiring: binds the client, state, and renderers to the page. */

import { GatewayClient, GatewayError } from "./api.js";
import {
  applyError,
  applyTurn,
  emptyTranscript,
  fromHistory,
  type TranscriptView,
} from "./state.js";
import { renderSessionBadge, renderTranscript } from "./render.js";
import type { BackendChoice, PathChoice } from "./types.js";

interface Elements {
  gatewayUrl: HTMLInputElement;
  pathChoice: HTMLSelectElement;
  backendChoice: HTMLSelectElement;
  startButton: HTMLButtonElement;
  sessionBadge: HTMLElement;
  transcript: HTMLElement;
  input: HTMLInputElement;
  sendButton: HTMLButtonElement;
  banner: HTMLElement;
}

function byId<T extends HTMLElement>(id: string): T {
  const element = document.getElementById(id);
  if (!element) {
    throw new Error(`missing element #${id}`);
  }
  return element as T;
}

class ChatApp {
  private client: GatewayClient | null = null;
  private view: TranscriptView | null = null;
  private inFlight = false;

  constructor(private readonly el: Elements) {
    el.startButton.addEventListener("click", () => void this.start());
    el.sendButton.addEventListener("click", () => void this.send());
    el.input.addEventListener("keydown", (event) => {
      if (event.key === "Enter" && !event.shiftKey) {
        event.preventDefault();
        void this.send();
      }
    });
    window.addEventListener("beforeunload", () => this.persistSession());
    void this.resume();
  }

  private persistSession(): void {
    // Only the session pointer is kept; the transcript is server state.
    if (this.view) {
      sessionStorage.setItem(
        "plantquery-session",
        JSON.stringify({ handle: this.view.session, baseUrl: this.el.gatewayUrl.value }),
      );
    }
  }

  private async resume(): Promise<void> {
    const saved = sessionStorage.getItem("plantquery-session");
    if (!saved) {
      return;
    }
    try {
      const { handle, baseUrl } = JSON.parse(saved);
      this.el.gatewayUrl.value = baseUrl;
      this.client = new GatewayClient(baseUrl);
      const [history, audit] = await Promise.all([
        this.client.getHistory(handle.session_id),
        this.client.getAuditRecords({ sessionId: handle.session_id }),
      ]);
      this.view = fromHistory(handle, history, audit);
      this.renderAll();
    } catch {
      sessionStorage.removeItem("plantquery-session");
    }
  }

  private async start(): Promise<void> {
    const baseUrl = this.el.gatewayUrl.value.trim();
    this.client = new GatewayClient(baseUrl);
    this.setBanner("");
    try {
      const handle = await this.client.createSession(
        this.el.pathChoice.value as PathChoice,
        this.el.backendChoice.value as BackendChoice,
      );
      this.view = emptyTranscript(handle);
      this.persistSession();
      this.renderAll();
      this.el.input.disabled = false;
      this.el.sendButton.disabled = false;
    } catch (err) {
      const message =
        err instanceof GatewayError ? err.message : `cannot reach gateway: ${String(err)}`;
      this.setBanner(message);
    }
  }

  private async send(): Promise<void> {
    if (!this.client || !this.view || this.inFlight) {
      return;
    }
    const text = this.el.input.value.trim();
    if (!text) {
      return;
    }
    this.inFlight = true;
    this.el.input.disabled = true;
    this.el.sendButton.disabled = true;
    try {
      const response = await this.client.sendMessage(this.view.session.session_id, text);
      this.view = applyTurn(this.view, text, response);
      this.el.input.value = "";
    } catch (err) {
      const message = err instanceof GatewayError ? err.message : String(err);
      this.view = applyError(this.view, message);
    } finally {
      this.inFlight = false;
      this.el.input.disabled = false;
      this.el.sendButton.disabled = false;
      this.renderAll();
      this.el.input.focus();
    }
  }

  private setBanner(message: string): void {
    this.el.banner.textContent = message;
    this.el.banner.style.display = message ? "block" : "none";
  }

  private renderAll(): void {
    if (!this.view) {
      return;
    }
    this.el.sessionBadge.innerHTML = renderSessionBadge(this.view);
    this.el.transcript.innerHTML = renderTranscript(this.view);
    this.el.transcript.scrollTop = this.el.transcript.scrollHeight;
  }
}

document.addEventListener("DOMContentLoaded", () => {
  new ChatApp({
    gatewayUrl: byId<HTMLInputElement>("gateway-url"),
    pathChoice: byId<HTMLSelectElement>("path-choice"),
    backendChoice: byId<HTMLSelectElement>("backend-choice"),
    startButton: byId<HTMLButtonElement>("start-session"),
    sessionBadge: byId<HTMLElement>("session-badge"),
    transcript: byId<HTMLElement>("transcript"),
    input: byId<HTMLInputElement>("message-input"),
    sendButton: byId<HTMLButtonElement>("send-button"),
    banner: byId<HTMLElement>("error-banner"),
  });
});
