// View state for the chat console, kept free of DOM so it is testable.
//
// Two rules the gateway protocol imposes and this state machine enforces:
//   - while a clarification is pending, the message input stays locked
//     (the protocol suspends the main task);
//   - everything shown (scores, branch tags, choice labels) comes from the
//     wire payloads; nothing is recomputed or hard-coded client-side.

import type { ClarificationPayload, GatewayResponse, ResponseMeta, SessionConfig } from "./api.js";

export interface Badge {
  sAlign?: number;
  branch: string;
}

export interface TranscriptEntry {
  role: "user" | "assistant" | "event";
  text: string;
  badge?: Badge;
}

export interface PendingClarification {
  payload: Partial<ClarificationPayload>;
  missing: string[]; // wire-contract fields absent from the payload
  submitted: boolean; // set on first button press; guards double submits
}

export interface ScorePoint {
  turn: number;
  sAlign: number | null;
}

const CLARIFICATION_FIELDS = ["repeat", "alert", "empower", "choices"] as const;

export function missingClarificationFields(payload: Partial<ClarificationPayload>): string[] {
  const missing: string[] = [];
  for (const field of CLARIFICATION_FIELDS) {
    const value = payload[field];
    if (value === undefined || value === null) {
      missing.push(field);
    } else if (field === "choices" && !Array.isArray(value)) {
      missing.push(field);
    }
  }
  return missing;
}

function badgeOf(meta: ResponseMeta): Badge {
  return { sAlign: meta.s_align, branch: meta.branch };
}

export class ChatState {
  transcript: TranscriptEntry[] = [];
  pending: PendingClarification | null = null;
  busy = false;
  config: SessionConfig | null = null;
  scores: ScorePoint[] = [];
  private turnCounter = 0;

  inputLocked(): boolean {
    return this.busy || this.pending !== null;
  }

  beginSend(text: string): void {
    if (this.inputLocked()) {
      throw new Error("input is locked");
    }
    this.busy = true;
    this.transcript.push({ role: "user", text });
  }

  applyResponse(response: GatewayResponse): void {
    this.busy = false;
    this.scores.push({ turn: this.turnCounter++, sAlign: response.meta.s_align ?? null });
    if (response.kind === "reply") {
      this.transcript.push({
        role: "assistant",
        text: response.text ?? "",
        badge: badgeOf(response.meta),
      });
      return;
    }
    if (response.kind === "clarification") {
      const payload = response.clarification ?? {};
      this.pending = {
        payload,
        missing: missingClarificationFields(payload),
        submitted: false,
      };
      return;
    }
    this.transcript.push({ role: "event", text: "awaiting a clearer request", badge: badgeOf(response.meta) });
  }

  sendFailed(message: string): void {
    this.busy = false;
    this.transcript.push({ role: "event", text: `error: ${message}` });
  }

  beginChoice(): boolean {
    // returns false when there is nothing to submit or it was already submitted
    if (!this.pending || this.pending.submitted) {
      return false;
    }
    this.pending.submitted = true;
    return true;
  }

  applyChoiceResponse(response: GatewayResponse): void {
    this.pending = null;
    if (response.kind === "reply") {
      this.transcript.push({
        role: "assistant",
        text: response.text ?? "",
        badge: badgeOf(response.meta),
      });
      return;
    }
    if (response.kind === "ack_awaiting") {
      this.transcript.push({ role: "event", text: "awaiting a clearer request", badge: badgeOf(response.meta) });
      return;
    }
    // choice c with new_text can re-enter the pipeline and clarify again
    this.applyResponse(response);
  }

  choiceFailed(message: string): void {
    if (this.pending) {
      this.pending.submitted = false; // let the user try again
    }
    this.transcript.push({ role: "event", text: `error: ${message}` });
  }
}
