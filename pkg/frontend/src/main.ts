// Browser entry point: wires the state machine and the gateway client to the DOM.

import { GatewayClient } from "./api.js";
import { ChatState } from "./state.js";
import { buildSparkline } from "./telemetry.js";

const client = new GatewayClient("");
const state = new ChatState();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing #${id}`);
  }
  return node as T;
}

function renderTranscript(): void {
  const container = el<HTMLDivElement>("transcript");
  container.innerHTML = "";
  for (const entry of state.transcript) {
    const row = document.createElement("div");
    row.className = `msg ${entry.role}`;
    const text = document.createElement("span");
    text.className = "text";
    text.textContent = entry.text;
    row.appendChild(text);
    if (entry.badge) {
      const badge = document.createElement("span");
      badge.className = `badge ${entry.badge.branch}`;
      const score = entry.badge.sAlign;
      badge.textContent =
        score === undefined ? entry.badge.branch : `${entry.badge.branch} ${score.toFixed(3)}`;
      row.appendChild(badge);
    }
    container.appendChild(row);
  }
  container.scrollTop = container.scrollHeight;
}

function renderModal(): void {
  const overlay = el<HTMLDivElement>("modal-overlay");
  if (!state.pending) {
    overlay.classList.add("hidden");
    return;
  }
  overlay.classList.remove("hidden");
  const { payload, missing, submitted } = state.pending;

  el<HTMLDivElement>("modal-degraded").classList.toggle("hidden", missing.length === 0);
  if (missing.length > 0) {
    el<HTMLDivElement>("modal-degraded").textContent =
      `malformed clarification payload, missing: ${missing.join(", ")}`;
  }
  el<HTMLParagraphElement>("modal-repeat").textContent = payload.repeat ?? "";
  el<HTMLParagraphElement>("modal-alert").textContent = payload.alert ?? "";
  el<HTMLParagraphElement>("modal-empower").textContent = payload.empower ?? "";

  const buttons = el<HTMLDivElement>("modal-choices");
  buttons.innerHTML = "";
  for (const choice of payload.choices ?? []) {
    const button = document.createElement("button");
    button.textContent = `${choice.id}) ${choice.label}`; // label straight off the wire
    button.dataset.choice = choice.id;
    button.disabled = submitted;
    button.addEventListener("click", () => onChoice(choice.id));
    buttons.appendChild(button);
  }
  el<HTMLDivElement>("modal-newtext-row").classList.toggle("hidden", selectedChoice !== "c");
}

function renderInput(): void {
  const locked = state.inputLocked();
  el<HTMLInputElement>("message-input").disabled = locked;
  el<HTMLButtonElement>("send-button").disabled = locked;
}

function renderTelemetry(): void {
  const theta = state.config?.theta ?? 0;
  const geometry = buildSparkline(state.scores, theta);
  const svg = el<HTMLElement>("telemetry");
  const marks = geometry.markers
    .map(
      (m) =>
        `<circle cx="${m.x}" cy="${m.y}" r="3" class="${m.belowTheta ? "below" : "above"}" />`,
    )
    .join("");
  svg.innerHTML =
    `<line x1="0" y1="${geometry.thetaY}" x2="${geometry.width}" y2="${geometry.thetaY}" class="theta" />` +
    (geometry.polyline ? `<polyline points="${geometry.polyline}" />` : "") +
    marks;
}

function renderConfig(): void {
  if (!state.config) {
    return;
  }
  el<HTMLInputElement>("config-theta").value = String(state.config.theta);
  el<HTMLInputElement>("config-tau").value = String(state.config.tau_seconds);
  el<HTMLInputElement>("config-k").value = String(state.config.k);
}

function render(): void {
  renderTranscript();
  renderModal();
  renderInput();
  renderTelemetry();
}

let selectedChoice: string | null = null;

async function onSend(): Promise<void> {
  const input = el<HTMLInputElement>("message-input");
  const text = input.value.trim();
  if (!text || state.inputLocked()) {
    return;
  }
  input.value = "";
  state.beginSend(text);
  render();
  try {
    const response = await client.sendMessage(text);
    state.applyResponse(response);
  } catch (error) {
    state.sendFailed(String((error as Error).message ?? error));
  }
  selectedChoice = null;
  render();
}

async function onChoice(choiceId: string): Promise<void> {
  if (choiceId === "c" && selectedChoice !== "c") {
    // first press of c only reveals the free-text field
    selectedChoice = "c";
    render();
    return;
  }
  if (!state.beginChoice()) {
    return;
  }
  render(); // buttons now disabled
  const newText =
    choiceId === "c" ? el<HTMLInputElement>("modal-newtext").value.trim() || undefined : undefined;
  try {
    const response = await client.sendChoice(choiceId, newText);
    state.applyChoiceResponse(response);
  } catch (error) {
    state.choiceFailed(String((error as Error).message ?? error));
  }
  selectedChoice = null;
  el<HTMLInputElement>("modal-newtext").value = "";
  render();
}

async function onApplyConfig(): Promise<void> {
  try {
    await client.putConfig({
      theta: Number(el<HTMLInputElement>("config-theta").value),
      tau_seconds: Number(el<HTMLInputElement>("config-tau").value),
      k: Number(el<HTMLInputElement>("config-k").value),
    });
    state.config = await client.getConfig(); // round-trip, render what the gateway holds
    el<HTMLSpanElement>("config-status").textContent = "applied";
  } catch (error) {
    el<HTMLSpanElement>("config-status").textContent = `rejected: ${(error as Error).message}`;
  }
  renderConfig();
  renderTelemetry();
}

async function connect(): Promise<void> {
  const status = el<HTMLSpanElement>("connection");
  try {
    const sessionId = await client.createSession();
    const health = await client.health();
    state.config = await client.getConfig();
    status.textContent = `session ${sessionId.slice(0, 8)} | embedder ${health.embedder_id} | upstream ${health.upstream_ok ? "ok" : "down"}`;
  } catch (error) {
    status.textContent = `connection failed: ${(error as Error).message}`;
  }
  render();
  renderConfig();
}

document.addEventListener("DOMContentLoaded", () => {
  el<HTMLButtonElement>("send-button").addEventListener("click", onSend);
  el<HTMLInputElement>("message-input").addEventListener("keydown", (event) => {
    if (event.key === "Enter") {
      onSend();
    }
  });
  el<HTMLButtonElement>("config-apply").addEventListener("click", onApplyConfig);
  el<HTMLButtonElement>("modal-newtext-send").addEventListener("click", () => onChoice("c"));
  connect();
});
