// End-to-end against the real offline gateway: spawns `python3 -m cap.cli serve`
// and drives the console's client + state machine over actual HTTP. Skips
// cleanly when the gateway package is not installed in the environment.

import { spawn, type ChildProcess } from "node:child_process";
import { afterAll, beforeAll, describe, expect, test } from "vitest";

import { GatewayClient } from "../src/api.js";
import { ChatState } from "../src/state.js";

const PORT = 8903;
const BASE = `http://127.0.0.1:${PORT}`;

const SCRIPT: Array<[string, number]> = [
  ["how do I bake sourdough bread at home", 0.0],
  ["how do I proof sourdough bread dough at home", 60.0],
  ["how do I shape sourdough bread dough at home", 120.0],
  ["recommend a telescope for deep sky astrophotography", 3780.0],
];

let gateway: ChildProcess | null = null;
let available = false;

async function healthy(): Promise<boolean> {
  try {
    const response = await fetch(`${BASE}/v1/health`);
    return response.ok;
  } catch {
    return false;
  }
}

beforeAll(async () => {
  gateway = spawn("python3", ["-m", "cap.cli", "serve", "--offline", "--port", String(PORT)], {
    stdio: "ignore",
  });
  gateway.on("error", () => {
    gateway = null;
  });
  for (let i = 0; i < 50; i++) {
    if (await healthy()) {
      available = true;
      return;
    }
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
}, 15000);

afterAll(() => {
  gateway?.kill();
});

describe("console against the offline gateway", () => {
  test("turn-4 clarification renders a complete modal and choice b continues", async (ctx) => {
    if (!available) {
      return ctx.skip();
    }
    const client = new GatewayClient(BASE);
    const state = new ChatState();
    await client.createSession();
    state.config = await client.getConfig();

    for (const [text, timestamp] of SCRIPT) {
      expect(state.inputLocked()).toBe(false);
      state.beginSend(text);
      expect(state.inputLocked()).toBe(true); // one in-flight request at a time
      state.applyResponse(await client.sendMessage(text, timestamp));
    }

    // the shift turn suspended generation: modal model is populated and complete
    expect(state.pending).not.toBeNull();
    expect(state.pending!.missing).toEqual([]);
    const payload = state.pending!.payload;
    expect(payload.repeat).toContain("recommend a telescope for deep sky astrophotography");
    expect(payload.alert).toContain("substantially different");
    expect(payload.empower).toContain("Would you like to:");
    expect(payload.choices!.map((c) => c.id)).toEqual(["a", "b", "c"]);

    // input stays locked while the modal is open
    expect(state.inputLocked()).toBe(true);
    expect(() => state.beginSend("blocked")).toThrow();

    // choose b: single submission, continuation reply rendered, lock released
    expect(state.beginChoice()).toBe(true);
    expect(state.beginChoice()).toBe(false);
    const resolution = await client.sendChoice("b");
    state.applyChoiceResponse(resolution);
    expect(resolution.meta.branch).toBe("aligned-by-user");
    const last = state.transcript.at(-1)!;
    expect(last.role).toBe("assistant");
    expect(last.text).toContain("Relevant earlier context");
    expect(state.pending).toBeNull();
    expect(state.inputLocked()).toBe(false);
  }, 20000);

  test("config edits round-trip through PUT then GET", async (ctx) => {
    if (!available) {
      return ctx.skip();
    }
    const client = new GatewayClient(BASE);
    await client.createSession();
    await client.putConfig({ theta: 0.55, k: 3 });
    const fresh = await client.getConfig();
    expect(fresh.theta).toBe(0.55);
    expect(fresh.k).toBe(3);
  }, 20000);

  test("messages while the clarification is pending surface the 409 inline", async (ctx) => {
    if (!available) {
      return ctx.skip();
    }
    const client = new GatewayClient(BASE);
    const state = new ChatState();
    await client.createSession();
    for (const [text, timestamp] of SCRIPT) {
      state.beginSend(text);
      state.applyResponse(await client.sendMessage(text, timestamp));
    }
    expect(state.pending).not.toBeNull();
    // the UI would not allow this send; the gateway still refuses it
    await expect(client.sendMessage("sneaky", 9999)).rejects.toMatchObject({ status: 409 });
    state.beginChoice();
    state.applyChoiceResponse(await client.sendChoice("a"));
    expect(state.inputLocked()).toBe(false);
  }, 20000);
});
