// Typed client for the gateway's JSON API. The fetch function is injectable
// so tests can capture requests without a network.

export interface ChoiceOption {
  id: string;
  label: string;
}

export interface ClarificationPayload {
  repeat: string;
  alert: string;
  empower: string;
  choices: ChoiceOption[];
}

export interface ResponseMeta {
  branch: string;
  embedder_id: string;
  degraded: boolean;
  s_align?: number;
  best_variant?: string;
  h_j_index?: number;
}

export interface GatewayResponse {
  kind: "reply" | "clarification" | "ack_awaiting";
  text?: string;
  clarification?: Partial<ClarificationPayload>;
  meta: ResponseMeta;
}

export interface SessionConfig {
  k: number;
  tau_seconds: number;
  theta: number;
  weight_form: string;
  history_embed: string;
  offline_mode: boolean;
}

export interface HealthInfo {
  status: string;
  upstream_ok: boolean;
  embedder_id: string;
}

export interface HistoryTurn {
  index: number;
  user_text: string;
  assistant_text: string | null;
  timestamp: number;
  meta: Record<string, unknown>;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class GatewayError extends Error {
  constructor(public status: number, detail: string) {
    super(detail);
  }
}

export class GatewayClient {
  sessionId: string | null = null;

  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: { "content-type": "application/json" } };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    const payload = await response.json().catch(() => ({}));
    if (!response.ok) {
      const detail = (payload as { detail?: string }).detail ?? `HTTP ${response.status}`;
      throw new GatewayError(response.status, detail);
    }
    return payload as T;
  }

  async createSession(config?: Partial<SessionConfig>): Promise<string> {
    const body = config ? { config } : {};
    const payload = await this.request<{ session_id: string }>("POST", "/v1/sessions", body);
    this.sessionId = payload.session_id;
    return payload.session_id;
  }

  private session(): string {
    if (!this.sessionId) {
      throw new GatewayError(0, "no session; call createSession first");
    }
    return this.sessionId;
  }

  async sendMessage(text: string, timestamp?: number): Promise<GatewayResponse> {
    const body: { text: string; timestamp?: number } = { text };
    if (timestamp !== undefined) {
      body.timestamp = timestamp;
    }
    return this.request("POST", `/v1/sessions/${this.session()}/messages`, body);
  }

  async sendChoice(choice: string, newText?: string): Promise<GatewayResponse> {
    const body: { choice: string; new_text?: string } = { choice };
    if (newText !== undefined) {
      body.new_text = newText;
    }
    return this.request("POST", `/v1/sessions/${this.session()}/clarification`, body);
  }

  async getConfig(): Promise<SessionConfig> {
    return this.request("GET", `/v1/sessions/${this.session()}/config`);
  }

  async putConfig(updates: Partial<SessionConfig>): Promise<SessionConfig> {
    return this.request("PUT", `/v1/sessions/${this.session()}/config`, updates);
  }

  async getHistory(): Promise<{ session_id: string; turns: HistoryTurn[] }> {
    return this.request("GET", `/v1/sessions/${this.session()}/history`);
  }

  async health(): Promise<HealthInfo> {
    return this.request("GET", "/v1/health");
  }
}
