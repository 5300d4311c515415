// Typed client for the /v1 session API. All belief mutations go through
// observe(); recommend() is explicitly user-triggered because it is expensive.

export interface GraphJson {
  d: number;
  edges: [number, number][];
}

export interface PosteriorEntry {
  graph: GraphJson;
  p: number;
}

export interface InterventionJson {
  target: number;
  value: number;
}

export interface EigPoint {
  target: number;
  x: number;
  eig: number;
  order: number;
}

export interface Recommendation {
  target: number;
  value: number;
  eig: number;
  diagnostics: EigPoint[];
  budget_exhausted: boolean;
  belief_converged: boolean;
}

export interface HistoryRecord {
  t: number;
  intervention: InterventionJson | null;
  values: number[];
  recommendation: Recommendation | null;
  posterior: number[];
  entropy: number;
}

export interface SessionState {
  session_id: string;
  revision: number;
  d: number;
  posterior: PosteriorEntry[];
  edge_marginals: number[][];
  entropy: number;
  entropy_history: number[];
  history: HistoryRecord[];
  pending_recommendation: Recommendation | null;
  n_observations: number;
  config: { observations: number[][]; [key: string]: unknown };
}

export interface ObserveResponse {
  session_id: string;
  revision: number;
  posterior: PosteriorEntry[];
  edge_marginals: number[][];
  entropy: number;
  record: HistoryRecord;
}

export interface CurveResponse {
  graph: GraphJson;
  node: number;
  parent: number;
  grid: number[];
  mean: number[];
  band: number[];
}

export interface CreateSessionBody {
  d: number;
  observations: number[][];
  seed?: number;
  prior?: Record<string, unknown>;
  design?: Record<string, unknown>;
  idempotency_key?: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly field?: string,
  ) {
    super(message);
  }
}

async function parseError(resp: Response): Promise<ApiError> {
  try {
    const body = (await resp.json()) as { error?: { code?: string; message?: string; field?: string } };
    const err = body.error ?? {};
    return new ApiError(resp.status, err.code ?? "unknown", err.message ?? resp.statusText, err.field);
  } catch {
    return new ApiError(resp.status, "unknown", resp.statusText);
  }
}

export class Client {
  constructor(
    readonly base: string = "",
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await this.fetchFn(`${this.base}${path}`, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as T;
  }

  createSession(body: CreateSessionBody): Promise<SessionState> {
    return this.request("POST", "/v1/sessions", body);
  }

  getState(id: string): Promise<SessionState> {
    return this.request("GET", `/v1/sessions/${id}`);
  }

  recommend(id: string): Promise<Recommendation & { revision: number }> {
    return this.request("POST", `/v1/sessions/${id}/recommend`, {});
  }

  observe(id: string, intervention: InterventionJson | null, values: number[]): Promise<ObserveResponse> {
    return this.request("POST", `/v1/sessions/${id}/observe`, { intervention, values });
  }

  curve(id: string, graph: number, node: number, lo: number, hi: number): Promise<CurveResponse> {
    const q = `graph=${graph}&node=${node}&lo=${lo}&hi=${hi}`;
    return this.request("GET", `/v1/sessions/${id}/curve?${q}`);
  }

  health(): Promise<{ status: string; version: string }> {
    return this.request("GET", "/v1/healthz");
  }
}
