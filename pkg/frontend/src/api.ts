/**
 * Typed client for the annotation service HTTP API.
 *
 * Mirrors the five endpoints exactly; no payload shaping happens here beyond
 * JSON (de)serialization, so what the caller submits is what the server
 * stores.
 */

/** One mention inside a pending sentence: its stable key and token span. */
export interface MentionRef {
  key: string;
  span: [number, number];
}

/** A sentence waiting for annotation. */
export interface PendingInstance {
  id: string;
  tokens: string[];
  mentions: MentionRef[];
}

/** Row in the GET /sessions listing. */
export interface SessionSummary {
  session_id: string;
  status: string;
  annotator: string;
  budget: number;
  target: string[];
  pending_count: number;
}

/** Full state from GET /sessions/{id} (and POST /sessions). */
export interface SessionState {
  session_id: string;
  status: string;
  annotator: string;
  budget: number;
  target: string[];
  selected: string[];
  pending: PendingInstance[];
  collected: AnnotationRecord[];
}

/** One stored annotation: every mention of the sentence, decided. */
export interface AnnotationRecord {
  instance_id: string;
  decisions: Record<string, boolean>;
  annotator?: string;
  timestamp?: number;
}

/** Payload for POST /sessions/{id}/annotations. */
export interface SubmitRequest {
  records: Array<{ instance_id: string; decisions: Record<string, boolean> }>;
}

export interface Evaluation {
  micro_f1: number;
  precision: number;
  recall: number;
  tp: number;
  fp: number;
  fn: number;
}

/** Selection trace persisted with each session. */
export interface SessionTrace {
  ce_outputs: Record<string, string[]>;
  common: { concepts: string[]; counts: Record<string, number> };
  ordered_queries: string[];
  picks: Array<{ query_excluded: string; instance: string; score: number }>;
  fallback: boolean;
}

/** GET /sessions/{id}/result payload. */
export interface SessionResult {
  target: string[];
  selected: string[];
  records: AnnotationRecord[];
  augmented_ids: string[];
  evaluation: Evaluation;
  trace: SessionTrace;
}

/** Error envelope every non-2xx response carries. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }

  get isConflict(): boolean {
    return this.status === 409;
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  let resp: Response;
  try {
    resp = await fetch(url, init);
  } catch (err) {
    throw new ApiError(0, "unreachable", `service unreachable: ${String(err)}`);
  }
  const body: unknown = await resp.json().catch(() => null);
  if (!resp.ok) {
    const envelope = body as { error?: { code?: string; message?: string } } | null;
    throw new ApiError(
      resp.status,
      envelope?.error?.code ?? "unknown",
      envelope?.error?.message ?? `HTTP ${resp.status}`,
    );
  }
  return body as T;
}

/** All five endpoints, bound to one base URL. */
export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return `${this.baseUrl.replace(/\/$/, "")}${path}`;
  }

  listSessions(): Promise<SessionSummary[]> {
    return request(this.url("/sessions"));
  }

  getSession(sessionId: string): Promise<SessionState> {
    return request(this.url(`/sessions/${sessionId}`));
  }

  createSession(payload: Record<string, unknown>): Promise<SessionState> {
    return request(this.url("/sessions"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  submitAnnotations(sessionId: string, records: SubmitRequest["records"]): Promise<SessionState> {
    return request(this.url(`/sessions/${sessionId}/annotations`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ records }),
    });
  }

  getResult(sessionId: string): Promise<SessionResult> {
    return request(this.url(`/sessions/${sessionId}/result`));
  }
}
