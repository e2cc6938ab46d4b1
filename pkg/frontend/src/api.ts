// Typed wrappers over the judgment service JSON API. The UI has no other
// coupling to the backend.

export interface SampleResponse {
  doc_id: string;
  url: string;
  title: string;
  text: string;
  r: number | null;
  served_at: string;
}

export interface Span {
  start: number;
  end: number;
  term: string;
}

export interface MatchedTerm {
  term: string;
  count: number;
}

export interface HighlightPayload {
  doc_id: string;
  text: string;
  r: number | null;
  spans: Span[];
  matched_terms: MatchedTerm[];
}

export interface UiConfig {
  scale_labels: string[];
}

export interface JudgmentAck {
  doc_id: string;
  judge_id: string;
  grade: number;
  judged_at: string;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

interface JsonResponse {
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}

type FetchLike = (url: string, init?: RequestInit) => Promise<JsonResponse>;

function doFetch(): FetchLike {
  // resolved per call so tests can stub globalThis.fetch
  return globalThis.fetch as unknown as FetchLike;
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const resp = await doFetch()(url, init);
  let body: unknown = null;
  try {
    body = await resp.json();
  } catch {
    body = null;
  }
  if (!resp.ok) {
    const err = (body as { error?: { code?: string; message?: string } })?.error;
    throw new ApiError(resp.status, err?.code ?? "http_error",
      err?.message ?? `request failed with status ${resp.status}`);
  }
  return body as T;
}

export function fetchConfig(): Promise<UiConfig> {
  return request<UiConfig>("/api/config");
}

export function fetchSample(strategy: string = "random"): Promise<SampleResponse> {
  return request<SampleResponse>(`/api/sample?strategy=${encodeURIComponent(strategy)}`);
}

export function fetchHighlight(docId: string): Promise<HighlightPayload> {
  return request<HighlightPayload>(`/api/docs/${encodeURIComponent(docId)}/highlight`);
}

export function postJudgment(docId: string, judgeId: string,
                             grade: number): Promise<JudgmentAck> {
  return request<JudgmentAck>("/api/judgments", {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({ doc_id: docId, judge_id: judgeId, grade }),
  });
}
