// ============================================
// TYPE DEFINITIONS
// ============================================

export type VerdictValue = "duplicate" | "unclear" | "different";

export interface PairMeta {
  diagnosis: string;
  fst: number;
  group_id: string | null;
  partition: string;
  width: number | null;
  height: number | null;
}

export interface PairView {
  a: string;
  b: string;
  score: number;
  a_meta: PairMeta | null;
  b_meta: PairMeta | null;
}

export interface NextPairResponse {
  done: boolean;
  pair: PairView | null;
  index: number | null;
  total: number;
  rated?: number;
}

export interface SessionInfo {
  name: string;
  pairs: number;
  verdicts: number;
  annotators: string[];
}

export interface VerdictSubmission {
  annotator: string;
  a: string;
  b: string;
  value: VerdictValue;
}

export interface VerdictReceipt {
  recorded: boolean;
  rated: number;
  remaining: number;
}

export interface AnnotatorStats {
  done: number;
  remaining: number;
  by_value: Record<string, number>;
}

export interface AgreementEntry {
  annotators: string[];
  n_common: number;
  raw_agreement: number;
  kappa: number;
}

export interface StatsResponse {
  name: string;
  pairs: number;
  verdicts: number;
  annotators: Record<string, AnnotatorStats>;
  agreement: AgreementEntry[];
}

// ============================================
// API CLIENT
// ============================================

export class ApiError extends Error {
  readonly status: number;

  constructor(status: number, message: string) {
    super(message);
    this.name = "ApiError";
    this.status = status;
  }
}

export class ReviewClient {
  private readonly baseUrl: string;
  private readonly fetchFn: typeof fetch;

  constructor(baseUrl = "", fetchFn?: typeof fetch) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    // default goes through the global so the browser keeps its own `this`
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let detail = `HTTP ${response.status}`;
      try {
        const body = (await response.json()) as { detail?: unknown };
        if (body && typeof body.detail === "string") {
          detail = body.detail;
        }
      } catch {
        // non-JSON error body, keep the generic message
      }
      throw new ApiError(response.status, detail);
    }
    return response.json();
  }

  session(): Promise<SessionInfo> {
    return this.request("/api/session") as Promise<SessionInfo>;
  }

  nextPair(annotator: string): Promise<NextPairResponse> {
    const query = encodeURIComponent(annotator);
    return this.request(`/api/pairs/next?annotator=${query}`) as Promise<NextPairResponse>;
  }

  submitVerdict(verdict: VerdictSubmission): Promise<VerdictReceipt> {
    return this.request("/api/verdicts", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(verdict),
    }) as Promise<VerdictReceipt>;
  }

  stats(): Promise<StatsResponse> {
    return this.request("/api/stats") as Promise<StatsResponse>;
  }

  imageUrl(imageId: string): string {
    return `${this.baseUrl}/api/images/${encodeURIComponent(imageId)}`;
  }
}
