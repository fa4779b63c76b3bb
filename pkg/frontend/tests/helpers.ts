// ============================================
// TYPE DEFINITIONS
// ============================================

import type { PairMeta, StatsResponse } from "../src/api";

export interface PairSeed {
  a: string;
  b: string;
  score: number;
}

export interface LoggedRequest {
  method: string;
  path: string;
  body: unknown;
}

const VERDICT_VALUES = ["duplicate", "unclear", "different"];

// ============================================
// DOM HELPERS
// ============================================

export function mountRoot(): HTMLElement {
  document.body.innerHTML = '<div id="app"></div>';
  return document.getElementById("app") as HTMLElement;
}

export function text(selector: string): string {
  const node = document.querySelector(selector);
  return node ? (node.textContent ?? "") : "";
}

export function isHidden(selector: string): boolean {
  const node = document.querySelector(selector) as HTMLElement | null;
  if (!node) {
    throw new Error(`no element matches ${selector}`);
  }
  return node.hidden;
}

export async function waitUntil(
  check: () => boolean,
  timeoutMs = 5000,
  stepMs = 10,
): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (check()) {
      return;
    }
    await new Promise((resolve) => setTimeout(resolve, stepMs));
  }
  throw new Error("condition not met in time");
}

// ============================================
// FAKE REVIEW SERVICE
// ============================================

function jsonResponse(payload: unknown, status = 200): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

function pairKey(a: string, b: string): string {
  return a < b ? `${a}\t${b}` : `${b}\t${a}`;
}

// In-memory stand-in for the review service, following its documented
// behavior: queue order cursor per annotator, one verdict per pair per
// annotator, 409 on repeats, 404 for pairs outside the queue.
export class FakeService {
  readonly pairs: PairSeed[];
  readonly meta: Record<string, PairMeta>;
  readonly name: string;
  verdicts = new Map<string, Map<string, string>>();
  requests: LoggedRequest[] = [];
  failures = 0;
  delayMs = 0;
  statsOverride: StatsResponse | null = null;
  onVerdictRecorded: (() => void) | null = null;

  constructor(pairs: PairSeed[], meta: Record<string, PairMeta> = {}, name = "fake-session") {
    this.pairs = pairs;
    this.meta = meta;
    this.name = name;
  }

  recordDirect(annotator: string, a: string, b: string, value: string): void {
    let mine = this.verdicts.get(annotator);
    if (!mine) {
      mine = new Map();
      this.verdicts.set(annotator, mine);
    }
    mine.set(pairKey(a, b), value);
  }

  get fetch(): typeof fetch {
    return (input, init) => this.handle(input, init);
  }

  private totalVerdicts(): number {
    let total = 0;
    for (const mine of this.verdicts.values()) {
      total += mine.size;
    }
    return total;
  }

  private doneFor(annotator: string): number {
    const mine = this.verdicts.get(annotator);
    if (!mine) {
      return 0;
    }
    return this.pairs.filter((p) => mine.has(pairKey(p.a, p.b))).length;
  }

  private async handle(input: RequestInfo | URL, init?: RequestInit): Promise<Response> {
    const url = new URL(String(input), "http://fake.test");
    const method = (init?.method ?? "GET").toUpperCase();
    let body: unknown = null;
    if (typeof init?.body === "string") {
      body = JSON.parse(init.body);
    }
    this.requests.push({ method, path: url.pathname + url.search, body });

    if (this.delayMs > 0) {
      await new Promise((resolve) => setTimeout(resolve, this.delayMs));
    }
    if (this.failures > 0) {
      this.failures -= 1;
      throw new TypeError("fetch failed");
    }

    if (method === "GET" && url.pathname === "/api/session") {
      return jsonResponse({
        name: this.name,
        pairs: this.pairs.length,
        verdicts: this.totalVerdicts(),
        annotators: [...this.verdicts.keys()].sort(),
      });
    }

    if (method === "GET" && url.pathname === "/api/pairs/next") {
      const annotator = url.searchParams.get("annotator") ?? "";
      if (!annotator) {
        return jsonResponse({ detail: "annotator is required" }, 400);
      }
      const mine = this.verdicts.get(annotator) ?? new Map<string, string>();
      const index = this.pairs.findIndex((p) => !mine.has(pairKey(p.a, p.b)));
      if (index === -1) {
        return jsonResponse({
          done: true,
          pair: null,
          index: null,
          total: this.pairs.length,
        });
      }
      const pair = this.pairs[index];
      return jsonResponse({
        done: false,
        pair: {
          a: pair.a,
          b: pair.b,
          score: pair.score,
          a_meta: this.meta[pair.a] ?? null,
          b_meta: this.meta[pair.b] ?? null,
        },
        index,
        total: this.pairs.length,
        rated: this.doneFor(annotator),
      });
    }

    if (method === "POST" && url.pathname === "/api/verdicts") {
      const record = body as Record<string, unknown>;
      for (const field of ["annotator", "a", "b", "value"]) {
        if (typeof record[field] !== "string" || record[field] === "") {
          return jsonResponse({ detail: `${field} must be a non-empty string` }, 400);
        }
      }
      const annotator = record["annotator"] as string;
      const a = record["a"] as string;
      const b = record["b"] as string;
      const value = record["value"] as string;
      if (!VERDICT_VALUES.includes(value)) {
        return jsonResponse({ detail: `unknown verdict value ${value}` }, 400);
      }
      const key = pairKey(a, b);
      if (!this.pairs.some((p) => pairKey(p.a, p.b) === key)) {
        return jsonResponse({ detail: `pair (${a}, ${b}) is not in the queue` }, 404);
      }
      const mine = this.verdicts.get(annotator);
      if (mine && mine.has(key)) {
        return jsonResponse({ detail: `pair already rated by ${annotator}` }, 409);
      }
      this.recordDirect(annotator, a, b, value);
      if (this.onVerdictRecorded) {
        this.onVerdictRecorded();
      }
      const done = this.doneFor(annotator);
      return jsonResponse(
        { recorded: true, rated: done, remaining: this.pairs.length - done },
        201,
      );
    }

    if (method === "GET" && url.pathname === "/api/stats") {
      if (this.statsOverride) {
        return jsonResponse(this.statsOverride);
      }
      const annotators: Record<string, unknown> = {};
      for (const name of [...this.verdicts.keys()].sort()) {
        const mine = this.verdicts.get(name) as Map<string, string>;
        const byValue: Record<string, number> = {};
        for (const value of VERDICT_VALUES) {
          byValue[value] = 0;
        }
        for (const p of this.pairs) {
          const verdict = mine.get(pairKey(p.a, p.b));
          if (verdict !== undefined) {
            byValue[verdict] += 1;
          }
        }
        const done = this.doneFor(name);
        annotators[name] = {
          done,
          remaining: this.pairs.length - done,
          by_value: byValue,
        };
      }
      return jsonResponse({
        name: this.name,
        pairs: this.pairs.length,
        verdicts: this.totalVerdicts(),
        annotators,
        agreement: [],
      });
    }

    return jsonResponse({ detail: `no route for ${method} ${url.pathname}` }, 404);
  }
}

export function makeMeta(overrides: Partial<PairMeta> = {}): PairMeta {
  return {
    diagnosis: "nv",
    fst: 2,
    group_id: "g1",
    partition: "train",
    width: 600,
    height: 450,
    ...overrides,
  };
}
