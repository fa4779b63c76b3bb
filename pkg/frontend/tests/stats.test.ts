// ============================================
// STATS PANEL (fake service)
// ============================================

import { afterEach, describe, expect, it } from "vitest";
import { createApp, type AppHandle } from "../src/app";
import { FakeService, isHidden, mountRoot, text, waitUntil, type PairSeed } from "./helpers";
import type { StatsResponse } from "../src/api";

const PAIRS: PairSeed[] = [
  { a: "img1", b: "img2", score: 0.97 },
  { a: "img3", b: "img4", score: 0.95 },
];

const handles: AppHandle[] = [];

function mountApp(fake: FakeService, pollMs = 3_600_000): AppHandle {
  const root = mountRoot();
  const app = createApp(root, { fetchFn: fake.fetch, pollMs });
  handles.push(app);
  return app;
}

afterEach(() => {
  while (handles.length > 0) {
    handles.pop()?.destroy();
  }
});

describe("stats panel", () => {
  it("renders numbers exactly as the service reports them", async () => {
    const fake = new FakeService(PAIRS);
    // deliberately inconsistent numbers: the panel must echo the service,
    // not recompute anything from verdicts it has seen locally
    fake.statsOverride = {
      name: "strange",
      pairs: 977,
      verdicts: 123456,
      annotators: {
        zed: { done: 42, remaining: 7, by_value: { duplicate: 40, unclear: 1, different: 1 } },
      },
      agreement: [
        { annotators: ["yak", "zed"], n_common: 9, raw_agreement: 0.5, kappa: 0.123 },
      ],
    } satisfies StatsResponse;

    const app = mountApp(fake);
    await app.refreshStats();

    expect(text("#stats-pairs")).toBe("977");
    expect(text("#stats-verdicts")).toBe("123456");
    const row = document.querySelector('[data-annotator="zed"]') as HTMLElement;
    expect(row.querySelector(".done")?.textContent).toBe("42");
    expect(row.querySelector(".remaining")?.textContent).toBe("7");
    expect(row.querySelector(".by-duplicate")?.textContent).toBe("40");
    expect(row.querySelector(".by-unclear")?.textContent).toBe("1");
    expect(row.querySelector(".by-different")?.textContent).toBe("1");
    const agreement = text("#stats-agreement");
    expect(agreement).toContain("yak + zed");
    expect(agreement).toContain("50.0% raw agreement");
    expect(agreement).toContain("kappa 0.123 (9 shared)");
  });

  it("reports kappa as n/a until two annotators share pairs", async () => {
    const fake = new FakeService(PAIRS);
    fake.recordDirect("solo", "img1", "img2", "duplicate");
    const app = mountApp(fake);
    await app.refreshStats();

    expect(text("#stats-agreement")).toContain("kappa: n/a");
    expect(document.querySelector('[data-annotator="solo"]')).not.toBeNull();
  });

  it("polls on an interval without user action", async () => {
    const fake = new FakeService(PAIRS);
    const app = mountApp(fake, 25);
    await waitUntil(() => text("#stats-verdicts") === "0");

    fake.recordDirect("ann", "img1", "img2", "unclear");
    await waitUntil(() => text("#stats-verdicts") === "1");
    expect(text("#stats-verdicts")).toBe("1");
  });

  it("flags stale data while the service is unreachable and recovers", async () => {
    const fake = new FakeService(PAIRS);
    fake.recordDirect("ann", "img1", "img2", "unclear");
    const app = mountApp(fake, 25);
    await waitUntil(() => text("#stats-verdicts") === "1");
    expect(isHidden("#stale-badge")).toBe(true);

    fake.failures = 1_000_000;
    await waitUntil(() => !isHidden("#stale-badge"));
    // last known numbers stay on screen
    expect(text("#stats-verdicts")).toBe("1");

    fake.failures = 0;
    await waitUntil(() => isHidden("#stale-badge"));
    expect(text("#stats-verdicts")).toBe("1");
  });
});
