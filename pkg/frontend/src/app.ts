// ============================================
// TYPE DEFINITIONS
// ============================================

import {
  ApiError,
  ReviewClient,
  type NextPairResponse,
  type PairMeta,
  type StatsResponse,
  type VerdictValue,
} from "./api.js";

type Stage = "login" | "review" | "done";

// A pending action is work that already failed against the service and is
// waiting behind the retry banner. A pending submit keeps the verdict the
// annotator chose; a pending advance just needs the next pair again.
type PendingAction =
  | { kind: "submit"; a: string; b: string; value: VerdictValue }
  | { kind: "advance" };

export interface AppOptions {
  baseUrl?: string;
  fetchFn?: typeof fetch;
  pollMs?: number;
}

export interface AppHandle {
  start(annotator: string): Promise<void>;
  submit(value: VerdictValue): Promise<void>;
  retry(): Promise<void>;
  refreshStats(): Promise<void>;
  destroy(): void;
}

interface AppState {
  stage: Stage;
  annotator: string;
  current: NextPairResponse | null;
  pending: PendingAction | null;
  notice: string;
  stats: StatsResponse | null;
  statsStale: boolean;
}

interface VerdictKey {
  key: string;
  value: VerdictValue;
  label: string;
}

const VERDICT_KEYS: VerdictKey[] = [
  { key: "d", value: "duplicate", label: "Duplicate" },
  { key: "u", value: "unclear", label: "Unclear" },
  { key: "x", value: "different", label: "Different" },
];

const DEFAULT_POLL_MS = 5000;

// ============================================
// UTILITY FUNCTIONS
// ============================================

function escapeHtml(str: string): string {
  const div = document.createElement("div");
  div.textContent = str;
  return div.innerHTML;
}

function formatPercent(fraction: number): string {
  return `${(fraction * 100).toFixed(1)}%`;
}

function formatKappa(kappa: number): string {
  return kappa.toFixed(3);
}

// Anything that is not an HTTP status from the service counts as a network
// problem: the verdict must survive and a retry must be offered.
function isNetworkError(err: unknown): boolean {
  return !(err instanceof ApiError);
}

// ============================================
// PAGE SKELETON
// ============================================

const PAGE_HTML = `
<header class="topbar">
  <h1>dermaudit review</h1>
  <span id="session-label"></span>
</header>
<main class="layout">
  <div class="work-column">
    <section id="login-panel">
      <h2>Who is reviewing?</h2>
      <label for="annotator-input">Annotator</label>
      <input id="annotator-input" type="text" autocomplete="off" placeholder="your name" />
      <button id="start-button" type="button">Start reviewing</button>
      <p id="login-error" class="error" hidden></p>
    </section>
    <section id="review-panel" hidden>
      <div id="progress-line" class="progress"></div>
      <div id="pair-cards" class="cards"></div>
      <div id="score-line" class="score"></div>
      <div class="verdict-row">
        <button class="verdict" type="button" data-value="duplicate">[D] Duplicate</button>
        <button class="verdict" type="button" data-value="unclear">[U] Unclear</button>
        <button class="verdict" type="button" data-value="different">[X] Different</button>
      </div>
      <p class="hint">keys: D duplicate, U unclear, X different</p>
      <div id="notice-line" class="notice" hidden></div>
      <div id="retry-banner" class="banner" hidden>
        <span id="retry-message"></span>
        <button id="retry-button" type="button">Retry</button>
      </div>
    </section>
    <section id="done-panel" hidden>
      <h2>Queue complete</h2>
      <p id="done-summary"></p>
      <div id="done-stats"></div>
    </section>
  </div>
  <aside id="stats-panel">
    <h2>Session stats <span id="stale-badge" class="stale" hidden>stale</span></h2>
    <div id="stats-body">waiting for stats...</div>
  </aside>
</main>
`;

// ============================================
// APP
// ============================================

export function createApp(root: HTMLElement, options: AppOptions = {}): AppHandle {
  const client = new ReviewClient(options.baseUrl ?? "", options.fetchFn);
  const pollMs = options.pollMs ?? DEFAULT_POLL_MS;

  const state: AppState = {
    stage: "login",
    annotator: "",
    current: null,
    pending: null,
    notice: "",
    stats: null,
    statsStale: false,
  };

  root.innerHTML = PAGE_HTML;

  const el = {
    sessionLabel: root.querySelector("#session-label") as HTMLElement,
    loginPanel: root.querySelector("#login-panel") as HTMLElement,
    annotatorInput: root.querySelector("#annotator-input") as HTMLInputElement,
    startButton: root.querySelector("#start-button") as HTMLButtonElement,
    loginError: root.querySelector("#login-error") as HTMLElement,
    reviewPanel: root.querySelector("#review-panel") as HTMLElement,
    progressLine: root.querySelector("#progress-line") as HTMLElement,
    pairCards: root.querySelector("#pair-cards") as HTMLElement,
    scoreLine: root.querySelector("#score-line") as HTMLElement,
    verdictButtons: Array.from(root.querySelectorAll("button.verdict")) as HTMLButtonElement[],
    noticeLine: root.querySelector("#notice-line") as HTMLElement,
    retryBanner: root.querySelector("#retry-banner") as HTMLElement,
    retryMessage: root.querySelector("#retry-message") as HTMLElement,
    retryButton: root.querySelector("#retry-button") as HTMLButtonElement,
    donePanel: root.querySelector("#done-panel") as HTMLElement,
    doneSummary: root.querySelector("#done-summary") as HTMLElement,
    doneStats: root.querySelector("#done-stats") as HTMLElement,
    statsBody: root.querySelector("#stats-body") as HTMLElement,
    staleBadge: root.querySelector("#stale-badge") as HTMLElement,
  };

  // ============================================
  // RENDERING
  // ============================================

  function metaRowsHtml(meta: PairMeta | null): string {
    if (meta === null) {
      return `<tr><td colspan="2" class="muted">no metadata</td></tr>`;
    }
    const size =
      meta.width !== null && meta.height !== null ? `${meta.width}x${meta.height}` : "unknown";
    const fst = meta.fst === 0 ? "unknown" : String(meta.fst);
    const group = meta.group_id === null ? "-" : escapeHtml(meta.group_id);
    return `
      <tr><td>diagnosis</td><td>${escapeHtml(meta.diagnosis)}</td></tr>
      <tr><td>skin type</td><td>${fst}</td></tr>
      <tr><td>group</td><td>${group}</td></tr>
      <tr><td>partition</td><td>${escapeHtml(meta.partition)}</td></tr>
      <tr><td>size</td><td>${size}</td></tr>`;
  }

  function cardHtml(imageId: string, meta: PairMeta | null): string {
    return `
      <figure class="card">
        <img src="${client.imageUrl(imageId)}" alt="image ${escapeHtml(imageId)}" />
        <figcaption>${escapeHtml(imageId)}</figcaption>
        <table class="meta"><tbody>${metaRowsHtml(meta)}</tbody></table>
      </figure>`;
  }

  function renderStage(): void {
    el.loginPanel.hidden = state.stage !== "login";
    el.reviewPanel.hidden = state.stage !== "review";
    el.donePanel.hidden = state.stage !== "done";
  }

  function renderPair(): void {
    const current = state.current;
    if (!current || current.done || !current.pair) {
      return;
    }
    const pair = current.pair;
    const position = (current.index ?? 0) + 1;
    const rated = current.rated ?? 0;
    el.progressLine.textContent = `pair ${position} of ${current.total} (${rated} rated)`;
    el.pairCards.innerHTML = cardHtml(pair.a, pair.a_meta) + cardHtml(pair.b, pair.b_meta);
    el.scoreLine.textContent = `cosine similarity ${pair.score.toFixed(4)}`;
  }

  function renderDone(): void {
    const total = state.current ? state.current.total : 0;
    el.doneSummary.textContent = `All ${total} pairs in the queue are rated under "${state.annotator}".`;
    const mine = state.stats ? state.stats.annotators[state.annotator] : undefined;
    if (mine) {
      const counts = VERDICT_KEYS.map(
        (entry) => `${entry.label.toLowerCase()}: ${mine.by_value[entry.value] ?? 0}`,
      ).join(", ");
      el.doneStats.textContent = `Your verdicts as reported by the service: ${counts}.`;
    } else {
      el.doneStats.textContent = "";
    }
  }

  function renderNotice(): void {
    el.noticeLine.hidden = state.notice === "";
    el.noticeLine.textContent = state.notice;
  }

  function renderBanner(): void {
    const pending = state.pending;
    el.retryBanner.hidden = pending === null;
    for (const button of el.verdictButtons) {
      button.disabled = pending !== null;
    }
    if (pending === null) {
      el.retryMessage.textContent = "";
    } else if (pending.kind === "submit") {
      el.retryMessage.textContent =
        `Service unreachable. Your "${pending.value}" verdict for ${pending.a} / ${pending.b} ` +
        `is kept and will be sent on retry.`;
    } else {
      el.retryMessage.textContent = "Service unreachable while loading the next pair.";
    }
  }

  function statsHtml(stats: StatsResponse): string {
    const annotatorNames = Object.keys(stats.annotators).sort();
    const rows = annotatorNames
      .map((name) => {
        const entry = stats.annotators[name];
        const byValue = VERDICT_KEYS.map(
          (v) => `<td class="by-${v.value}">${entry.by_value[v.value] ?? 0}</td>`,
        ).join("");
        return (
          `<tr data-annotator="${escapeHtml(name)}">` +
          `<td>${escapeHtml(name)}</td>` +
          `<td class="done">${entry.done}</td>` +
          `<td class="remaining">${entry.remaining}</td>` +
          byValue +
          `</tr>`
        );
      })
      .join("");
    const annotatorTable =
      annotatorNames.length === 0
        ? `<p class="muted">no verdicts yet</p>`
        : `<table class="stats-table">
            <thead>
              <tr><th>annotator</th><th>done</th><th>left</th><th>dup</th><th>unc</th><th>diff</th></tr>
            </thead>
            <tbody>${rows}</tbody>
          </table>`;
    const agreementLines =
      stats.agreement.length === 0
        ? `<p class="muted">kappa: n/a (needs a second annotator on shared pairs)</p>`
        : stats.agreement
            .map(
              (entry) =>
                `<p class="agreement-line">${entry.annotators.map(escapeHtml).join(" + ")}: ` +
                `${formatPercent(entry.raw_agreement)} raw agreement, ` +
                `kappa ${formatKappa(entry.kappa)} (${entry.n_common} shared)</p>`,
            )
            .join("");
    return `
      <p class="stat-line">session: <b id="stats-name">${escapeHtml(stats.name)}</b></p>
      <p class="stat-line">pairs in queue: <b id="stats-pairs">${stats.pairs}</b></p>
      <p class="stat-line">verdicts logged: <b id="stats-verdicts">${stats.verdicts}</b></p>
      ${annotatorTable}
      <div id="stats-agreement">${agreementLines}</div>`;
  }

  function renderStats(): void {
    el.staleBadge.hidden = !state.statsStale;
    if (state.stats !== null) {
      el.statsBody.innerHTML = statsHtml(state.stats);
    }
    if (state.stage === "done") {
      renderDone();
    }
  }

  function render(): void {
    renderStage();
    if (state.stage === "review") {
      renderPair();
    } else if (state.stage === "done") {
      renderDone();
    }
    renderNotice();
    renderBanner();
  }

  // ============================================
  // SERVER ACTIONS
  // ============================================

  async function refreshStats(): Promise<void> {
    try {
      state.stats = await client.stats();
      state.statsStale = false;
    } catch {
      state.statsStale = true;
    }
    renderStats();
  }

  async function advance(): Promise<void> {
    try {
      const next = await client.nextPair(state.annotator);
      state.pending = null;
      state.current = next;
      state.stage = next.done ? "done" : "review";
      render();
      if (next.done) {
        await refreshStats();
      }
    } catch (err) {
      if (isNetworkError(err)) {
        state.pending = { kind: "advance" };
      } else {
        state.notice = err instanceof ApiError ? err.message : String(err);
      }
      render();
    }
  }

  async function runPending(): Promise<void> {
    const pending = state.pending;
    if (pending === null) {
      return;
    }
    if (pending.kind === "advance") {
      await advance();
      return;
    }
    try {
      await client.submitVerdict({
        annotator: state.annotator,
        a: pending.a,
        b: pending.b,
        value: pending.value,
      });
      state.pending = null;
      state.notice = "";
      await advance();
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // someone (or another window) already rated this pair: skip forward
        state.pending = null;
        state.notice = "Pair was already rated elsewhere; skipping forward.";
        await advance();
      } else if (err instanceof ApiError) {
        state.pending = null;
        state.notice = err.message;
        render();
      } else {
        // network failure: keep the verdict behind the retry banner
        render();
      }
    }
  }

  async function submit(value: VerdictValue): Promise<void> {
    if (state.stage !== "review" || state.pending !== null) {
      return;
    }
    const current = state.current;
    if (!current || current.done || !current.pair) {
      return;
    }
    state.pending = { kind: "submit", a: current.pair.a, b: current.pair.b, value };
    await runPending();
  }

  async function start(annotator: string): Promise<void> {
    const name = annotator.trim();
    if (name === "") {
      el.loginError.hidden = false;
      el.loginError.textContent = "Enter an annotator name first.";
      return;
    }
    try {
      const session = await client.session();
      el.sessionLabel.textContent = `${session.name}: ${session.pairs} pairs`;
    } catch (err) {
      el.loginError.hidden = false;
      el.loginError.textContent = isNetworkError(err)
        ? "Cannot reach the review service."
        : String(err);
      return;
    }
    el.loginError.hidden = true;
    state.annotator = name;
    state.stage = "review";
    await advance();
  }

  async function retry(): Promise<void> {
    await runPending();
  }

  // ============================================
  // EVENT WIRING
  // ============================================

  function onKeydown(event: KeyboardEvent): void {
    const target = event.target as HTMLElement | null;
    if (target && (target.tagName === "INPUT" || target.tagName === "TEXTAREA")) {
      return;
    }
    const hit = VERDICT_KEYS.find((entry) => entry.key === event.key.toLowerCase());
    if (!hit) {
      return;
    }
    event.preventDefault();
    void submit(hit.value);
  }

  el.startButton.addEventListener("click", () => {
    void start(el.annotatorInput.value);
  });
  el.annotatorInput.addEventListener("keydown", (event) => {
    if (event.key === "Enter") {
      void start(el.annotatorInput.value);
    }
  });
  for (const button of el.verdictButtons) {
    button.addEventListener("click", () => {
      void submit(button.dataset.value as VerdictValue);
    });
  }
  el.retryButton.addEventListener("click", () => {
    void retry();
  });
  document.addEventListener("keydown", onKeydown);

  const pollTimer = window.setInterval(() => {
    void refreshStats();
  }, pollMs);
  void refreshStats();

  render();
  el.annotatorInput.focus();

  function destroy(): void {
    window.clearInterval(pollTimer);
    document.removeEventListener("keydown", onKeydown);
  }

  return { start, submit, retry, refreshStats, destroy };
}
