// Session dashboard: posterior bars with graph thumbnails, edge-marginal
// heatmap, recommendation card with the evaluated EIG landscape, the outcome
// entry form (target pre-filled and locked), per-edge GP curve panels, and
// the entropy sparkline. State advances only through POST /observe; polling
// keeps a second tab from silently diverging (a stale tab gets a banner).

import { ApiError, Client } from "./api.js";
import type { InterventionJson, Recommendation, SessionState } from "./api.js";
import {
  clear,
  renderCurve,
  renderEigScatter,
  renderHeatmap,
  renderPosteriorBars,
  renderSparkline,
} from "./graphics.js";
import { defaultNames, validateOutcome } from "./validate.js";

export const POLL_INTERVAL_MS = 2000;
const CURVE_PANEL_LIMIT = 4;

export class Dashboard {
  state: SessionState | null = null;
  recommendation: Recommendation | null = null;
  names: string[] = [];
  private timer: ReturnType<typeof setInterval> | null = null;
  private busy = false;

  constructor(
    readonly root: HTMLElement,
    readonly client: Client,
    readonly sessionId: string,
    names?: string[],
  ) {
    if (names) this.names = names;
    this.root.innerHTML = `
      <header class="dash-header">
        <h2>Session <code class="session-id"></code></h2>
        <span>revision <strong id="revision">–</strong></span>
        <span>entropy <strong id="entropy">–</strong> nats</span>
      </header>
      <div id="stale-banner" class="banner hidden">
        Another tab advanced this session. <button id="refresh-btn">Refresh</button>
      </div>
      <div class="dash-grid">
        <section class="panel">
          <h3>Graph posterior</h3>
          <div id="posterior-bars"></div>
        </section>
        <section class="panel">
          <h3>Edge marginals</h3>
          <div id="heatmap"></div>
          <h3>Entropy over time</h3>
          <div id="sparkline"></div>
        </section>
        <section class="panel">
          <h3>Next experiment</h3>
          <button id="recommend-btn">Compute recommendation</button>
          <div id="recommendation" class="hidden">
            <p class="rec-summary">
              Intervene on <strong id="rec-target"></strong> at
              <strong id="rec-value"></strong>
              <span class="rec-eig">(score <span id="rec-eig"></span>)</span>
            </p>
            <p id="rec-flags" class="muted"></p>
            <div id="eig-landscape"></div>
          </div>
          <form id="outcome-form">
            <h3>Enter measured outcome</h3>
            <div id="outcome-fields"></div>
            <p id="outcome-error" class="error hidden"></p>
            <button type="submit" id="submit-outcome">Submit outcome</button>
          </form>
        </section>
        <section class="panel">
          <h3>Mechanism fits</h3>
          <div id="curves"></div>
        </section>
      </div>`;
    (this.root.querySelector(".session-id") as HTMLElement).textContent = sessionId.slice(0, 8);
    this.bind();
  }

  private q<T extends HTMLElement>(selector: string): T {
    const el = this.root.querySelector(selector);
    if (!el) throw new Error(`dashboard markup missing ${selector}`);
    return el as T;
  }

  private bind(): void {
    this.q<HTMLButtonElement>("#recommend-btn").addEventListener("click", (ev) => {
      ev.preventDefault();
      void this.computeRecommendation();
    });
    this.q<HTMLFormElement>("#outcome-form").addEventListener("submit", (ev) => {
      ev.preventDefault();
      void this.submitOutcome();
    });
    this.q<HTMLButtonElement>("#refresh-btn").addEventListener("click", (ev) => {
      ev.preventDefault();
      void this.load();
    });
  }

  async load(): Promise<void> {
    const state = await this.client.getState(this.sessionId);
    if (this.names.length !== state.d) this.names = defaultNames(state.d);
    this.state = state;
    this.recommendation = state.pending_recommendation;
    this.q("#stale-banner").classList.add("hidden");
    this.render();
    await this.renderCurves();
  }

  startPolling(intervalMs: number = POLL_INTERVAL_MS): void {
    this.stopPolling();
    this.timer = setInterval(() => void this.poll(), intervalMs);
  }

  stopPolling(): void {
    if (this.timer !== null) clearInterval(this.timer);
    this.timer = null;
  }

  /** Detect divergence without clobbering a form the user is editing. */
  async poll(): Promise<void> {
    if (this.busy || this.state === null) return;
    try {
      const fresh = await this.client.getState(this.sessionId);
      if (fresh.revision !== this.state.revision) {
        this.q("#stale-banner").classList.remove("hidden");
      }
    } catch {
      // transient polling errors are ignored; the next tick retries
    }
  }

  private render(): void {
    const state = this.state;
    if (!state) return;
    this.q("#revision").textContent = String(state.revision);
    this.q("#entropy").textContent = state.entropy.toFixed(4);
    renderPosteriorBars(this.q("#posterior-bars"), state.posterior, this.names);
    renderHeatmap(this.q("#heatmap"), state.edge_marginals, this.names);
    renderSparkline(this.q("#sparkline"), state.entropy_history);
    this.renderRecommendation();
    this.renderOutcomeForm();
  }

  private renderRecommendation(): void {
    const box = this.q("#recommendation");
    const rec = this.recommendation;
    if (!rec) {
      box.classList.add("hidden");
      return;
    }
    box.classList.remove("hidden");
    this.q("#rec-target").textContent = this.names[rec.target] ?? `X${rec.target}`;
    // full precision lives in state; rounding happens only at render time
    this.q("#rec-value").textContent = rec.value.toFixed(4);
    this.q("#rec-eig").textContent = rec.eig.toFixed(4);
    const flags: string[] = [];
    if (rec.belief_converged) flags.push("belief converged: further experiments are uninformative");
    if (rec.budget_exhausted) flags.push("time budget exhausted: best found so far");
    this.q("#rec-flags").textContent = flags.join(" · ");
    renderEigScatter(this.q("#eig-landscape"), rec.diagnostics, this.names);
  }

  private renderOutcomeForm(): void {
    const holder = this.q("#outcome-fields");
    const state = this.state;
    if (!state) return;
    clear(holder);
    for (let i = 0; i < state.d; i += 1) {
      const row = document.createElement("label");
      row.className = "outcome-field";
      const caption = document.createElement("span");
      caption.textContent = this.names[i] ?? `X${i}`;
      row.appendChild(caption);
      const input = document.createElement("input");
      input.type = "number";
      input.step = "any";
      input.name = `value-${i}`;
      input.id = `outcome-${i}`;
      const rec = this.recommendation;
      if (rec && rec.target === i) {
        // the performed intervention's coordinate is fixed by definition
        input.value = String(rec.value);
        input.readOnly = true;
        input.classList.add("locked");
      }
      row.appendChild(input);
      holder.appendChild(row);
    }
  }

  readOutcome(): Array<number | null> {
    const state = this.state;
    if (!state) return [];
    const out: Array<number | null> = [];
    for (let i = 0; i < state.d; i += 1) {
      const input = this.q<HTMLInputElement>(`#outcome-${i}`);
      out.push(input.value.trim() === "" ? null : Number(input.value));
    }
    return out;
  }

  async computeRecommendation(): Promise<void> {
    const btn = this.q<HTMLButtonElement>("#recommend-btn");
    btn.disabled = true;
    btn.textContent = "Computing…";
    try {
      const rec = await this.client.recommend(this.sessionId);
      this.recommendation = rec;
      this.renderRecommendation();
      this.renderOutcomeForm();
    } catch (err) {
      this.showError(err);
    } finally {
      btn.disabled = false;
      btn.textContent = "Compute recommendation";
    }
  }

  async submitOutcome(): Promise<void> {
    const state = this.state;
    if (!state || this.busy) return;
    const rec = this.recommendation;
    const intervention: InterventionJson | null = rec
      ? { target: rec.target, value: rec.value }
      : null;
    const values = this.readOutcome();
    const problem = validateOutcome(values, intervention, state.d);
    if (problem !== null) {
      this.setOutcomeError(problem);
      return;
    }
    this.setOutcomeError(null);
    this.busy = true;
    try {
      await this.client.observe(this.sessionId, intervention, values as number[]);
      this.busy = false;
      await this.load();
    } catch (err) {
      this.busy = false;
      this.showError(err);
    }
  }

  setOutcomeError(message: string | null): void {
    const el = this.q("#outcome-error");
    if (message === null) {
      el.classList.add("hidden");
      el.textContent = "";
    } else {
      el.classList.remove("hidden");
      el.textContent = message;
    }
  }

  private showError(err: unknown): void {
    const message = err instanceof ApiError ? `${err.message}` : String(err);
    this.setOutcomeError(message);
  }

  /** Render GP fit panels for the highest-posterior single-parent edges. */
  async renderCurves(): Promise<void> {
    const state = this.state;
    if (!state) return;
    const holder = this.q("#curves");
    clear(holder);
    const ranked = state.posterior
      .map((entry, index) => ({ entry, index }))
      .sort((a, b) => b.entry.p - a.entry.p);
    const seen = new Set<string>();
    const jobs: Array<{ graphIndex: number; node: number; parent: number }> = [];
    for (const { entry, index } of ranked) {
      const parentsByNode = new Map<number, number[]>();
      for (const [p, i] of entry.graph.edges) {
        parentsByNode.set(i, [...(parentsByNode.get(i) ?? []), p]);
      }
      for (const [node, parents] of parentsByNode) {
        if (parents.length !== 1) continue; // curves are one-dimensional
        const key = `${parents[0]}->${node}`;
        if (seen.has(key)) continue;
        seen.add(key);
        jobs.push({ graphIndex: index, node, parent: parents[0] });
      }
      if (jobs.length >= CURVE_PANEL_LIMIT) break;
    }
    const obs = state.config.observations ?? [];
    for (const job of jobs.slice(0, CURVE_PANEL_LIMIT)) {
      const col = obs.map((row) => row[job.parent]);
      const lo = col.length ? Math.min(...col) - 1 : -3;
      const hi = col.length ? Math.max(...col) + 1 : 3;
      try {
        const curve = await this.client.curve(this.sessionId, job.graphIndex, job.node, lo, hi);
        renderCurve(holder, curve, this.names);
      } catch {
        // a non-curve node slipped through; skip the panel
      }
    }
  }
}
