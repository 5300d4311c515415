// New-session wizard: variable count and names, prior choice (with an edge
// picker for the reference prior), pasted observational samples, and design
// knobs. Validation mirrors the API's rules inline; nothing is sent until
// the draft is clean.

import { Client } from "./api.js";
import type { SessionState } from "./api.js";
import { defaultNames, validateWizard } from "./validate.js";
import type { WizardDraft } from "./validate.js";

export class Wizard {
  constructor(
    readonly root: HTMLElement,
    readonly client: Client,
    readonly onCreated: (state: SessionState, names: string[]) => void,
  ) {
    this.root.innerHTML = `
      <h2>New session</h2>
      <form id="wizard-form" class="wizard">
        <label>Variables (d)
          <input type="number" id="wiz-d" min="1" max="5" value="2" />
        </label>
        <label>Variable names (comma separated, optional)
          <input type="text" id="wiz-names" placeholder="X0, X1" />
        </label>
        <fieldset>
          <legend>Graph prior</legend>
          <label><input type="radio" name="prior" value="uniform" checked /> uniform</label>
          <label><input type="radio" name="prior" value="sparsity" /> sparsity</label>
          <label><input type="radio" name="prior" value="reference" /> reference</label>
          <div id="edge-picker" class="hidden"></div>
        </fieldset>
        <label>Observational samples (one row per sample, d numbers each)
          <textarea id="wiz-obs" rows="7" placeholder="0.1, 0.3&#10;-0.5, -0.8"></textarea>
        </label>
        <ul id="row-errors" class="error"></ul>
        <fieldset>
          <legend>Design knobs</legend>
          <label>MC samples <input type="number" id="wiz-mc" value="64" min="1" /></label>
          <label>UCB beta <input type="number" id="wiz-beta" value="2.0" step="any" min="0" /></label>
          <label>BO budget <input type="number" id="wiz-budget" value="12" min="2" /></label>
          <label>Seed <input type="number" id="wiz-seed" value="0" /></label>
        </fieldset>
        <ul id="wiz-errors" class="error"></ul>
        <button type="submit" id="wiz-create">Create session</button>
      </form>`;
    this.bind();
    this.renderEdgePicker();
  }

  private q<T extends HTMLElement>(selector: string): T {
    const el = this.root.querySelector(selector);
    if (!el) throw new Error(`wizard markup missing ${selector}`);
    return el as T;
  }

  private bind(): void {
    this.q<HTMLFormElement>("#wizard-form").addEventListener("submit", (ev) => {
      ev.preventDefault();
      void this.submit();
    });
    this.q<HTMLInputElement>("#wiz-d").addEventListener("change", () => this.renderEdgePicker());
    this.root.querySelectorAll<HTMLInputElement>("input[name=prior]").forEach((radio) => {
      radio.addEventListener("change", () => {
        this.q("#edge-picker").classList.toggle("hidden", this.priorKind() !== "reference");
      });
    });
  }

  priorKind(): "uniform" | "sparsity" | "reference" {
    const checked = this.root.querySelector<HTMLInputElement>("input[name=prior]:checked");
    return (checked?.value ?? "uniform") as "uniform" | "sparsity" | "reference";
  }

  d(): number {
    return Number(this.q<HTMLInputElement>("#wiz-d").value);
  }

  names(): string[] {
    const raw = this.q<HTMLInputElement>("#wiz-names").value.trim();
    const d = this.d();
    if (!raw) return defaultNames(d);
    const parts = raw.split(",").map((s) => s.trim()).filter((s) => s.length > 0);
    return parts.length === d ? parts : defaultNames(d);
  }

  renderEdgePicker(): void {
    const holder = this.q("#edge-picker");
    holder.innerHTML = "";
    const d = this.d();
    const names = this.names();
    for (let p = 0; p < d; p += 1) {
      for (let i = 0; i < d; i += 1) {
        if (p === i) continue;
        const label = document.createElement("label");
        label.className = "edge-option";
        const box = document.createElement("input");
        box.type = "checkbox";
        box.dataset.from = String(p);
        box.dataset.to = String(i);
        label.appendChild(box);
        label.appendChild(document.createTextNode(` ${names[p]} → ${names[i]}`));
        holder.appendChild(label);
      }
    }
    holder.classList.toggle("hidden", this.priorKind() !== "reference");
  }

  referenceEdges(): Array<[number, number]> {
    const edges: Array<[number, number]> = [];
    this.root
      .querySelectorAll<HTMLInputElement>("#edge-picker input:checked")
      .forEach((box) => edges.push([Number(box.dataset.from), Number(box.dataset.to)]));
    return edges;
  }

  draft(): WizardDraft {
    return {
      d: this.d(),
      names: this.names(),
      priorKind: this.priorKind(),
      referenceEdges: this.referenceEdges(),
      observationsText: this.q<HTMLTextAreaElement>("#wiz-obs").value,
      mcSamples: Number(this.q<HTMLInputElement>("#wiz-mc").value),
      beta: Number(this.q<HTMLInputElement>("#wiz-beta").value),
      boBudget: Number(this.q<HTMLInputElement>("#wiz-budget").value),
    };
  }

  /** Validate the draft and show every problem; returns true when clean. */
  showValidation(): boolean {
    const draft = this.draft();
    const { errors, rowErrors } = validateWizard(draft);
    const rowList = this.q("#row-errors");
    rowList.innerHTML = "";
    rowErrors.forEach((re) => {
      const li = document.createElement("li");
      li.dataset.line = String(re.line);
      li.textContent = re.message;
      rowList.appendChild(li);
    });
    const list = this.q("#wiz-errors");
    list.innerHTML = "";
    Object.entries(errors).forEach(([field, message]) => {
      const li = document.createElement("li");
      li.dataset.field = field;
      li.textContent = message;
      list.appendChild(li);
    });
    return Object.keys(errors).length === 0 && rowErrors.length === 0;
  }

  async submit(): Promise<void> {
    if (!this.showValidation()) return;
    const draft = this.draft();
    const { rows } = validateWizard(draft);
    const prior: Record<string, unknown> = { kind: draft.priorKind };
    if (draft.priorKind === "reference") {
      prior.kind = "reference";
      prior.reference = { d: draft.d, edges: draft.referenceEdges };
    }
    try {
      const state = await this.client.createSession({
        d: draft.d,
        observations: rows,
        seed: Number(this.q<HTMLInputElement>("#wiz-seed").value) || 0,
        prior,
        design: {
          mc_samples: draft.mcSamples,
          beta: draft.beta,
          bo_budget: draft.boBudget,
        },
      });
      this.onCreated(state, draft.names);
    } catch (err) {
      const list = this.q("#wiz-errors");
      const li = document.createElement("li");
      li.dataset.field = "server";
      li.textContent = err instanceof Error ? err.message : String(err);
      list.appendChild(li);
    }
  }
}
