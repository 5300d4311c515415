import { beforeEach, describe, expect, it } from "vitest";

import { Client } from "../src/api.js";
import type { SessionState } from "../src/api.js";
import { Wizard } from "../src/wizard.js";

const OBS_5x2 = "0.1,0.2\n0.3,0.4\n0.5,0.6\n0.7,0.8\n0.9,1.0";

let root: HTMLElement;
let created: SessionState | null;
let requests: Array<{ url: string; body: unknown }>;

function fakeFetch(): typeof fetch {
  return async (input: RequestInfo | URL, init?: RequestInit): Promise<Response> => {
    const body = init?.body ? JSON.parse(String(init.body)) : undefined;
    requests.push({ url: String(input), body });
    const state = {
      session_id: "abcd1234",
      revision: 0,
      d: (body as { d: number }).d,
      posterior: [],
      edge_marginals: [],
      entropy: 1.0,
      entropy_history: [],
      history: [],
      pending_recommendation: null,
      n_observations: 5,
      config: { observations: [] },
    };
    return new Response(JSON.stringify(state), { status: 201 });
  };
}

let wizard: Wizard;

beforeEach(() => {
  root = document.createElement("div");
  document.body.appendChild(root);
  created = null;
  requests = [];
  wizard = new Wizard(root, new Client("http://fake", fakeFetch()), (state) => {
    created = state;
  });
});

function setObs(text: string): void {
  (root.querySelector("#wiz-obs") as HTMLTextAreaElement).value = text;
}

describe("new session wizard", () => {
  it("creates a d=2 session from five pasted rows", async () => {
    setObs(OBS_5x2);
    await wizard.submit();
    expect(created).not.toBeNull();
    expect(requests).toHaveLength(1);
    const body = requests[0].body as { d: number; observations: number[][] };
    expect(body.d).toBe(2);
    expect(body.observations).toHaveLength(5);
  });

  it("blocks two rows with the observational minimum message", async () => {
    setObs("1,2\n3,4");
    await wizard.submit();
    expect(created).toBeNull();
    expect(requests).toHaveLength(0);
    const err = root.querySelector("#wiz-errors li[data-field='observations']");
    expect(err?.textContent).toContain("n_min=5");
  });

  it("highlights shape mismatches per row", async () => {
    setObs("1,2\n3\n5,6\n7,8\n9,10");
    await wizard.submit();
    expect(requests).toHaveLength(0);
    const rows = [...root.querySelectorAll<HTMLElement>("#row-errors li")];
    expect(rows.map((r) => r.dataset.line)).toEqual(["2"]);
  });

  it("blocks a reference prior without a picked graph", async () => {
    setObs(OBS_5x2);
    const radio = root.querySelector<HTMLInputElement>("input[name=prior][value=reference]")!;
    radio.checked = true;
    radio.dispatchEvent(new Event("change"));
    expect(root.querySelector("#edge-picker")?.classList.contains("hidden")).toBe(false);
    await wizard.submit();
    expect(requests).toHaveLength(0);
    const err = root.querySelector("#wiz-errors li[data-field='prior']");
    expect(err?.textContent).toMatch(/reference graph/);
  });

  it("sends the picked reference graph", async () => {
    setObs(OBS_5x2);
    const radio = root.querySelector<HTMLInputElement>("input[name=prior][value=reference]")!;
    radio.checked = true;
    radio.dispatchEvent(new Event("change"));
    const box = root.querySelector<HTMLInputElement>(
      "#edge-picker input[data-from='0'][data-to='1']",
    )!;
    box.checked = true;
    await wizard.submit();
    expect(requests).toHaveLength(1);
    const prior = (requests[0].body as { prior: { kind: string; reference: { edges: number[][] } } }).prior;
    expect(prior.kind).toBe("reference");
    expect(prior.reference.edges).toEqual([[0, 1]]);
  });
});
