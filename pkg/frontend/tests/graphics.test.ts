import { beforeEach, describe, expect, it } from "vitest";

import {
  dagThumbnail,
  renderCurve,
  renderEigScatter,
  renderHeatmap,
  renderPosteriorBars,
  renderSparkline,
} from "../src/graphics.js";
import type { PosteriorEntry } from "../src/api.js";

const NAMES = ["X0", "X1"];

const POSTERIOR: PosteriorEntry[] = [
  { graph: { d: 2, edges: [] }, p: 0.1 },
  { graph: { d: 2, edges: [[1, 0]] }, p: 0.2 },
  { graph: { d: 2, edges: [[0, 1]] }, p: 0.7 },
];

let holder: HTMLElement;

beforeEach(() => {
  holder = document.createElement("div");
  document.body.appendChild(holder);
});

describe("renderPosteriorBars", () => {
  it("renders one row per graph, ranked by probability, summing to one", () => {
    renderPosteriorBars(holder, POSTERIOR, NAMES);
    const rows = [...holder.querySelectorAll<HTMLElement>(".posterior-row")];
    expect(rows).toHaveLength(3);
    const ps = rows.map((r) => Number(r.dataset.p));
    expect(ps[0]).toBeGreaterThanOrEqual(ps[1]);
    expect(ps.reduce((a, b) => a + b, 0)).toBeCloseTo(1.0, 6);
    expect(rows[0].dataset.graphIndex).toBe("2");
    expect(rows[0].querySelector(".bar-label")?.textContent).toBe("70.0%");
  });

  it("draws a thumbnail with the right edge count", () => {
    const svg = dagThumbnail({ d: 2, edges: [[0, 1]] }, NAMES);
    expect(svg.querySelectorAll(".dag-node")).toHaveLength(2);
    expect(svg.querySelectorAll(".dag-edge")).toHaveLength(1);
  });
});

describe("renderHeatmap", () => {
  it("shades off-diagonal cells with probabilities", () => {
    renderHeatmap(
      holder,
      [
        [0, 0.75],
        [0.25, 0],
      ],
      NAMES,
    );
    const cell = holder.querySelector<HTMLElement>("td[data-from='0'][data-to='1']");
    expect(cell?.dataset.p).toBe("0.7500");
    expect(cell?.textContent).toBe("0.75");
    const diag = holder.querySelector<HTMLElement>("td[data-from='0'][data-to='0']");
    expect(diag?.textContent).toBe("–");
  });
});

describe("renderSparkline", () => {
  it("tracks the number of points", () => {
    renderSparkline(holder, [1.0, 0.7, 0.2]);
    const svg = holder.querySelector<SVGSVGElement>("svg.sparkline");
    expect(svg?.dataset.points).toBe("3");
    expect(svg?.querySelector(".spark-line")?.getAttribute("points")?.split(" ")).toHaveLength(3);
  });

  it("renders an empty frame for no history", () => {
    renderSparkline(holder, []);
    const svg = holder.querySelector<SVGSVGElement>("svg.sparkline");
    expect(svg?.dataset.points).toBe("0");
    expect(svg?.querySelector(".spark-line")).toBeNull();
  });
});

describe("renderEigScatter", () => {
  it("renders one panel per target and a point per evaluation", () => {
    renderEigScatter(
      holder,
      [
        { target: 0, x: -1, eig: -0.5, order: 0 },
        { target: 0, x: 1, eig: -0.3, order: 1 },
        { target: 1, x: 0, eig: -0.4, order: 0 },
      ],
      NAMES,
    );
    const panels = [...holder.querySelectorAll<HTMLElement>(".eig-panel")];
    expect(panels.map((p) => p.dataset.target)).toEqual(["0", "1"]);
    expect(panels[0].querySelectorAll(".eig-point")).toHaveLength(2);
    expect(panels[1].querySelectorAll(".eig-point")).toHaveLength(1);
  });
});

describe("renderCurve", () => {
  it("draws a mean path and a band polygon", () => {
    renderCurve(
      holder,
      {
        graph: { d: 2, edges: [[0, 1]] },
        node: 1,
        parent: 0,
        grid: [-1, 0, 1],
        mean: [0.1, 0.5, 0.2],
        band: [0.3, 0.2, 0.4],
      },
      NAMES,
    );
    expect(holder.querySelector(".gp-mean")).not.toBeNull();
    expect(holder.querySelector(".gp-band")).not.toBeNull();
    expect(holder.querySelector("figcaption")?.textContent).toBe("X1 | X0");
    const meanPts = holder.querySelector(".gp-mean")?.getAttribute("points")?.split(" ");
    expect(meanPts).toHaveLength(3);
    const bandPts = holder.querySelector(".gp-band")?.getAttribute("points")?.split(" ");
    expect(bandPts).toHaveLength(6); // upper + reversed lower
  });
});
