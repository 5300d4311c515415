// SVG rendering for the dashboard panels. Everything is plain DOM so the
// pieces are unit-testable under jsdom and carry no framework dependency.

import type { CurveResponse, EigPoint, GraphJson, PosteriorEntry } from "./api.js";

const SVG_NS = "http://www.w3.org/2000/svg";

function svgEl<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string | number> = {},
): SVGElementTagNameMap[K] {
  const el = document.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) el.setAttribute(k, String(v));
  return el;
}

export function clear(el: Element): void {
  while (el.firstChild) el.removeChild(el.firstChild);
}

/** Tiny DAG drawing: nodes on a circle, arrows for edges. */
export function dagThumbnail(graph: GraphJson, names: string[], size = 72): SVGSVGElement {
  const svg = svgEl("svg", { width: size, height: size, viewBox: `0 0 ${size} ${size}`, class: "dag-thumb" });
  const cx = size / 2;
  const cy = size / 2;
  const r = size / 2 - 12;
  const pos = (i: number): [number, number] => {
    const angle = -Math.PI / 2 + (2 * Math.PI * i) / graph.d;
    return [cx + r * Math.cos(angle), cy + r * Math.sin(angle)];
  };
  const marker = svgEl("marker", {
    id: "arrw",
    viewBox: "0 0 8 8",
    refX: 7,
    refY: 4,
    markerWidth: 6,
    markerHeight: 6,
    orient: "auto-start-reverse",
  });
  const tip = svgEl("path", { d: "M0,0 L8,4 L0,8 z", fill: "#555" });
  marker.appendChild(tip);
  const defs = svgEl("defs");
  defs.appendChild(marker);
  svg.appendChild(defs);
  for (const [p, i] of graph.edges) {
    const [x1, y1] = pos(p);
    const [x2, y2] = pos(i);
    const dx = x2 - x1;
    const dy = y2 - y1;
    const len = Math.hypot(dx, dy) || 1;
    const shrink = 9 / len;
    const line = svgEl("line", {
      x1: x1 + dx * shrink,
      y1: y1 + dy * shrink,
      x2: x2 - dx * shrink,
      y2: y2 - dy * shrink,
      stroke: "#555",
      "stroke-width": 1.5,
      "marker-end": "url(#arrw)",
      class: "dag-edge",
    });
    svg.appendChild(line);
  }
  for (let i = 0; i < graph.d; i += 1) {
    const [x, y] = pos(i);
    svg.appendChild(svgEl("circle", { cx: x, cy: y, r: 8, fill: "#eef", stroke: "#447", class: "dag-node" }));
    const label = svgEl("text", { x, y: y + 3, "text-anchor": "middle", "font-size": 8 });
    label.textContent = names[i] ?? `X${i}`;
    svg.appendChild(label);
  }
  return svg;
}

/** Posterior bar chart with per-graph thumbnails; bars carry data-p attrs. */
export function renderPosteriorBars(
  container: HTMLElement,
  posterior: PosteriorEntry[],
  names: string[],
): void {
  clear(container);
  const ranked = posterior
    .map((entry, index) => ({ entry, index }))
    .sort((a, b) => b.entry.p - a.entry.p);
  for (const { entry, index } of ranked) {
    const row = document.createElement("div");
    row.className = "posterior-row";
    row.dataset.graphIndex = String(index);
    row.dataset.p = entry.p.toPrecision(6);
    row.appendChild(dagThumbnail(entry.graph, names, 48));
    const track = document.createElement("div");
    track.className = "bar-track";
    const fill = document.createElement("div");
    fill.className = "bar-fill";
    fill.style.width = `${(entry.p * 100).toFixed(2)}%`;
    track.appendChild(fill);
    row.appendChild(track);
    const label = document.createElement("span");
    label.className = "bar-label";
    label.textContent = `${(entry.p * 100).toFixed(1)}%`;
    row.appendChild(label);
    container.appendChild(row);
  }
}

/** d x d edge-marginal heatmap; cell (p, i) shades P(p -> i). */
export function renderHeatmap(container: HTMLElement, marginals: number[][], names: string[]): void {
  clear(container);
  const table = document.createElement("table");
  table.className = "heatmap";
  const header = document.createElement("tr");
  header.appendChild(document.createElement("th"));
  names.forEach((name) => {
    const th = document.createElement("th");
    th.textContent = `→${name}`;
    header.appendChild(th);
  });
  table.appendChild(header);
  marginals.forEach((row, p) => {
    const tr = document.createElement("tr");
    const th = document.createElement("th");
    th.textContent = names[p] ?? `X${p}`;
    tr.appendChild(th);
    row.forEach((prob, i) => {
      const td = document.createElement("td");
      td.dataset.from = String(p);
      td.dataset.to = String(i);
      td.dataset.p = prob.toPrecision(4);
      td.textContent = p === i ? "–" : prob.toFixed(2);
      const alpha = Math.min(1, Math.max(0, prob));
      td.style.backgroundColor = p === i ? "#f4f4f4" : `rgba(30, 90, 180, ${alpha.toFixed(3)})`;
      if (alpha > 0.55) td.style.color = "white";
      tr.appendChild(td);
    });
    table.appendChild(tr);
  });
  container.appendChild(table);
}

/** Entropy-over-time sparkline; one polyline point per accepted observation. */
export function renderSparkline(container: HTMLElement, values: number[], width = 220, height = 48): void {
  clear(container);
  const svg = svgEl("svg", { width, height, viewBox: `0 0 ${width} ${height}`, class: "sparkline" });
  if (values.length > 0) {
    const max = Math.max(...values, 1e-9);
    const min = Math.min(...values, 0);
    const span = max - min || 1;
    const step = values.length > 1 ? (width - 12) / (values.length - 1) : 0;
    const pts = values
      .map((v, k) => `${(6 + k * step).toFixed(1)},${(height - 6 - ((v - min) / span) * (height - 12)).toFixed(1)}`)
      .join(" ");
    svg.appendChild(
      svgEl("polyline", { points: pts, fill: "none", stroke: "#2a7", "stroke-width": 1.5, class: "spark-line" }),
    );
    const [lastX, lastY] = pts.split(" ").slice(-1)[0].split(",");
    svg.appendChild(svgEl("circle", { cx: lastX, cy: lastY, r: 2.5, fill: "#2a7", class: "spark-dot" }));
  }
  svg.dataset.points = String(values.length);
  container.appendChild(svg);
}

/** Scatter of evaluated (x, estimate) points, one panel per target.
    Deliberately not interpolated: these are noisy point evaluations. */
export function renderEigScatter(
  container: HTMLElement,
  diagnostics: EigPoint[],
  names: string[],
  width = 240,
  height = 120,
): void {
  clear(container);
  const targets = [...new Set(diagnostics.map((p) => p.target))].sort((a, b) => a - b);
  for (const target of targets) {
    const pts = diagnostics.filter((p) => p.target === target);
    const xs = pts.map((p) => p.x);
    const ys = pts.map((p) => p.eig);
    const [xlo, xhi] = [Math.min(...xs), Math.max(...xs)];
    const [ylo, yhi] = [Math.min(...ys), Math.max(...ys)];
    const xspan = xhi - xlo || 1;
    const yspan = yhi - ylo || 1;
    const panel = document.createElement("figure");
    panel.className = "eig-panel";
    panel.dataset.target = String(target);
    const caption = document.createElement("figcaption");
    caption.textContent = `do(${names[target] ?? `X${target}`} = · )`;
    panel.appendChild(caption);
    const svg = svgEl("svg", { width, height, viewBox: `0 0 ${width} ${height}` });
    for (const p of pts) {
      svg.appendChild(
        svgEl("circle", {
          cx: 8 + ((p.x - xlo) / xspan) * (width - 16),
          cy: height - 8 - ((p.eig - ylo) / yspan) * (height - 16),
          r: 3,
          fill: "#36c",
          "fill-opacity": 0.7,
          class: "eig-point",
        }),
      );
    }
    panel.appendChild(svg);
    container.appendChild(panel);
  }
}

/** GP fit curve: mean path plus a +-2 sd band polygon. */
export function renderCurve(
  container: HTMLElement,
  curve: CurveResponse,
  names: string[],
  width = 260,
  height = 150,
): void {
  clear(container);
  const { grid, mean, band } = curve;
  const upper = mean.map((m, k) => m + band[k]);
  const lower = mean.map((m, k) => m - band[k]);
  const ylo = Math.min(...lower);
  const yhi = Math.max(...upper);
  const xlo = grid[0];
  const xhi = grid[grid.length - 1];
  const sx = (x: number): number => 8 + ((x - xlo) / (xhi - xlo || 1)) * (width - 16);
  const sy = (y: number): number => height - 8 - ((y - ylo) / (yhi - ylo || 1)) * (height - 16);
  const svg = svgEl("svg", { width, height, viewBox: `0 0 ${width} ${height}`, class: "gp-curve" });
  const bandPts = grid
    .map((x, k) => `${sx(x).toFixed(1)},${sy(upper[k]).toFixed(1)}`)
    .concat([...grid].reverse().map((x, k) => `${sx(x).toFixed(1)},${sy(lower[grid.length - 1 - k]).toFixed(1)}`))
    .join(" ");
  svg.appendChild(svgEl("polygon", { points: bandPts, fill: "#8bd", "fill-opacity": 0.35, class: "gp-band" }));
  const meanPts = grid.map((x, k) => `${sx(x).toFixed(1)},${sy(mean[k]).toFixed(1)}`).join(" ");
  svg.appendChild(
    svgEl("polyline", { points: meanPts, fill: "none", stroke: "#247", "stroke-width": 1.6, class: "gp-mean" }),
  );
  const caption = document.createElement("figcaption");
  caption.textContent = `${names[curve.node] ?? `X${curve.node}`} | ${names[curve.parent] ?? `X${curve.parent}`}`;
  const figure = document.createElement("figure");
  figure.className = "curve-panel";
  figure.appendChild(caption);
  figure.appendChild(svg);
  container.appendChild(figure);
}
