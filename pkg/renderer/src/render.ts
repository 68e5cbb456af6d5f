/**
 * Deterministic SVG rendering of simulator artifacts.
 *
 * Rendering never alters data: the plotted table is carried through
 * verbatim (dump mode re-serializes it byte-for-byte), and the axis
 * extents written into the figure equal the data extents exactly; they
 * are also exposed as data-* attributes on the root element for tests.
 */

import { Table, columnIndex, numericColumn } from "./csv.js";
import { viridis } from "./color.js";
import { DeviceMeta, radToMhz, resonanceCurveMhz } from "./model.js";
import { Annotations, FigureSpec } from "./spec.js";

export interface RunMeta {
  config?: Record<string, unknown>;
  resolved?: {
    device?: DeviceMeta;
    park_flux?: number;
    delta_bar_zero_amplitude?: number;
    delta_bar?: number;
    gap_e?: number;
    gap_f?: number;
    [key: string]: unknown;
  };
  [key: string]: unknown;
}

export interface RenderResult {
  svg: string;
  xExtent: [number, number];
  yExtent: [number, number];
  table: Table;
}

const WIDTH = 680;
const HEIGHT = 520;
const MARGIN = { left: 78, right: 120, top: 34, bottom: 56 };

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function fmt(value: number): string {
  if (value === 0) return "0";
  const magnitude = Math.abs(value);
  if (magnitude >= 1e4 || magnitude < 1e-3) return value.toExponential(2);
  return String(Math.round(value * 1000) / 1000);
}

class LinearScale {
  constructor(
    readonly d0: number,
    readonly d1: number,
    readonly r0: number,
    readonly r1: number,
    readonly log = false
  ) {}

  map(v: number): number {
    const lo = this.log ? Math.log10(this.d0) : this.d0;
    const hi = this.log ? Math.log10(this.d1) : this.d1;
    const x = this.log ? Math.log10(Math.max(v, this.d0)) : v;
    const t = hi === lo ? 0.5 : (x - lo) / (hi - lo);
    return this.r0 + t * (this.r1 - this.r0);
  }

  ticks(count = 5): number[] {
    if (this.log) {
      const lo = Math.ceil(Math.log10(this.d0));
      const hi = Math.floor(Math.log10(this.d1));
      const out = [];
      for (let e = lo; e <= hi; e++) out.push(10 ** e);
      return out.length ? out : [this.d0, this.d1];
    }
    const out = [];
    for (let i = 0; i <= count; i++) {
      out.push(this.d0 + ((this.d1 - this.d0) * i) / count);
    }
    return out;
  }
}

function axisLabel(column: string): string {
  const units: Record<string, string> = {
    amplitude_phi0: "drive amplitude (Phi0)",
    frequency_mhz: "modulation frequency (MHz)",
    frequency1_mhz: "tone 1 frequency (MHz)",
    frequency2_mhz: "tone 2 frequency (MHz)",
    time_ns: "time (ns)",
    cycle: "cycle",
  };
  return units[column] ?? column;
}

function svgDocument(
  body: string[],
  xExtent: [number, number],
  yExtent: [number, number],
  title: string
): string {
  const head =
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
    `viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="Helvetica, Arial, sans-serif" ` +
    `data-x-min="${xExtent[0]}" data-x-max="${xExtent[1]}" ` +
    `data-y-min="${yExtent[0]}" data-y-max="${yExtent[1]}">`;
  return [
    head,
    `<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`,
    `<text x="${MARGIN.left}" y="20" font-size="14">${esc(title)}</text>`,
    ...body,
    "</svg>",
  ].join("\n");
}

function drawAxes(
  body: string[],
  xs: LinearScale,
  ys: LinearScale,
  xLabel: string,
  yLabel: string
) {
  const x0 = MARGIN.left;
  const x1 = WIDTH - MARGIN.right;
  const y0 = HEIGHT - MARGIN.bottom;
  const y1 = MARGIN.top;
  body.push(
    `<line x1="${x0}" y1="${y0}" x2="${x1}" y2="${y0}" stroke="black"/>`,
    `<line x1="${x0}" y1="${y0}" x2="${x0}" y2="${y1}" stroke="black"/>`
  );
  for (const t of xs.ticks()) {
    const px = xs.map(t);
    body.push(
      `<line x1="${px}" y1="${y0}" x2="${px}" y2="${y0 + 5}" stroke="black"/>`,
      `<text x="${px}" y="${y0 + 18}" font-size="10" text-anchor="middle">${fmt(t)}</text>`
    );
  }
  for (const t of ys.ticks()) {
    const py = ys.map(t);
    body.push(
      `<line x1="${x0 - 5}" y1="${py}" x2="${x0}" y2="${py}" stroke="black"/>`,
      `<text x="${x0 - 8}" y="${py + 3}" font-size="10" text-anchor="end">${fmt(t)}</text>`
    );
  }
  body.push(
    `<text x="${(x0 + x1) / 2}" y="${HEIGHT - 12}" font-size="12" text-anchor="middle">${esc(xLabel)}</text>`,
    `<text x="16" y="${(y0 + y1) / 2}" font-size="12" text-anchor="middle" transform="rotate(-90 16 ${(y0 + y1) / 2})">${esc(yLabel)}</text>`
  );
}

function uniqueSorted(values: number[]): number[] {
  return [...new Set(values)].sort((a, b) => a - b);
}

function cellEdges(centers: number[]): number[] {
  const edges = [centers[0]];
  for (let i = 0; i + 1 < centers.length; i++) {
    edges.push((centers[i] + centers[i + 1]) / 2);
  }
  edges.push(centers[centers.length - 1]);
  return edges;
}

export function renderHeatmap(
  table: Table,
  meta: RunMeta | null,
  spec: FigureSpec
): RenderResult {
  const observable = spec.observable ?? "p_e";
  const xCol = table.columns[0];
  const yCol = table.columns[1];
  const xv = numericColumn(table, xCol);
  const yv = numericColumn(table, yCol);
  const vv = numericColumn(table, observable);
  if (table.rows.length === 0) {
    throw new Error("empty grid: no data rows");
  }
  const xs = uniqueSorted(xv);
  const ys = uniqueSorted(yv);
  if (xs.length * ys.length !== table.rows.length) {
    throw new Error(
      `grid is not dense: ${xs.length} x ${ys.length} axes vs ${table.rows.length} rows`
    );
  }
  const xExtent: [number, number] = [xs[0], xs[xs.length - 1]];
  const yExtent: [number, number] = [ys[0], ys[ys.length - 1]];
  const sx = new LinearScale(xExtent[0], xExtent[1], MARGIN.left, WIDTH - MARGIN.right);
  const sy = new LinearScale(yExtent[0], yExtent[1], HEIGHT - MARGIN.bottom, MARGIN.top);

  const grid = new Map<string, number>();
  for (let i = 0; i < table.rows.length; i++) {
    grid.set(`${xv[i]}|${yv[i]}`, vv[i]);
  }
  let vmin = Infinity;
  let vmax = -Infinity;
  for (const v of vv) {
    if (Number.isFinite(v)) {
      vmin = Math.min(vmin, v);
      vmax = Math.max(vmax, v);
    }
  }
  if (!Number.isFinite(vmin)) {
    throw new Error("empty grid: no finite values");
  }
  const span = vmax > vmin ? vmax - vmin : 1;

  const body: string[] = [];
  const ex = cellEdges(xs);
  const ey = cellEdges(ys);
  for (let j = 0; j < ys.length; j++) {
    for (let i = 0; i < xs.length; i++) {
      const v = grid.get(`${xs[i]}|${ys[j]}`);
      if (v === undefined || !Number.isFinite(v)) continue;
      const px = sx.map(ex[i]);
      const pw = sx.map(ex[i + 1]) - px;
      const py = sy.map(ey[j + 1]);
      const ph = sy.map(ey[j]) - py;
      body.push(
        `<rect x="${px}" y="${py}" width="${pw}" height="${ph}" ` +
          `fill="${viridis((v - vmin) / span)}"/>`
      );
    }
  }

  drawColorbar(body, vmin, vmax, observable);
  drawAxes(body, sx, sy, axisLabel(xCol), axisLabel(yCol));
  drawHeatmapOverlays(body, sx, sy, xs, xCol, meta, spec.annotations ?? {});

  const svg = svgDocument(body, xExtent, yExtent, `${observable} map`);
  return { svg, xExtent, yExtent, table };
}

function drawColorbar(body: string[], vmin: number, vmax: number, label: string) {
  const x = WIDTH - MARGIN.right + 30;
  const y0 = MARGIN.top;
  const h = HEIGHT - MARGIN.top - MARGIN.bottom;
  const steps = 64;
  for (let i = 0; i < steps; i++) {
    const v = i / (steps - 1);
    const py = y0 + h - ((i + 1) * h) / steps;
    body.push(
      `<rect x="${x}" y="${py}" width="16" height="${h / steps + 0.5}" fill="${viridis(v)}"/>`
    );
  }
  body.push(
    `<text x="${x + 20}" y="${y0 + h}" font-size="10">${fmt(vmin)}</text>`,
    `<text x="${x + 20}" y="${y0 + 8}" font-size="10">${fmt(vmax)}</text>`,
    `<text x="${x}" y="${y0 - 8}" font-size="11">${esc(label)}</text>`
  );
}

function drawHeatmapOverlays(
  body: string[],
  sx: LinearScale,
  sy: LinearScale,
  xs: number[],
  xCol: string,
  meta: RunMeta | null,
  ann: Annotations
) {
  const resolved = meta?.resolved;
  const device = resolved?.device;
  if (!resolved || !device) return;

  if (xCol === "amplitude_phi0" && ann.resonanceOrders?.length) {
    const park = resolved.park_flux ?? 0;
    const alpha = ann.alpha ?? 2;
    for (const order of ann.resonanceOrders) {
      const pts: string[] = [];
      for (const a of xs) {
        const fm = resonanceCurveMhz(device, park, a, order, alpha);
        if (fm < sy.d0 || fm > sy.d1) {
          continue;
        }
        pts.push(`${sx.map(a)},${sy.map(fm)}`);
      }
      if (pts.length >= 2) {
        body.push(
          `<polyline points="${pts.join(" ")}" fill="none" stroke="white" ` +
            `stroke-width="1.2" stroke-dasharray="5,3" data-overlay="n${order}"/>`
        );
        body.push(
          `<text x="${sx.map(xs[Math.floor(xs.length / 2)]) + 4}" ` +
            `y="${sy.map(resonanceCurveMhz(device, park, xs[Math.floor(xs.length / 2)], order, alpha)) - 4}" ` +
            `font-size="10" fill="white">n=${order}</text>`
        );
      }
    }
  }

  if (xCol === "frequency1_mhz" && ann.twoToneLines) {
    const lines: [string, number][] = [];
    if (resolved.gap_e !== undefined) lines.push(["e", radToMhz(resolved.gap_e)]);
    if (resolved.gap_f !== undefined) lines.push(["f", radToMhz(resolved.gap_f)]);
    for (const [tag, gap] of lines) {
      const color = tag === "e" ? "white" : "orange";
      const half = gap / 2;
      if (half >= sx.d0 && half <= sx.d1) {
        body.push(
          `<line x1="${sx.map(half)}" y1="${sy.map(sy.d0)}" x2="${sx.map(half)}" ` +
            `y2="${sy.map(sy.d1)}" stroke="${color}" stroke-dasharray="5,3" data-overlay="${tag}-vertical"/>`
        );
      }
      if (half >= sy.d0 && half <= sy.d1) {
        body.push(
          `<line x1="${sx.map(sx.d0)}" y1="${sy.map(half)}" x2="${sx.map(sx.d1)}" ` +
            `y2="${sy.map(half)}" stroke="${color}" stroke-dasharray="5,3" data-overlay="${tag}-horizontal"/>`
        );
      }
      // Anti-diagonal w1 + w2 = gap, clipped to the plot window.
      const pts: string[] = [];
      for (const x of [Math.max(sx.d0, gap - sy.d1), Math.min(sx.d1, gap - sy.d0)]) {
        const y = gap - x;
        if (x >= sx.d0 - 1e-9 && x <= sx.d1 + 1e-9 && y >= sy.d0 - 1e-9 && y <= sy.d1 + 1e-9) {
          pts.push(`${sx.map(x)},${sy.map(y)}`);
        }
      }
      if (pts.length === 2) {
        body.push(
          `<polyline points="${pts.join(" ")}" fill="none" stroke="${color}" ` +
            `stroke-dasharray="5,3" data-overlay="${tag}-antidiagonal"/>`
        );
      }
    }
    if (ann.rhombus && resolved.gap_e !== undefined && resolved.gap_f !== undefined) {
      const w1 = radToMhz(resolved.gap_e) / 2;
      const w2 = radToMhz(resolved.gap_f) - w1;
      body.push(
        `<circle cx="${sx.map(w1)}" cy="${sy.map(w2)}" r="6" fill="none" ` +
          `stroke="red" stroke-width="1.5" data-overlay="rhombus"/>`
      );
    }
  }
}

export function renderTrace(table: Table, spec: FigureSpec): RenderResult {
  const xCol = table.columns[0];
  const xv = numericColumn(table, xCol);
  if (table.rows.length === 0) {
    throw new Error("empty trace: no data rows");
  }
  let series = spec.series;
  if (!series || series.length === 0) {
    if (spec.kind === "multi_trace") {
      series = ["p_g", "p_e", "p_f", "theory_p_e"].filter((c) =>
        table.columns.includes(c)
      );
    } else {
      series = ["p_e", "theory_p_e"].filter((c) => table.columns.includes(c));
    }
  }
  if (series.length === 0) {
    throw new Error("no plottable series found");
  }
  const data = series.map((name) => numericColumn(table, name));
  const log = spec.yScale === "log";

  const xExtent: [number, number] = [Math.min(...xv), Math.max(...xv)];
  let yMin = Infinity;
  let yMax = -Infinity;
  let yFloor = Infinity;
  for (const column of data) {
    for (const v of column) {
      if (!Number.isFinite(v)) continue;
      yMin = Math.min(yMin, v);
      yMax = Math.max(yMax, v);
      if (v > 0) yFloor = Math.min(yFloor, v);
    }
  }
  const yExtent: [number, number] = [yMin, yMax];
  const yLo = log ? (Number.isFinite(yFloor) ? yFloor : 1e-12) : yMin;
  const sx = new LinearScale(xExtent[0], xExtent[1], MARGIN.left, WIDTH - MARGIN.right);
  const sy = new LinearScale(yLo, yMax, HEIGHT - MARGIN.bottom, MARGIN.top, log);

  const colors = ["#1f77b4", "#d62728", "#2ca02c", "#7f7f7f", "#9467bd"];
  const body: string[] = [];
  drawAxes(body, sx, sy, axisLabel(xCol), log ? "population (log)" : "population");
  series.forEach((name, k) => {
    const pts: string[] = [];
    for (let i = 0; i < xv.length; i++) {
      const v = data[k][i];
      if (!Number.isFinite(v) || (log && v <= 0)) continue;
      pts.push(`${sx.map(xv[i])},${sy.map(v)}`);
    }
    body.push(
      `<polyline points="${pts.join(" ")}" fill="none" stroke="${colors[k % colors.length]}" ` +
        `stroke-width="1.4" data-series="${esc(name)}"/>`,
      `<text x="${WIDTH - MARGIN.right + 10}" y="${MARGIN.top + 14 + 16 * k}" ` +
        `font-size="11" fill="${colors[k % colors.length]}">${esc(name)}</text>`
    );
  });

  const svg = svgDocument(body, xExtent, yExtent, `${series.join(", ")} vs ${xCol}`);
  return { svg, xExtent, yExtent, table };
}

export function render(
  table: Table,
  meta: RunMeta | null,
  spec: FigureSpec
): RenderResult {
  if (spec.kind === "heatmap") {
    return renderHeatmap(table, meta, spec);
  }
  return renderTrace(table, spec);
}
