import { mkdtempSync, readFileSync, writeFileSync } from "fs";
import { tmpdir } from "os";
import { join } from "path";
import { fileURLToPath } from "url";
import { describe, expect, it } from "vitest";

import { numericColumn, parseCsv, serializeCsv } from "../src/csv.js";
import { main } from "../src/main.js";
import { resonanceCurveMhz } from "../src/model.js";
import { render, RunMeta } from "../src/render.js";
import { FigureSpec } from "../src/spec.js";

const FIXTURES = fileURLToPath(new URL("./fixtures", import.meta.url));

function loadFixture(kind: string) {
  const table = parseCsv(readFileSync(join(FIXTURES, `${kind}.csv`), "utf-8"));
  const meta = JSON.parse(
    readFileSync(join(FIXTURES, `${kind}.meta.json`), "utf-8")
  ) as RunMeta;
  return { table, meta };
}

describe("heatmap rendering", () => {
  const spec: FigureSpec = {
    kind: "heatmap",
    data: "single_tone_scan.csv",
    output: "map.svg",
    observable: "p_e",
    annotations: { resonanceOrders: [1, 2, 3], alpha: 2 },
  };

  it("axis extents equal the data extents exactly", () => {
    const { table, meta } = loadFixture("single_tone_scan");
    const result = render(table, meta, spec);
    const amps = numericColumn(table, "amplitude_phi0");
    const freqs = numericColumn(table, "frequency_mhz");
    expect(result.xExtent).toEqual([Math.min(...amps), Math.max(...amps)]);
    expect(result.yExtent).toEqual([Math.min(...freqs), Math.max(...freqs)]);
    expect(result.svg).toContain(`data-x-min="${result.xExtent[0]}"`);
    expect(result.svg).toContain(`data-y-max="${result.yExtent[1]}"`);
  });

  it("is deterministic", () => {
    const { table, meta } = loadFixture("single_tone_scan");
    const a = render(table, meta, spec).svg;
    const b = render(table, meta, spec).svg;
    expect(a).toBe(b);
  });

  it("draws the requested resonance overlays", () => {
    const { table, meta } = loadFixture("single_tone_scan");
    const svg = render(table, meta, spec).svg;
    for (const n of [1, 2, 3]) {
      expect(svg).toContain(`data-overlay="n${n}"`);
    }
  });

  it("overlay curves land within one cell of the detected strip centers", () => {
    const { table, meta } = loadFixture("single_tone_scan");
    const summary = JSON.parse(
      readFileSync(join(FIXTURES, "single_tone_scan.summary.json"), "utf-8")
    );
    const freqs = numericColumn(table, "frequency_mhz");
    const unique = [...new Set(freqs)].sort((a, b) => a - b);
    const cell = unique[1] - unique[0];
    const device = meta.resolved!.device!;
    const park = (meta.resolved!.park_flux as number) ?? 0;
    let checked = 0;
    for (const strip of summary.strips) {
      if (strip.order > 3) continue;
      const overlayAtZero = resonanceCurveMhz(device, park, 0, strip.order, 2);
      expect(
        Math.abs(overlayAtZero - strip.center_zero_amplitude_mhz)
      ).toBeLessThanOrEqual(cell);
      checked += 1;
    }
    expect(checked).toBeGreaterThanOrEqual(3);
  });

  it("rejects a grid with a missing observable column", () => {
    const { table, meta } = loadFixture("single_tone_scan");
    expect(() =>
      render(table, meta, { ...spec, observable: "p_x" })
    ).toThrow(/missing column 'p_x'/);
  });

  it("rejects an empty grid", () => {
    const { table, meta } = loadFixture("single_tone_scan");
    expect(() =>
      render({ columns: table.columns, rows: [] }, meta, spec)
    ).toThrow(/empty/);
  });
});

describe("trace rendering", () => {
  it("renders a log-scale trace spanning decades", () => {
    const { table, meta } = loadFixture("time_trace");
    const result = render(table, meta, {
      kind: "trace",
      data: "time_trace.csv",
      output: "trace.svg",
      yScale: "log",
    });
    expect(result.svg).toContain('data-series="p_e"');
    expect(result.svg).toContain('data-series="theory_p_e"');
    const pe = numericColumn(table, "p_e");
    expect(result.yExtent[1]).toBe(Math.max(...pe, ...numericColumn(table, "theory_p_e")));
  });
});

describe("cli entry", () => {
  it("renders and dumps byte-identical plotted data", () => {
    const dir = mkdtempSync(join(tmpdir(), "render-"));
    const specPath = join(dir, "fig.json");
    const spec = {
      kind: "heatmap",
      data: join(FIXTURES, "single_tone_scan.csv"),
      metadata: join(FIXTURES, "single_tone_scan.meta.json"),
      output: join(dir, "map.svg"),
      observable: "p_e",
      annotations: { resonanceOrders: [1, 2, 3] },
      dump: join(dir, "dump.csv"),
    };
    writeFileSync(specPath, JSON.stringify(spec));
    const code = main(["--spec", specPath]);
    expect(code).toBe(0);
    const dumped = readFileSync(join(dir, "dump.csv"));
    const input = readFileSync(join(FIXTURES, "single_tone_scan.csv"));
    expect(dumped.equals(input)).toBe(true);
    expect(readFileSync(join(dir, "map.svg"), "utf-8")).toContain("<svg");
  });

  it("fails cleanly on a bad spec", () => {
    const dir = mkdtempSync(join(tmpdir(), "render-"));
    const specPath = join(dir, "fig.json");
    writeFileSync(specPath, JSON.stringify({ kind: "piechart" }));
    expect(main(["--spec", specPath])).toBe(1);
    expect(main([])).toBe(2);
  });

  it("round-trips the serializer on the dump itself", () => {
    const text = readFileSync(join(FIXTURES, "time_trace.csv"), "utf-8");
    expect(serializeCsv(parseCsv(text))).toBe(text);
  });
});
