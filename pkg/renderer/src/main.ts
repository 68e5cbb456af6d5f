#!/usr/bin/env node
/**
 * render --spec <figure.json> [--dump <out.csv>]
 *
 * Reads the simulator's CSV/JSON artifacts and writes a deterministic SVG.
 * Dump mode re-emits the plotted table so it can be byte-compared with the
 * input payload (rendering never alters data).
 */

import { mkdirSync, readFileSync, writeFileSync } from "fs";
import { dirname } from "path";

import { parseCsv, serializeCsv } from "./csv.js";
import { render, RunMeta } from "./render.js";
import { loadSpec } from "./spec.js";

function parseArgs(argv: string[]): { spec: string; dump?: string } {
  let spec: string | undefined;
  let dump: string | undefined;
  for (let i = 0; i < argv.length; i++) {
    if (argv[i] === "--spec") {
      spec = argv[++i];
    } else if (argv[i] === "--dump") {
      dump = argv[++i];
    } else {
      throw new Error(`unknown argument '${argv[i]}'`);
    }
  }
  if (!spec) {
    throw new Error("usage: render --spec <figure.json> [--dump <out.csv>]");
  }
  return { spec, dump };
}

export function main(argv: string[]): number {
  let args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    return 2;
  }
  try {
    const spec = loadSpec(args.spec);
    const table = parseCsv(readFileSync(spec.data, "utf-8"));
    const meta: RunMeta | null = spec.metadata
      ? (JSON.parse(readFileSync(spec.metadata, "utf-8")) as RunMeta)
      : null;
    const result = render(table, meta, spec);
    mkdirSync(dirname(spec.output), { recursive: true });
    writeFileSync(spec.output, result.svg);
    console.log(`wrote ${spec.output}`);
    const dumpPath = args.dump ?? spec.dump;
    if (dumpPath) {
      mkdirSync(dirname(dumpPath), { recursive: true });
      writeFileSync(dumpPath, serializeCsv(result.table));
      console.log(`wrote ${dumpPath}`);
    }
    return 0;
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    return 1;
  }
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("main.js") || entry.endsWith("render")) {
  process.exit(main(process.argv.slice(2)));
}
