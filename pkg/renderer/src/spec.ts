import { readFileSync } from "fs";

export type PanelKind = "heatmap" | "trace" | "multi_trace";

export interface Annotations {
  /** Sideband orders to overlay as resonance curves on single-tone maps. */
  resonanceOrders?: number[];
  alpha?: number;
  /** Draw the e/f strip-line overlays on two-tone maps. */
  twoToneLines?: boolean;
  /** Mark the rhombus point (both transitions bridged) on two-tone maps. */
  rhombus?: boolean;
}

export interface FigureSpec {
  kind: PanelKind;
  data: string;
  metadata?: string;
  output: string;
  observable?: string;
  yScale?: "linear" | "log";
  series?: string[];
  annotations?: Annotations;
  dump?: string;
}

const KINDS: PanelKind[] = ["heatmap", "trace", "multi_trace"];

export function validateSpec(raw: unknown): FigureSpec {
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new Error("figure spec must be a JSON object");
  }
  const spec = raw as Record<string, unknown>;
  if (!KINDS.includes(spec.kind as PanelKind)) {
    throw new Error(`kind must be one of ${KINDS.join(", ")}`);
  }
  for (const key of ["data", "output"]) {
    if (typeof spec[key] !== "string" || spec[key] === "") {
      throw new Error(`'${key}' must be a non-empty path`);
    }
  }
  if (spec.yScale !== undefined && spec.yScale !== "linear" && spec.yScale !== "log") {
    throw new Error("yScale must be 'linear' or 'log'");
  }
  return spec as unknown as FigureSpec;
}

export function loadSpec(path: string): FigureSpec {
  return validateSpec(JSON.parse(readFileSync(path, "utf-8")));
}
