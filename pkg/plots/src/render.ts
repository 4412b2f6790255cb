/**
 * Figure rendering entry point: reads every sweep CSV under an input
 * directory, selects the requested family's rows, writes one SVG plus a
 * manifest of the consumed files and row counts. Inputs are never mutated.
 */

import fs from "node:fs";
import path from "node:path";

import { buildSeries, FAMILIES, FAMILY_NAMES } from "./families.js";
import { loadDirectory, SchemaError } from "./schema.js";
import { renderSvg } from "./svg.js";

export interface RenderResult {
  output: string;
  manifest: string;
  series: number;
  bytes: number;
}

export function render(
  inputDir: string,
  familyName: string,
  outputPath: string,
): RenderResult {
  const spec = FAMILIES[familyName];
  if (!spec) {
    throw new SchemaError(
      `unknown figure family "${familyName}" (expected one of ` +
        `${FAMILY_NAMES.join(", ")})`,
    );
  }
  const { rows, files } = loadDirectory(inputDir);
  const series = buildSeries(spec, rows);
  if (series.length === 0) {
    throw new SchemaError(
      `family "${familyName}" selected no rows with a non-empty ` +
        `${spec.metrics.join("/")} value under ${inputDir}`,
    );
  }
  const svg = renderSvg(spec.title, series);
  fs.mkdirSync(path.dirname(path.resolve(outputPath)), { recursive: true });
  fs.writeFileSync(outputPath, svg, "utf-8");
  const manifestPath = outputPath + ".manifest.json";
  const usedRows = rows.filter((r) => spec.select(r)).length;
  const manifest = {
    family: familyName,
    input_dir: path.resolve(inputDir),
    inputs: files,
    rows_selected: usedRows,
    series: series.map((s) => ({ label: s.label, points: s.points.length })),
    output: path.basename(outputPath),
  };
  fs.writeFileSync(manifestPath, JSON.stringify(manifest, null, 1) + "\n",
    "utf-8");
  return {
    output: outputPath,
    manifest: manifestPath,
    series: series.length,
    bytes: Buffer.byteLength(svg),
  };
}
