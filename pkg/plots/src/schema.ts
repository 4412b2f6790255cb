/**
 * The sweep CSV schema emitted by the simulator.
 *
 * Files start with `# config: {...}` comment lines, then a header row with
 * the fixed column set. Absent rates are empty fields, never zeros.
 */

import fs from "node:fs";
import path from "node:path";
import Papa from "papaparse";

export const CSV_COLUMNS = [
  "scenario_id",
  "source",
  "test",
  "fusion",
  "snr_db",
  "p_fa",
  "p_fa_ci",
  "p_md",
  "p_md_ci",
  "p_mc",
  "p_mc_ci",
  "n_trials",
  "flags",
] as const;

export type Metric = "p_fa" | "p_md" | "p_mc";

export interface CurveRow {
  scenario_id: string;
  source: string;
  test: string;
  fusion: string;
  snr_db: number;
  p_fa: number | null;
  p_fa_ci: number | null;
  p_md: number | null;
  p_md_ci: number | null;
  p_mc: number | null;
  p_mc_ci: number | null;
  n_trials: number | null;
  flags: number | null;
  file: string;
}

export class SchemaError extends Error {}

function parseNumber(raw: string | undefined): number | null {
  if (raw === undefined || raw.trim() === "") return null;
  const v = Number(raw);
  if (!Number.isFinite(v)) {
    throw new SchemaError(`non-numeric value ${JSON.stringify(raw)}`);
  }
  return v;
}

/** Parse one sweep CSV; rejects files missing schema columns by name. */
export function parseCurveCsv(filePath: string): CurveRow[] {
  const text = fs.readFileSync(filePath, "utf-8");
  const parsed = Papa.parse<Record<string, string>>(text, {
    header: true,
    comments: "#",
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const e = parsed.errors[0];
    throw new SchemaError(
      `${path.basename(filePath)}: CSV parse error at row ${e.row}: ${e.message}`,
    );
  }
  const fields = parsed.meta.fields ?? [];
  for (const col of CSV_COLUMNS) {
    if (!fields.includes(col)) {
      throw new SchemaError(
        `${path.basename(filePath)}: missing required column "${col}"`,
      );
    }
  }
  const base = path.basename(filePath);
  return parsed.data.map((r, i) => {
    const snr = parseNumber(r.snr_db);
    if (snr === null) {
      throw new SchemaError(`${base}: row ${i + 1} has empty snr_db`);
    }
    return {
      scenario_id: r.scenario_id ?? "",
      source: r.source ?? "",
      test: r.test ?? "",
      fusion: r.fusion ?? "",
      snr_db: snr,
      p_fa: parseNumber(r.p_fa),
      p_fa_ci: parseNumber(r.p_fa_ci),
      p_md: parseNumber(r.p_md),
      p_md_ci: parseNumber(r.p_md_ci),
      p_mc: parseNumber(r.p_mc),
      p_mc_ci: parseNumber(r.p_mc_ci),
      n_trials: parseNumber(r.n_trials),
      flags: parseNumber(r.flags),
      file: base,
    };
  });
}

/** Parse every *.csv directly under a directory, keeping per-file counts. */
export function loadDirectory(dir: string): {
  rows: CurveRow[];
  files: { file: string; rows: number }[];
} {
  const names = fs
    .readdirSync(dir)
    .filter((n) => n.endsWith(".csv"))
    .sort();
  if (names.length === 0) {
    throw new SchemaError(`no .csv files under ${dir}`);
  }
  const rows: CurveRow[] = [];
  const files: { file: string; rows: number }[] = [];
  for (const name of names) {
    const fileRows = parseCurveCsv(path.join(dir, name));
    rows.push(...fileRows);
    files.push({ file: name, rows: fileRows.length });
  }
  return { rows, files };
}
