/**
 * The six figure families and their row selections.
 *
 * A family picks rows by test/fusion and plots one metric (or both error
 * rates); series split further by scenario and source so Monte Carlo points
 * and closed-form lines overlay.
 */

import type { CurveRow, Metric } from "./schema.js";

export interface FamilySpec {
  name: string;
  title: string;
  metrics: Metric[];
  select: (row: CurveRow) => boolean;
}

const STEP2_TESTS = new Set(["test2a", "test2b", "test2c"]);

export const FAMILIES: Record<string, FamilySpec> = {
  step1_rates: {
    name: "step1_rates",
    title: "Distance-bounding test: error rates vs SNR",
    metrics: ["p_fa", "p_md"],
    select: (r) => r.test === "step1",
  },
  step2_pmd: {
    name: "step2_pmd",
    title: "Outlier tests and fusion rules: missed detection vs SNR",
    metrics: ["p_md"],
    select: (r) => STEP2_TESTS.has(r.test) || r.test === "step2",
  },
  step2_pfa: {
    name: "step2_pfa",
    title: "Outlier tests and fusion rules: false alarm vs SNR",
    metrics: ["p_fa"],
    select: (r) => STEP2_TESTS.has(r.test) || r.test === "step2",
  },
  worst_case: {
    name: "worst_case",
    title: "Strategic adversary placement: per-test missed detection",
    metrics: ["p_md"],
    select: (r) => STEP2_TESTS.has(r.test),
  },
  identification: {
    name: "identification",
    title: "Transmitter identification: misclassification vs SNR",
    metrics: ["p_mc"],
    select: (r) => r.p_mc !== null,
  },
  colored_vs_white: {
    name: "colored_vs_white",
    title: "Channel comparison: final decision error rates per scenario",
    metrics: ["p_fa", "p_md"],
    select: (r) =>
      r.test === "step1" || r.test === "test2b" || r.test === "final",
  },
};

export const FAMILY_NAMES = Object.keys(FAMILIES);

export interface SeriesPoint {
  snr: number;
  value: number;
  ci: number | null;
}

export interface Series {
  label: string;
  source: string; // "montecarlo" drawn as points+whiskers, else a line
  points: SeriesPoint[];
}

/** Group selected rows into labeled series, one per
 * (scenario, test, fusion, source, metric) with non-empty values. */
export function buildSeries(spec: FamilySpec, rows: CurveRow[]): Series[] {
  const groups = new Map<string, { meta: CurveRow; metric: Metric }>();
  const points = new Map<string, SeriesPoint[]>();
  for (const row of rows) {
    if (!spec.select(row)) continue;
    for (const metric of spec.metrics) {
      const value = row[metric];
      if (value === null) continue;
      const key = [row.scenario_id, row.test, row.fusion, row.source, metric]
        .join("|");
      if (!groups.has(key)) {
        groups.set(key, { meta: row, metric });
        points.set(key, []);
      }
      const ci = row[`${metric}_ci` as const] as number | null;
      points.get(key)!.push({ snr: row.snr_db, value, ci });
    }
  }
  const series: Series[] = [];
  for (const [key, { meta, metric }] of [...groups.entries()].sort()) {
    const pts = points
      .get(key)!
      .slice()
      .sort((a, b) => a.snr - b.snr);
    const parts = [meta.test];
    if (meta.fusion) parts.push(meta.fusion);
    if (spec.metrics.length > 1) parts.push(metric);
    parts.push(meta.source);
    if (meta.scenario_id) parts.push(meta.scenario_id);
    series.push({ label: parts.join(" "), source: meta.source, points: pts });
  }
  return series;
}
