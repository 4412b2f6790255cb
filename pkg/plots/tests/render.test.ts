import fs from "node:fs";
import os from "node:os";
import path from "node:path";
import { fileURLToPath } from "node:url";

import { beforeAll, describe, expect, it } from "vitest";

import { buildSeries, FAMILIES, FAMILY_NAMES } from "../src/families.js";
import { render } from "../src/render.js";
import { loadDirectory, parseCurveCsv, SchemaError } from "../src/schema.js";

const HERE = path.dirname(fileURLToPath(import.meta.url));
const FIXTURES = path.join(HERE, "fixtures");
const MAIN = path.join(FIXTURES, "main");
const WORST = path.join(FIXTURES, "worst");
const CHANNELS = path.join(FIXTURES, "channels");

let tmp: string;
beforeAll(() => {
  tmp = fs.mkdtempSync(path.join(os.tmpdir(), "uwauth-plots-"));
});

describe("schema", () => {
  it("parses a sweep csv with comments and empty fields", () => {
    const rows = parseCurveCsv(path.join(MAIN, "step1.csv"));
    expect(rows.length).toBe(9);
    expect(rows[0].test).toBe("step1");
    expect(rows[0].source).toBe("montecarlo");
    expect(rows[0].p_mc).toBeNull(); // absent, not zero
    expect(rows[0].snr_db).toBe(-10);
  });

  it("rejects a csv missing a schema column, naming it", () => {
    const bad = path.join(tmp, "bad.csv");
    fs.writeFileSync(
      bad,
      "scenario_id,source,test,fusion,snr_db,p_fa,p_fa_ci,p_md,p_md_ci," +
        "p_mc,p_mc_ci,n_trials\n" + // flags column dropped
        "x,montecarlo,step1,,0,0.1,0.01,0.2,0.01,,,100\n",
    );
    const dir = path.join(tmp, "baddir");
    fs.mkdirSync(dir, { recursive: true });
    fs.copyFileSync(bad, path.join(dir, "bad.csv"));
    expect(() => parseCurveCsv(bad)).toThrowError(/missing required column "flags"/);
    expect(() => render(dir, "step1_rates", path.join(tmp, "x.svg")))
      .toThrowError(SchemaError);
  });

  it("rejects an empty directory", () => {
    const dir = path.join(tmp, "empty");
    fs.mkdirSync(dir, { recursive: true });
    expect(() => loadDirectory(dir)).toThrowError(/no .csv files/);
  });
});

describe("series selection", () => {
  it("splits montecarlo and analytic sources into separate series", () => {
    const { rows } = loadDirectory(MAIN);
    const series = buildSeries(FAMILIES.step1_rates, rows);
    const sources = new Set(series.map((s) => s.source));
    expect(sources).toEqual(new Set(["montecarlo", "analytic"]));
    // p_fa and p_md per source
    expect(series.length).toBe(4);
    for (const s of series) {
      expect(s.points.length).toBe(9);
      const snrs = s.points.map((p) => p.snr);
      expect(snrs).toEqual([...snrs].sort((a, b) => a - b));
    }
  });

  it("keeps montecarlo whisker widths from the ci columns", () => {
    const { rows } = loadDirectory(MAIN);
    const series = buildSeries(FAMILIES.step2_pmd, rows).filter(
      (s) => s.source === "montecarlo",
    );
    expect(series.length).toBeGreaterThanOrEqual(6); // 3 tests + 3 fusions
    const withCi = series.flatMap((s) => s.points).filter((p) => p.ci !== null);
    expect(withCi.length).toBeGreaterThan(0);
  });
});

describe("render", () => {
  const dirs: Record<string, string> = {
    step1_rates: MAIN,
    step2_pmd: MAIN,
    step2_pfa: MAIN,
    worst_case: WORST,
    identification: MAIN,
    colored_vs_white: CHANNELS,
  };

  it("renders all six families with nonzero sizes and full manifests", () => {
    for (const family of FAMILY_NAMES) {
      const out = path.join(tmp, `${family}.svg`);
      const result = render(dirs[family], family, out);
      expect(result.bytes).toBeGreaterThan(1000);
      expect(fs.statSync(out).size).toBe(result.bytes);
      const manifest = JSON.parse(fs.readFileSync(result.manifest, "utf-8"));
      expect(manifest.family).toBe(family);
      expect(manifest.inputs.length).toBeGreaterThan(0);
      for (const input of manifest.inputs) {
        expect(input.rows).toBeGreaterThan(0);
      }
      expect(manifest.series.length).toBe(result.series);
      expect(manifest.output).toBe(`${family}.svg`);
      const svg = fs.readFileSync(out, "utf-8");
      expect(svg.startsWith("<svg")).toBe(true);
      expect(svg).toContain("SNR (dB)");
    }
  });

  it("renders deterministically (no embedded timestamps)", () => {
    const a = path.join(tmp, "det-a.svg");
    const b = path.join(tmp, "det-b.svg");
    render(MAIN, "step1_rates", a);
    render(MAIN, "step1_rates", b);
    expect(fs.readFileSync(a, "utf-8")).toBe(fs.readFileSync(b, "utf-8"));
  });

  it("does not mutate inputs", () => {
    const before = fs.readFileSync(path.join(MAIN, "step1.csv"), "utf-8");
    render(MAIN, "step1_rates", path.join(tmp, "ro.svg"));
    expect(fs.readFileSync(path.join(MAIN, "step1.csv"), "utf-8")).toBe(before);
  });

  it("separates scenarios in the channel-comparison family", () => {
    const { rows } = loadDirectory(CHANNELS);
    const series = buildSeries(FAMILIES.colored_vs_white, rows);
    const scenarios = new Set(
      series.map((s) => s.label.split(" ").at(-1)),
    );
    expect(scenarios).toEqual(new Set(["colored_q256", "white_q256"]));
  });

  it("errors on an empty selection instead of a blank figure", () => {
    // the worst-case fixture is adversary-only: no identification rates
    expect(() =>
      render(WORST, "identification", path.join(tmp, "none.svg")),
    ).toThrowError(/selected no rows/);
  });

  it("rejects unknown families", () => {
    expect(() => render(MAIN, "nope", path.join(tmp, "x.svg")))
      .toThrowError(/unknown figure family/);
  });
});

describe("cli", () => {
  it("exits 0 on success and 1 on schema errors", async () => {
    const { main } = await import("../src/cli.js");
    const out = path.join(tmp, "cli.svg");
    expect(await main(["--in", MAIN, "--family", "step1_rates", "--out", out]))
      .toBe(0);
    expect(fs.existsSync(out)).toBe(true);
    expect(
      await main(["--in", WORST, "--family", "identification", "--out",
        path.join(tmp, "cli2.svg")]),
    ).toBe(1);
  });
});
