import { execFileSync } from "child_process";
import { existsSync, mkdtempSync, readFileSync, writeFileSync } from "fs";
import { tmpdir } from "os";
import { join } from "path";
import { describe, expect, it } from "vitest";

import { loadTable, requireColumns, SchemaError } from "../src/csv.js";
import { buildFigure, FIGURE_IDS, FigureId } from "../src/figures.js";
import { renderFigureSvg } from "../src/render.js";

const FIX = join(__dirname, "fixtures");

const INPUTS: Record<FigureId, string> = {
  "g-bound": join(FIX, "gbound.csv"),
  "scaled-optima": join(FIX, "scaling.csv"),
  "chi-ratios": join(FIX, "scaling.csv"),
  "variance-vs-N": join(FIX, "table1.csv"),
  "gamma-range": join(FIX, "gamma_range.csv"),
  "bayes-ratio": join(FIX, "compare.csv"),
};

function seriesLabels(svg: string): string[] {
  return [...svg.matchAll(/data-label="([^"]+)"/g)].map((m) => m[1]);
}

describe("figure rendering from golden fixtures", () => {
  for (const id of FIGURE_IDS) {
    it(`renders ${id}`, () => {
      const svg = renderFigureSvg(id, [INPUTS[id]]);
      expect(svg.startsWith("<svg")).toBe(true);
      expect(svg.includes("</svg>")).toBe(true);
      expect(svg).toContain("<polyline");
    });
  }

  it("is pure: same CSV gives identical SVG", () => {
    const a = renderFigureSvg("g-bound", [INPUTS["g-bound"]]);
    const b = renderFigureSvg("g-bound", [INPUTS["g-bound"]]);
    expect(a).toBe(b);
  });

  it("variance-vs-N separates the six schemes", () => {
    const svg = renderFigureSvg("variance-vs-N", [INPUTS["variance-vs-N"]]);
    const labels = new Set(seriesLabels(svg));
    for (const det of ["adaptive", "heterodyne"]) {
      for (const sq of ["arbitrary", "limited", "coherent"]) {
        expect(labels.has(`${det}-${sq}`)).toBe(true);
      }
    }
    // measured, distinguishable values: adaptive-coherent sits below
    // heterodyne-coherent at every sampled flux in the fixture
    const table = loadTable(INPUTS["variance-vs-N"]);
    const byKey = new Map<string, number[]>();
    for (const row of table.rows) {
      const key = `${row.detection}-${row.squeezing}`;
      byKey.set(key, [...(byKey.get(key) ?? []), Number(row.sigma2_sqrt_n)]);
    }
    const ad = byKey.get("adaptive-coherent")!;
    const het = byKey.get("heterodyne-coherent")!;
    ad.forEach((v, i) => expect(v).toBeLessThan(het[i]));
  });

  it("gamma-range overlays the two analytic bounds and the windows", () => {
    const svg = renderFigureSvg("gamma-range", [INPUTS["gamma-range"]]);
    const labels = seriesLabels(svg);
    expect(labels).toContain("analytic lower bound");
    expect(labels).toContain("analytic upper bound");
    expect(svg).toContain('class="segment"');
  });

  it("bayes-ratio carries both curves", () => {
    const svg = renderFigureSvg("bayes-ratio", [INPUTS["bayes-ratio"]]);
    const labels = seriesLabels(svg);
    expect(labels).toContain("v_linear / v_bayes");
    expect(labels).toContain("mean-square diff / v_bayes");
  });
});

describe("schema validation", () => {
  it("names missing columns", () => {
    const dir = mkdtempSync(join(tmpdir(), "figs-"));
    const bad = join(dir, "bad.csv");
    writeFileSync(bad, "r,wrong\n1,2\n");
    expect(() => buildFigure("g-bound", [bad])).toThrowError(/g_max_over_e3r/);
    expect(() => buildFigure("g-bound", [bad])).toThrowError(/bound/);
  });

  it("rejects empty csv", () => {
    const dir = mkdtempSync(join(tmpdir(), "figs-"));
    const empty = join(dir, "empty.csv");
    writeFileSync(empty, "# only comments\n");
    expect(() => buildFigure("g-bound", [empty])).toThrowError(SchemaError);
  });

  it("rejects header-only csv", () => {
    const dir = mkdtempSync(join(tmpdir(), "figs-"));
    const p = join(dir, "h.csv");
    writeFileSync(p, "r,g_max_over_e3r,bound\n");
    expect(() => buildFigure("g-bound", [p])).toThrowError(/no data/);
  });

  it("requireColumns passes when all present", () => {
    const t = loadTable(INPUTS["g-bound"]);
    expect(() => requireColumns(t, ["r", "bound"])).not.toThrow();
  });
});

describe("command line", () => {
  const cliPath = join(__dirname, "..", "dist", "cli.js");

  it("renders a figure end to end", () => {
    const dir = mkdtempSync(join(tmpdir(), "figs-"));
    const out = join(dir, "g.svg");
    execFileSync("node", [cliPath, "render", "g-bound", "--in", INPUTS["g-bound"], "--out", out]);
    expect(existsSync(out)).toBe(true);
    expect(readFileSync(out, "utf8")).toContain("<svg");
  });

  it("empty csv: nonzero exit, no image", () => {
    const dir = mkdtempSync(join(tmpdir(), "figs-"));
    const empty = join(dir, "empty.csv");
    writeFileSync(empty, "\n");
    const out = join(dir, "never.svg");
    let code = 0;
    try {
      execFileSync("node", [cliPath, "render", "g-bound", "--in", empty, "--out", out], {
        stdio: "pipe",
      });
    } catch (err: any) {
      code = err.status;
    }
    expect(code).not.toBe(0);
    expect(existsSync(out)).toBe(false);
  });

  it("unknown figure id: nonzero exit", () => {
    let code = 0;
    try {
      execFileSync(
        "node", [cliPath, "render", "not-a-figure", "--in", INPUTS["g-bound"], "--out", "/tmp/x.svg"],
        { stdio: "pipe" }
      );
    } catch (err: any) {
      code = err.status;
    }
    expect(code).not.toBe(0);
  });
});

describe("multi-input merge", () => {
  it("concatenates same-schema CSVs", () => {
    const svg = renderFigureSvg("bayes-ratio", [INPUTS["bayes-ratio"], INPUTS["bayes-ratio"]]);
    expect(svg).toContain("<polyline");
  });

  it("rejects schema mismatch between inputs", () => {
    expect(() =>
      buildFigure("bayes-ratio", [INPUTS["bayes-ratio"], INPUTS["g-bound"]])
    ).toThrowError(/cannot merge/);
  });
});
