import { loadTable, num, numStrict, requireColumns, SchemaError, Table } from "./csv.js";
import { ChartSpec, PALETTE, Series } from "./svg.js";

export const FIGURE_IDS = [
  "g-bound",
  "scaled-optima",
  "chi-ratios",
  "variance-vs-N",
  "gamma-range",
  "bayes-ratio",
] as const;
export type FigureId = (typeof FIGURE_IDS)[number];

const RESULT_COLUMNS = [
  "scheme", "detection", "n_over_kappa", "gamma_over_kappa", "r",
  "chi_over_kappa", "delta", "estimator", "variance", "std_error",
];

function sortByX(points: [number, number][]): [number, number][] {
  return [...points].sort((a, b) => a[0] - b[0]);
}

/** Optimum rows of a scaling CSV (the optimizer's per-point winners). */
function optimumRows(table: Table) {
  requireColumns(table, [...RESULT_COLUMNS, "optimum"]);
  const rows = table.rows.filter((r) => numStrict(r, "optimum") === 1);
  if (rows.length === 0) {
    throw new SchemaError(`${table.path}: no rows flagged optimum=1`);
  }
  return rows;
}

function gBound(table: Table): ChartSpec {
  requireColumns(table, ["r", "g_max_over_e3r", "bound"]);
  const curve = sortByX(
    table.rows.map((r) => [numStrict(r, "r"), numStrict(r, "g_max_over_e3r")])
  );
  const bound = sortByX(table.rows.map((r) => [numStrict(r, "r"), numStrict(r, "bound")]));
  return {
    title: "Noise information bound",
    xLabel: "squeezing r",
    yLabel: "max over LO angle of g / e^(3r)",
    xKind: "linear",
    yKind: "linear",
    series: [
      { label: "max g / e^(3r)", points: curve, color: PALETTE[0], kind: "line" },
      { label: "bound 1/4", points: bound, color: PALETTE[1], kind: "dashed" },
    ],
  };
}

function scaledOptima(table: Table): ChartSpec {
  const rows = optimumRows(table);
  const defs: [string, (r: Record<string, string>, n: number) => number][] = [
    ["sigma^2 / (kappa/N)^(5/8)", (r, n) => numStrict(r, "variance") * Math.pow(n, 0.625)],
    ["e^r / (N/kappa)^(1/8)", (r, n) => Math.exp(numStrict(r, "r")) / Math.pow(n, 0.125)],
    ["(gamma/kappa) / (N/kappa)^(3/4)", (r, n) => numStrict(r, "gamma_over_kappa") / Math.pow(n, 0.75)],
    ["(chi/kappa) / (N/kappa)^(5/8)", (r, n) => numStrict(r, "chi_over_kappa") / Math.pow(n, 0.625)],
    ["delta / (N/kappa)^(1/4)", (r, n) => numStrict(r, "delta") / Math.pow(n, 0.25)],
  ];
  const series: Series[] = defs.map(([label, fn], i) => ({
    label,
    points: sortByX(rows.map((r) => [numStrict(r, "n_over_kappa"), fn(r, numStrict(r, "n_over_kappa"))])),
    color: PALETTE[i],
    kind: i === 4 ? "marker" : "line",
    marker: "cross",
  }));
  return {
    title: "Optimal parameters against their predicted power laws",
    xLabel: "N/kappa",
    yLabel: "scaled optimum",
    xKind: "log",
    yKind: "log",
    series,
  };
}

function chiRatios(table: Table): ChartSpec {
  const rows = optimumRows(table);
  const kappaOverSigma2: [number, number][] = [];
  const gammaOverEr: [number, number][] = [];
  for (const r of rows) {
    const n = numStrict(r, "n_over_kappa");
    const chi = numStrict(r, "chi_over_kappa");
    kappaOverSigma2.push([n, 1.0 / numStrict(r, "variance") / chi]);
    gammaOverEr.push([n, numStrict(r, "gamma_over_kappa") / Math.exp(numStrict(r, "r")) / chi]);
  }
  return {
    title: "Filter bandwidth against its two governing rates",
    xLabel: "N/kappa",
    yLabel: "ratio to chi",
    xKind: "log",
    yKind: "log",
    series: [
      { label: "(kappa/sigma^2) / chi", points: sortByX(kappaOverSigma2), color: PALETTE[0], kind: "line" },
      { label: "(gamma/e^r) / chi", points: sortByX(gammaOverEr), color: PALETTE[1], kind: "dashed" },
    ],
  };
}

function varianceVsN(table: Table): ChartSpec {
  requireColumns(table, [
    "detection", "squeezing", "n_over_kappa", "sigma2_sqrt_n", "predicted",
  ]);
  const keys = new Map<string, [number, number][]>();
  const predicted = new Map<string, [number, number][]>();
  for (const row of table.rows) {
    const key = `${row.detection}-${row.squeezing}`;
    const n = numStrict(row, "n_over_kappa");
    const v = num(row, "sigma2_sqrt_n");
    if (v === null) continue; // per-cell failure flagged upstream; skip the cell
    if (!keys.has(key)) keys.set(key, []);
    keys.get(key)!.push([n, v]);
    const p = num(row, "predicted");
    if (p !== null && p > 0) {
      if (!predicted.has(key)) predicted.set(key, []);
      predicted.get(key)!.push([n, p]);
    }
  }
  if (keys.size === 0) throw new SchemaError(`${table.path}: no plottable cells`);
  const series: Series[] = [];
  let i = 0;
  for (const [key, pts] of [...keys.entries()].sort()) {
    const color = PALETTE[i % PALETTE.length];
    series.push({
      label: key,
      points: sortByX(pts),
      color,
      kind: key.startsWith("heterodyne") ? "marker" : "line",
      marker: "cross",
    });
    const pred = predicted.get(key);
    if (pred) {
      series.push({
        label: `${key} predicted`,
        points: sortByX(pred),
        color,
        kind: "dashed",
      });
    }
    i += 1;
  }
  return {
    title: "Phase variance multiplied by sqrt(N/kappa), six schemes",
    xLabel: "N/kappa",
    yLabel: "sigma^2 sqrt(N/kappa)",
    xKind: "log",
    yKind: "log",
    series,
  };
}

function gammaRange(table: Table): ChartSpec {
  requireColumns(table, [
    "n_over_kappa", "gamma_low", "gamma_high", "bound_low", "bound_high",
  ]);
  const segments = [];
  const boundLow: [number, number][] = [];
  const boundHigh: [number, number][] = [];
  for (const row of table.rows) {
    const n = numStrict(row, "n_over_kappa");
    boundLow.push([n, numStrict(row, "bound_low")]);
    boundHigh.push([n, numStrict(row, "bound_high")]);
    const low = num(row, "gamma_low");
    const high = num(row, "gamma_high");
    if (low !== null && high !== null) {
      segments.push({ x: n, y0: low, y1: high, color: PALETTE[0] });
    }
  }
  return {
    title: "Gamma window within 10% of the minimum variance",
    xLabel: "N/kappa",
    yLabel: "gamma/kappa",
    xKind: "log",
    yKind: "log",
    series: [
      { label: "analytic lower bound", points: sortByX(boundLow), color: PALETTE[2], kind: "dashed" },
      { label: "analytic upper bound", points: sortByX(boundHigh), color: PALETTE[1], kind: "dashed" },
    ],
    segments,
  };
}

function bayesRatio(table: Table): ChartSpec {
  requireColumns(table, ["n_over_kappa", "variance_ratio", "msd_over_variance"]);
  const ratio = sortByX(
    table.rows.map((r) => [numStrict(r, "n_over_kappa"), numStrict(r, "variance_ratio")])
  );
  const msd = sortByX(
    table.rows.map((r) => [numStrict(r, "n_over_kappa"), numStrict(r, "msd_over_variance")])
  );
  return {
    title: "Linear-filter to Bayesian variance ratio",
    xLabel: "N/kappa",
    yLabel: "ratio",
    xKind: "log",
    yKind: "linear",
    series: [
      { label: "v_linear / v_bayes", points: ratio, color: PALETTE[0], kind: "line" },
      { label: "mean-square diff / v_bayes", points: msd, color: PALETTE[3], kind: "dashed" },
    ],
  };
}

/** Concatenate the rows of several same-schema CSVs into one table. */
function mergeTables(tables: Table[]): Table {
  const [first, ...rest] = tables;
  for (const t of rest) {
    const missing = first.columns.filter((c) => !t.columns.includes(c));
    if (missing.length > 0) {
      throw new SchemaError(
        `${t.path}: cannot merge with ${first.path}, missing column(s) ${missing.join(", ")}`
      );
    }
  }
  return {
    path: tables.map((t) => t.path).join("+"),
    columns: first.columns,
    rows: tables.flatMap((t) => t.rows),
  };
}

export function buildFigure(id: FigureId, inputPaths: string[]): ChartSpec {
  if (inputPaths.length === 0) {
    throw new SchemaError("at least one --in CSV is required");
  }
  const table = mergeTables(inputPaths.map(loadTable));
  switch (id) {
    case "g-bound":
      return gBound(table);
    case "scaled-optima":
      return scaledOptima(table);
    case "chi-ratios":
      return chiRatios(table);
    case "variance-vs-N":
      return varianceVsN(table);
    case "gamma-range":
      return gammaRange(table);
    case "bayes-ratio":
      return bayesRatio(table);
    default: {
      const never: never = id;
      throw new SchemaError(`unknown figure id ${never}`);
    }
  }
}
