import { scaleLinear, scaleLog } from "d3-scale";

export type AxisKind = "linear" | "log";

export interface Series {
  label: string;
  points: [number, number][];
  color: string;
  kind: "line" | "marker" | "dashed";
  marker?: "circle" | "cross" | "square";
}

export interface Segment {
  x: number;
  y0: number;
  y1: number;
  color: string;
  label?: string;
}

export interface ChartSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  xKind: AxisKind;
  yKind: AxisKind;
  series: Series[];
  segments?: Segment[];
}

export const PALETTE = [
  "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
  "#17becf", "#7f7f7f",
];

const W = 760;
const H = 520;
const M = { top: 46, right: 30, bottom: 58, left: 78 };

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function fmtTick(v: number, kind: AxisKind): string {
  if (kind === "log") {
    const exp = Math.log10(v);
    if (Number.isInteger(exp)) return exp >= 4 || exp <= -4 ? `1e${exp}` : `${v}`;
    return "";
  }
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1000 || a < 0.01) return v.toExponential(0);
  return `${Number(v.toPrecision(3))}`;
}

function makeScale(kind: AxisKind, domain: [number, number], range: [number, number]) {
  if (kind === "log") {
    return scaleLog().domain(domain).range(range).nice();
  }
  return scaleLinear().domain(domain).range(range).nice();
}

/** Render a chart spec to a standalone SVG string (pure; no DOM). */
export function renderSvg(spec: ChartSpec): string {
  const pts: [number, number][] = spec.series.flatMap((s) => s.points);
  for (const seg of spec.segments ?? []) {
    pts.push([seg.x, seg.y0], [seg.x, seg.y1]);
  }
  const finite = pts.filter(
    ([x, y]) =>
      Number.isFinite(x) && Number.isFinite(y) &&
      (spec.xKind !== "log" || x > 0) && (spec.yKind !== "log" || y > 0)
  );
  if (finite.length === 0) {
    throw new Error(`figure '${spec.title}' has no plottable points`);
  }
  const xs = finite.map((p) => p[0]);
  const ys = finite.map((p) => p[1]);
  const padLin = (lo: number, hi: number): [number, number] =>
    lo === hi ? [lo - 1, hi + 1] : [lo - 0.06 * (hi - lo), hi + 0.06 * (hi - lo)];
  const padLog = (lo: number, hi: number): [number, number] =>
    lo === hi ? [lo / 2, hi * 2] : [lo / 1.3, hi * 1.3];
  const xDom = (spec.xKind === "log" ? padLog : padLin)(Math.min(...xs), Math.max(...xs));
  const yDom = (spec.yKind === "log" ? padLog : padLin)(Math.min(...ys), Math.max(...ys));
  const sx = makeScale(spec.xKind, xDom, [M.left, W - M.right]);
  const sy = makeScale(spec.yKind, yDom, [H - M.bottom, M.top]);

  const out: string[] = [];
  out.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" ` +
      `viewBox="0 0 ${W} ${H}" font-family="Helvetica, Arial, sans-serif">`
  );
  out.push(`<rect width="${W}" height="${H}" fill="white"/>`);
  out.push(
    `<text x="${W / 2}" y="24" text-anchor="middle" font-size="16">${esc(spec.title)}</text>`
  );

  // frame and ticks
  const x0 = M.left, x1 = W - M.right, y0 = H - M.bottom, y1 = M.top;
  out.push(
    `<rect x="${x0}" y="${y1}" width="${x1 - x0}" height="${y0 - y1}" ` +
      `fill="none" stroke="#333" stroke-width="1"/>`
  );
  for (const t of sx.ticks(spec.xKind === "log" ? 10 : 7)) {
    const px = sx(t);
    const label = fmtTick(t, spec.xKind);
    out.push(`<line x1="${px}" y1="${y0}" x2="${px}" y2="${y0 - 5}" stroke="#333"/>`);
    if (label !== "") {
      out.push(
        `<text x="${px}" y="${y0 + 18}" text-anchor="middle" font-size="11">${label}</text>`
      );
      out.push(
        `<line x1="${px}" y1="${y0}" x2="${px}" y2="${y1}" stroke="#ddd" stroke-width="0.5"/>`
      );
    }
  }
  for (const t of sy.ticks(spec.yKind === "log" ? 10 : 7)) {
    const py = sy(t);
    const label = fmtTick(t, spec.yKind);
    out.push(`<line x1="${x0}" y1="${py}" x2="${x0 + 5}" y2="${py}" stroke="#333"/>`);
    if (label !== "") {
      out.push(
        `<text x="${x0 - 8}" y="${py + 4}" text-anchor="end" font-size="11">${label}</text>`
      );
      out.push(
        `<line x1="${x0}" y1="${py}" x2="${x1}" y2="${py}" stroke="#ddd" stroke-width="0.5"/>`
      );
    }
  }
  out.push(
    `<text x="${(x0 + x1) / 2}" y="${H - 14}" text-anchor="middle" font-size="13">` +
      `${esc(spec.xLabel)}</text>`
  );
  out.push(
    `<text x="20" y="${(y0 + y1) / 2}" text-anchor="middle" font-size="13" ` +
      `transform="rotate(-90 20 ${(y0 + y1) / 2})">${esc(spec.yLabel)}</text>`
  );

  const clipOk = ([x, y]: [number, number]) =>
    Number.isFinite(x) && Number.isFinite(y) &&
    (spec.xKind !== "log" || x > 0) && (spec.yKind !== "log" || y > 0);

  for (const seg of spec.segments ?? []) {
    if (!clipOk([seg.x, seg.y0]) || !clipOk([seg.x, seg.y1])) continue;
    out.push(
      `<line class="segment" x1="${sx(seg.x)}" y1="${sy(seg.y0)}" ` +
        `x2="${sx(seg.x)}" y2="${sy(seg.y1)}" stroke="${seg.color}" stroke-width="2"/>`
    );
    for (const yy of [seg.y0, seg.y1]) {
      out.push(
        `<line x1="${sx(seg.x) - 4}" y1="${sy(yy)}" x2="${sx(seg.x) + 4}" y2="${sy(yy)}" ` +
          `stroke="${seg.color}" stroke-width="2"/>`
      );
    }
  }

  for (const s of spec.series) {
    const good = s.points.filter(clipOk);
    if (good.length === 0) continue;
    const path = good.map(([x, y]) => `${sx(x)},${sy(y)}`).join(" ");
    if (s.kind !== "marker") {
      out.push(
        `<polyline class="series" data-label="${esc(s.label)}" points="${path}" ` +
          `fill="none" stroke="${s.color}" stroke-width="1.8"` +
          (s.kind === "dashed" ? ` stroke-dasharray="6 4"` : "") +
          `/>`
      );
    }
    if (s.kind === "marker" || good.length === 1) {
      for (const [x, y] of good) {
        const px = sx(x), py = sy(y);
        if (s.marker === "cross") {
          out.push(
            `<path class="marker" data-label="${esc(s.label)}" stroke="${s.color}" ` +
              `d="M${px - 4},${py - 4}L${px + 4},${py + 4}M${px - 4},${py + 4}L${px + 4},${py - 4}"/>`
          );
        } else if (s.marker === "square") {
          out.push(
            `<rect class="marker" data-label="${esc(s.label)}" x="${px - 3.5}" y="${py - 3.5}" ` +
              `width="7" height="7" fill="none" stroke="${s.color}"/>`
          );
        } else {
          out.push(
            `<circle class="marker" data-label="${esc(s.label)}" cx="${px}" cy="${py}" r="3.5" ` +
              `fill="none" stroke="${s.color}"/>`
          );
        }
      }
    }
  }

  // legend
  let ly = y1 + 14;
  for (const s of spec.series) {
    const lx = x1 - 200;
    out.push(
      `<line x1="${lx}" y1="${ly - 4}" x2="${lx + 26}" y2="${ly - 4}" stroke="${s.color}" ` +
        `stroke-width="2"${s.kind === "dashed" ? ` stroke-dasharray="6 4"` : ""}/>`
    );
    out.push(`<text x="${lx + 32}" y="${ly}" font-size="11">${esc(s.label)}</text>`);
    ly += 16;
  }
  out.push("</svg>");
  return out.join("\n");
}
