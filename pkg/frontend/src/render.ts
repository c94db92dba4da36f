import { writeFileSync } from "fs";
import { buildFigure, FigureId, FIGURE_IDS } from "./figures.js";
import { renderSvg } from "./svg.js";

export { FIGURE_IDS };
export type { FigureId };

/** Build the SVG text for a figure id from its input CSVs (pure). */
export function renderFigureSvg(id: FigureId, inputPaths: string[]): string {
  return renderSvg(buildFigure(id, inputPaths));
}

/** Render to a file; nothing is written when building fails. */
export function renderFigureFile(id: FigureId, inputPaths: string[], outPath: string): void {
  const svg = renderFigureSvg(id, inputPaths);
  writeFileSync(outPath, svg, "utf8");
}
