#!/usr/bin/env node
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { SchemaError } from "./csv.js";
import { FIGURE_IDS, FigureId, renderFigureFile } from "./render.js";

async function main(): Promise<number> {
  const argv = await yargs(hideBin(process.argv))
    .command("render <figure>", "render a figure from result CSVs", (y) =>
      y
        .positional("figure", {
          describe: `one of ${FIGURE_IDS.join(" | ")}`,
          type: "string",
          demandOption: true,
        })
        .option("in", {
          describe: "input CSV path(s)",
          type: "string",
          array: true,
          demandOption: true,
        })
        .option("out", {
          describe: "output image path (SVG)",
          type: "string",
          demandOption: true,
        })
    )
    .demandCommand(1)
    .strict()
    .help()
    .parse();

  const figure = argv.figure as string;
  if (!(FIGURE_IDS as readonly string[]).includes(figure)) {
    console.error(`unknown figure id '${figure}'; expected ${FIGURE_IDS.join(" | ")}`);
    return 2;
  }
  try {
    renderFigureFile(figure as FigureId, argv.in as string[], argv.out as string);
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${(err as Error).message}`);
      return 3;
    }
    console.error(`render failed: ${(err as Error).message}`);
    return 1;
  }
  console.error(`wrote ${argv.out}`);
  return 0;
}

main().then((code) => {
  process.exitCode = code;
});
