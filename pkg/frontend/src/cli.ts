#!/usr/bin/env node
// plots <kind> <csv> -o <out.svg> [--d-colav X] [--marker-interval S]
//
// Renders one figure kind from a telemetry CSV to a standalone SVG.
// Exit codes: 0 ok, 1 schema/data error, 2 usage error.

import { writeFileSync } from "node:fs";
import { FIGURE_KINDS, FigureKind, FigureOptions, render } from "./figures.js";
import { SchemaError, parseLog } from "./schema.js";

export interface CliArgs {
  kind: FigureKind;
  csv: string;
  out: string;
  options: FigureOptions;
}

export function parseArgs(argv: string[]): CliArgs {
  const positional: string[] = [];
  const options: FigureOptions = {};
  let out = "";
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    if (a === "-o" || a === "--out") {
      out = argv[++i] ?? "";
    } else if (a === "--d-colav") {
      options.dColav = Number(argv[++i]);
    } else if (a === "--marker-interval") {
      options.markerInterval = Number(argv[++i]);
    } else if (a.startsWith("-")) {
      throw new UsageError(`unknown flag ${a}`);
    } else {
      positional.push(a);
    }
  }
  if (positional.length !== 2) {
    throw new UsageError("expected: plots <kind> <csv> -o <out.svg>");
  }
  const [kind, csv] = positional;
  if (!FIGURE_KINDS.includes(kind as FigureKind)) {
    throw new UsageError(
      `unknown figure kind ${kind}; expected one of ${FIGURE_KINDS.join(", ")}`
    );
  }
  if (!out) throw new UsageError("missing output path (-o <out.svg>)");
  return { kind: kind as FigureKind, csv, out, options };
}

export class UsageError extends Error {}

export function main(argv: string[]): number {
  let args: CliArgs;
  try {
    args = parseArgs(argv);
  } catch (err) {
    if (err instanceof UsageError) {
      console.error(`usage error: ${err.message}`);
      return 2;
    }
    throw err;
  }
  try {
    const log = parseLog(args.csv);
    const svg = render(args.kind, log, args.options);
    writeFileSync(args.out, svg);
    console.log(`wrote ${args.out}`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${err.message}`);
      return 1;
    }
    if (err instanceof Error && "code" in err && err.code === "ENOENT") {
      console.error(`file not found: ${args.csv}`);
      return 1;
    }
    throw err;
  }
}

// run when invoked as a script, not when imported by tests
import { fileURLToPath } from "node:url";

const invokedDirectly =
  process.argv[1] !== undefined &&
  fileURLToPath(import.meta.url) === process.argv[1];
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
