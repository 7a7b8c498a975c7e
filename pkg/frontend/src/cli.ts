#!/usr/bin/env node
/**
 * shapemax-plot: render the optimizer's CSV outputs as SVG figures.
 *
 * Usage:
 *   shapemax-plot convergence --in history.csv[:label] [--in ...]
 *                             [--ref-exponent 2] [--linear] --out fig.svg
 *   shapemax-plot shape --in shape.csv [--in ...] --out fig.svg
 */
import { readFileSync, writeFileSync } from "node:fs";
import { basename } from "node:path";

import { parseHistoryCsv, parseShapeCsv, SchemaError } from "./csv.js";
import { renderConvergence, Series } from "./convergence.js";
import { renderShapes, ShapePanel } from "./shape.js";

interface Args {
  command: string;
  inputs: string[];
  out?: string;
  refExponent: number;
  loglog: boolean;
}

function parseArgs(argv: string[]): Args {
  const [command, ...rest] = argv;
  const args: Args = { command: command ?? "", inputs: [], refExponent: 2,
                       loglog: true };
  for (let i = 0; i < rest.length; i += 1) {
    const flag = rest[i];
    switch (flag) {
      case "--in":
        args.inputs.push(rest[++i]);
        break;
      case "--out":
        args.out = rest[++i];
        break;
      case "--ref-exponent":
        args.refExponent = Number(rest[++i]);
        break;
      case "--linear":
        args.loglog = false;
        break;
      default:
        throw new UsageError(`unknown argument '${flag}'`);
    }
  }
  return args;
}

class UsageError extends Error {}

function convergence(args: Args): string {
  if (args.inputs.length === 0 || !args.out) {
    throw new UsageError("convergence needs --in and --out");
  }
  const series: Series[] = args.inputs.map((spec) => {
    const colon = spec.lastIndexOf(":");
    const hasLabel = colon > 1; // keep windows-style paths intact
    const path = hasLabel ? spec.slice(0, colon) : spec;
    const label = hasLabel ? spec.slice(colon + 1) : basename(path, ".csv");
    return { label, history: parseHistoryCsv(readFileSync(path, "utf-8")) };
  });
  return renderConvergence(series, {
    loglog: args.loglog,
    refExponent: args.refExponent,
  });
}

function shape(args: Args): string {
  if (args.inputs.length === 0 || !args.out) {
    throw new UsageError("shape needs --in and --out");
  }
  const panels: ShapePanel[] = args.inputs.map((path) => ({
    title: basename(path, ".csv"),
    shape: parseShapeCsv(readFileSync(path, "utf-8")),
  }));
  return renderShapes(panels);
}

export function main(argv: string[]): number {
  try {
    const args = parseArgs(argv);
    let svg: string;
    if (args.command === "convergence") {
      svg = convergence(args);
    } else if (args.command === "shape") {
      svg = shape(args);
    } else {
      throw new UsageError(
        "usage: shapemax-plot <convergence|shape> --in FILE [--in FILE ...] --out FILE",
      );
    }
    writeFileSync(args.out!, svg);
    return 0;
  } catch (err) {
    if (err instanceof UsageError) {
      console.error(`usage error: ${err.message}`);
      return 2;
    }
    if (err instanceof SchemaError) {
      console.error(`schema error: ${err.message}`);
      return 1;
    }
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

const isDirectRun = process.argv[1] !== undefined
  && import.meta.url.endsWith(basename(process.argv[1]));
if (isDirectRun) {
  process.exit(main(process.argv.slice(2)));
}
