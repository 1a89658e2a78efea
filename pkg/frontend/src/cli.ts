#!/usr/bin/env node
/**
 * srflab-plots: render SVG figures from srflab CSV artifacts.
 *
 * Usage:
 *   srflab-plots <figures.json>
 *   srflab-plots <figure-id> <output.svg> <input.csv> [more.csv ...]
 *
 * The JSON form takes a list of figure specs:
 *   [{"id": "hitting-cdf", "inputs": ["hitting_times.csv", "hitting_oracle.csv"],
 *     "output": "hitting.svg"}]
 */

import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { dirname } from "node:path";
import { SchemaError } from "./csv.js";
import { FigureSpec, RENDERERS, render } from "./figures.js";

function usage(): void {
  process.stderr.write(
    "usage: srflab-plots <figures.json> | srflab-plots <figure-id> <out.svg> <in.csv...>\n" +
      `figure ids: ${Object.keys(RENDERERS).join(", ")}\n`,
  );
}

function loadSpecs(argv: string[]): FigureSpec[] {
  if (argv.length === 1 && argv[0].endsWith(".json")) {
    const raw = JSON.parse(readFileSync(argv[0], "utf8"));
    if (!Array.isArray(raw)) {
      throw new SchemaError(`${argv[0]}: expected a JSON array of figure specs`);
    }
    for (const spec of raw) {
      if (typeof spec.id !== "string" || !Array.isArray(spec.inputs) || typeof spec.output !== "string") {
        throw new SchemaError(`${argv[0]}: each spec needs string 'id', array 'inputs', string 'output'`);
      }
    }
    return raw as FigureSpec[];
  }
  if (argv.length >= 3) {
    return [{ id: argv[0], output: argv[1], inputs: argv.slice(2) }];
  }
  usage();
  process.exit(2);
}

export function main(argv: string[]): number {
  if (argv.length === 0 || argv[0] === "-h" || argv[0] === "--help") {
    usage();
    return argv.length === 0 ? 2 : 0;
  }
  let specs: FigureSpec[];
  try {
    specs = loadSpecs(argv);
  } catch (err) {
    process.stderr.write(`error: ${err instanceof Error ? err.message : String(err)}\n`);
    return 2;
  }
  for (const spec of specs) {
    try {
      const svg = render(spec);
      mkdirSync(dirname(spec.output) || ".", { recursive: true });
      writeFileSync(spec.output, svg);
      process.stdout.write(`wrote ${spec.output}\n`);
    } catch (err) {
      if (err instanceof SchemaError) {
        process.stderr.write(`schema error: ${err.message}\n`);
        return 1;
      }
      throw err;
    }
  }
  return 0;
}

process.exit(main(process.argv.slice(2)));
