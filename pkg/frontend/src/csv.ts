/**
 * Reader for srflab CSV artifacts.
 *
 * Every file starts with a `# schema: srflab.<table> v<N>` comment, then a
 * header row, then data rows.  Figures declare which columns they need; a
 * missing column raises a SchemaError naming it.
 */

import { readFileSync } from "node:fs";

export class SchemaError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "SchemaError";
  }
}

export interface Table {
  /** table name from the schema comment, e.g. "srflab.mass_paths" */
  schema: string;
  version: string;
  columns: string[];
  /** row-major cells; numbers where parseable, otherwise strings */
  rows: (number | string)[][];
}

export function parseCsv(text: string, path: string): Table {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new SchemaError(`${path}: empty CSV, expected a schema comment`);
  }
  const m = /^#\s*schema:\s*(\S+)\s+(\S+)\s*$/.exec(lines[0]);
  if (!m) {
    throw new SchemaError(
      `${path}: first line must be '# schema: <table> <version>', got '${lines[0]}'`,
    );
  }
  if (lines.length < 2) {
    throw new SchemaError(`${path}: missing header row`);
  }
  const columns = lines[1].split(",").map((c) => c.trim());
  const rows = lines.slice(2).map((line) =>
    line.split(",").map((cell) => {
      const v = Number(cell);
      return cell !== "" && Number.isFinite(v) ? v : cell;
    }),
  );
  return { schema: m[1], version: m[2], columns, rows };
}

export function readTable(path: string): Table {
  let text: string;
  try {
    text = readFileSync(path, "utf8");
  } catch (err) {
    throw new SchemaError(`${path}: cannot read file (${String(err)})`);
  }
  return parseCsv(text, path);
}

/** Numeric column accessor; throws a SchemaError naming a missing column. */
export function column(table: Table, name: string, path = ""): number[] {
  const i = table.columns.indexOf(name);
  if (i < 0) {
    throw new SchemaError(
      `${path || table.schema}: missing column '${name}' ` +
        `(have: ${table.columns.join(", ")})`,
    );
  }
  return table.rows.map((r) => {
    const v = r[i];
    return typeof v === "number" ? v : NaN;
  });
}

/** String column accessor with the same missing-column behavior. */
export function textColumn(table: Table, name: string, path = ""): string[] {
  const i = table.columns.indexOf(name);
  if (i < 0) {
    throw new SchemaError(
      `${path || table.schema}: missing column '${name}' ` +
        `(have: ${table.columns.join(", ")})`,
    );
  }
  return table.rows.map((r) => String(r[i]));
}

export function requireSchema(table: Table, expected: string, path = ""): void {
  if (table.schema !== expected) {
    throw new SchemaError(
      `${path || "input"}: expected schema '${expected}', got '${table.schema}'`,
    );
  }
  if (table.rows.length === 0) {
    throw new SchemaError(`${path || expected}: table has no data rows`);
  }
}
