/**
 * Figure definitions: each renders one SVG from one or more CSV artifacts
 * produced by the srflab command-line tools.
 */

import { SchemaError, Table, column, readTable, requireSchema, textColumn } from "./csv.js";
import { REQUIRED_COLUMNS } from "./schemas.js";
import { Plot, svgTable } from "./svg.js";

export interface FigureSpec {
  /** which renderer to use, e.g. "mass-trajectories" */
  id: string;
  /** CSV paths, in the order the renderer expects them */
  inputs: string[];
  /** output SVG path */
  output: string;
  options?: Record<string, string | number>;
}

/** Read a CSV, check its schema name, and check every registered column. */
export function loadTable(path: string, expected: string): Table {
  const table = readTable(path);
  requireSchema(table, expected, path);
  const required = REQUIRED_COLUMNS[expected];
  if (required) {
    for (const name of required) {
      if (!table.columns.includes(name)) {
        throw new SchemaError(
          `${path}: missing column '${name}' (have: ${table.columns.join(", ")})`,
        );
      }
    }
  }
  return table;
}

type Renderer = (inputs: string[], options: Record<string, string | number>) => string;

const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (!Number.isFinite(v)) continue;
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (lo > hi) throw new SchemaError("no finite values to plot");
  return [lo, hi];
}

function groupBy(keys: number[]): Map<number, number[]> {
  const out = new Map<number, number[]>();
  keys.forEach((k, i) => {
    const arr = out.get(k);
    if (arr) arr.push(i);
    else out.set(k, [i]);
  });
  return out;
}

function massTrajectories(inputs: string[]): string {
  const paths = loadTable(inputs[0], "srflab.mass_paths");
  const oracle = loadTable(inputs[1], "srflab.mass_oracle");
  const rep = column(paths, "replica", inputs[0]);
  const t = column(paths, "time", inputs[0]);
  const m = column(paths, "mass", inputs[0]);
  const ot = column(oracle, "time", inputs[1]);
  const om = column(oracle, "mean_mass", inputs[1]);
  const plot = new Plot(
    "Total-mass paths with mean-law envelope",
    extent(t.concat(ot)),
    extent(m.concat(om)),
    { xLabel: "t", yLabel: "mass" },
  );
  const groups = [...groupBy(rep).entries()].sort((a, b) => a[0] - b[0]);
  for (const [, idx] of groups.slice(0, 40)) {
    plot.polyline(idx.map((i) => t[i]), idx.map((i) => m[i]), "#9aa7b4");
  }
  plot.polyline(ot, om, "#d62728");
  plot.band(ot, om.map((v) => 0.5 * v), om.map((v) => 1.5 * v), "#d62728");
  plot.legend([["sample paths", "#9aa7b4"], ["mean law", "#d62728"]]);
  return plot.toSvg();
}

function hittingCdf(inputs: string[]): string {
  const emp = loadTable(inputs[0], "srflab.hitting_times");
  const oracle = loadTable(inputs[1], "srflab.hitting_oracle");
  const times = column(emp, "hit_time", inputs[0]);
  const hit = column(emp, "hit", inputs[0]);
  const n = times.length;
  const finite = times
    .filter((v, i) => hit[i] === 1 && Number.isFinite(v))
    .sort((a, b) => a - b);
  const xs: number[] = [0];
  const ys: number[] = [0];
  finite.forEach((v, i) => {
    xs.push(v);
    ys.push((i + 1) / n);
  });
  const ot = column(oracle, "time", inputs[1]);
  const oc = column(oracle, "cdf", inputs[1]);
  const plot = new Plot(
    "Hitting-time CDF: empirical vs closed form",
    extent(xs.concat(ot)),
    [0, Math.max(...ys, ...oc)],
    { xLabel: "t", yLabel: "P(hit by t)" },
  );
  plot.steps(xs, ys, PALETTE[0]);
  plot.polyline(ot, oc, PALETTE[1], "5,3");
  plot.legend([["empirical", PALETTE[0]], ["closed form", PALETTE[1]]]);
  return plot.toSvg();
}

function laplaceCompare(inputs: string[]): string {
  const table = loadTable(inputs[0], "srflab.laplace_compare");
  const u = column(table, "u", inputs[0]);
  const emp = column(table, "empirical", inputs[0]);
  const ora = column(table, "oracle", inputs[0]);
  const plot = new Plot(
    "Laplace transform of the final mass",
    extent(u),
    extent(emp.concat(ora)),
    { xLabel: "u", yLabel: "E[exp(-u A_T)]" },
  );
  plot.polyline(u, ora, PALETTE[1], "5,3");
  plot.polyline(u, emp, PALETTE[0]);
  plot.scatter(u, emp, PALETTE[0]);
  plot.legend([["empirical", PALETTE[0]], ["closed form", PALETTE[1]]]);
  return plot.toSvg();
}

function ibpTable(inputs: string[]): string {
  const table = loadTable(inputs[0], "srflab.ibp_residuals");
  const names = textColumn(table, "functional", inputs[0]);
  const dirs = textColumn(table, "direction", inputs[0]);
  const lhs = column(table, "lhs", inputs[0]);
  const rhs = column(table, "rhs", inputs[0]);
  const z = column(table, "z", inputs[0]);
  const rows = names.map((name, i) => [
    name,
    dirs[i],
    lhs[i].toPrecision(4),
    rhs[i].toPrecision(4),
    z[i].toFixed(2),
  ]);
  return svgTable(
    "Integration-by-parts residual z-scores",
    ["functional", "direction", "lhs", "rhs", "z"],
    rows,
  );
}

function qvScatter(inputs: string[]): string {
  const table = loadTable(inputs[0], "srflab.qv_scatter");
  const pred = column(table, "predicted", inputs[0]);
  const real = column(table, "realized", inputs[0]);
  const [lo, hi] = extent(pred.concat(real));
  const plot = new Plot(
    "Quadratic variation: realized vs predicted",
    [lo, hi],
    [lo, hi],
    { xLabel: "predicted increment", yLabel: "realized increment" },
  );
  plot.polyline([lo, hi], [lo, hi], PALETTE[1], "5,3");
  plot.scatter(pred, real, PALETTE[0]);
  plot.legend([["windows", PALETTE[0]], ["unit slope", PALETTE[1]]]);
  return plot.toSvg();
}

function gmcEpsConvergence(inputs: string[]): string {
  const table = loadTable(inputs[0], "srflab.gmc_eps_convergence");
  const eps = column(table, "eps_fine", inputs[0]);
  const diff = column(table, "abs_diff", inputs[0]);
  const positive = diff.map((v) => Math.max(v, 1e-300));
  const plot = new Plot(
    "Mollification-scale convergence of the measure",
    extent(eps),
    extent(positive),
    { logX: true, logY: true, xLabel: "eps", yLabel: "|mass(2 eps) - mass(eps)|" },
  );
  plot.polyline(eps, positive, PALETTE[0]);
  plot.scatter(eps, positive, PALETTE[0]);
  return plot.toSvg();
}

function deltaPhase(inputs: string[]): string {
  const table = loadTable(inputs[0], "srflab.delta_scan");
  const delta = column(table, "delta", inputs[0]);
  const frac = column(table, "hit_fraction", inputs[0]);
  const cls = textColumn(table, "boundary_class", inputs[0]);
  const plot = new Plot(
    "Zero-hitting fraction across drift strengths",
    extent(delta),
    [0, 1],
    { xLabel: "delta", yLabel: "fraction hitting zero" },
  );
  const x0 = plot.x(0);
  const x2 = plot.x(2);
  plot.raw(
    `<line x1="${x0.toFixed(2)}" y1="34" x2="${x0.toFixed(2)}" y2="374" stroke="#999" stroke-dasharray="3,3"/>`,
  );
  plot.raw(
    `<line x1="${x2.toFixed(2)}" y1="34" x2="${x2.toFixed(2)}" y2="374" stroke="#999" stroke-dasharray="3,3"/>`,
  );
  plot.polyline(delta, frac, PALETTE[0]);
  plot.scatter(delta, frac, PALETTE[0]);
  delta.forEach((d, i) => {
    plot.raw(
      `<text x="${(Math.round(plot.x(d) * 100) / 100)}" y="${(Math.round((plot.y(frac[i]) - 8) * 100) / 100)}" text-anchor="middle" font-size="10" font-family="sans-serif">${cls[i]}</text>`,
    );
  });
  return plot.toSvg();
}

function expansionEnergy(inputs: string[]): string {
  const table = loadTable(inputs[0], "srflab.expansion_energy");
  const t = column(table, "time", inputs[0]);
  const e = column(table, "dirichlet_energy", inputs[0]);
  const plot = new Plot(
    "Dirichlet energy along the deterministic flow",
    extent(t),
    extent(e),
    { xLabel: "t", yLabel: "energy" },
  );
  plot.polyline(t, e, PALETTE[0]);
  return plot.toSvg();
}

export const RENDERERS: Record<string, Renderer> = {
  "mass-trajectories": massTrajectories,
  "hitting-cdf": hittingCdf,
  "laplace-compare": laplaceCompare,
  "ibp-table": ibpTable,
  "qv-scatter": qvScatter,
  "gmc-eps-convergence": gmcEpsConvergence,
  "delta-phase": deltaPhase,
  "expansion-energy": expansionEnergy,
};

export function render(spec: FigureSpec): string {
  const renderer = RENDERERS[spec.id];
  if (!renderer) {
    throw new SchemaError(
      `unknown figure id '${spec.id}' (have: ${Object.keys(RENDERERS).join(", ")})`,
    );
  }
  return renderer(spec.inputs, spec.options ?? {});
}
