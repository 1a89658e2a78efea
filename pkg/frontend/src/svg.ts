/**
 * Minimal deterministic SVG scene builder: fixed size, fixed styles, no
 * timestamps or randomness, so identical inputs yield identical bytes.
 */

export const WIDTH = 640;
export const HEIGHT = 420;
const MARGIN = { left: 62, right: 16, top: 34, bottom: 46 };

export interface Scale {
  (v: number): number;
  domain: [number, number];
  log: boolean;
}

function makeScale(
  lo: number,
  hi: number,
  outLo: number,
  outHi: number,
  log: boolean,
): Scale {
  if (log) {
    const a = Math.log10(lo);
    const b = Math.log10(hi);
    const f = ((v: number) =>
      outLo + ((Math.log10(v) - a) / (b - a || 1)) * (outHi - outLo)) as Scale;
    f.domain = [lo, hi];
    f.log = true;
    return f;
  }
  const f = ((v: number) =>
    outLo + ((v - lo) / (hi - lo || 1)) * (outHi - outLo)) as Scale;
  f.domain = [lo, hi];
  f.log = false;
  return f;
}

function pad([lo, hi]: [number, number], log: boolean): [number, number] {
  if (log) {
    return [lo / 1.3, hi * 1.3];
  }
  const span = hi - lo || Math.abs(hi) || 1;
  return [lo - 0.05 * span, hi + 0.05 * span];
}

function ticks(lo: number, hi: number, log: boolean): number[] {
  if (log) {
    const out: number[] = [];
    for (let e = Math.ceil(Math.log10(lo)); e <= Math.floor(Math.log10(hi)); e++) {
      out.push(10 ** e);
    }
    return out.length >= 2 ? out : [lo, hi];
  }
  const span = hi - lo || 1;
  const step = 10 ** Math.floor(Math.log10(span / 4));
  const mult = span / step > 20 ? 5 : span / step > 8 ? 2 : 1;
  const s = step * mult;
  const out: number[] = [];
  for (let v = Math.ceil(lo / s) * s; v <= hi + 1e-12 * span; v += s) {
    out.push(Math.abs(v) < 1e-12 * span ? 0 : v);
  }
  return out;
}

const fmt = (v: number): string => {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(1);
  return String(Number(v.toPrecision(4)));
};

export class Plot {
  private parts: string[] = [];
  readonly x: Scale;
  readonly y: Scale;

  constructor(
    title: string,
    xDomain: [number, number],
    yDomain: [number, number],
    opts: { logX?: boolean; logY?: boolean; xLabel?: string; yLabel?: string } = {},
  ) {
    const [xl, xh] = pad(xDomain, !!opts.logX);
    const [yl, yh] = pad(yDomain, !!opts.logY);
    this.x = makeScale(xl, xh, MARGIN.left, WIDTH - MARGIN.right, !!opts.logX);
    this.y = makeScale(yl, yh, HEIGHT - MARGIN.bottom, MARGIN.top, !!opts.logY);
    this.parts.push(
      `<rect x="0" y="0" width="${WIDTH}" height="${HEIGHT}" fill="white"/>`,
      `<text x="${WIDTH / 2}" y="20" text-anchor="middle" font-size="15" font-family="sans-serif">${esc(title)}</text>`,
    );
    this.axes(opts.xLabel ?? "", opts.yLabel ?? "");
  }

  private axes(xLabel: string, yLabel: string): void {
    const x0 = MARGIN.left;
    const x1 = WIDTH - MARGIN.right;
    const y0 = HEIGHT - MARGIN.bottom;
    const y1 = MARGIN.top;
    this.parts.push(
      `<line x1="${x0}" y1="${y0}" x2="${x1}" y2="${y0}" stroke="black"/>`,
      `<line x1="${x0}" y1="${y0}" x2="${x0}" y2="${y1}" stroke="black"/>`,
    );
    for (const t of ticks(this.x.domain[0], this.x.domain[1], this.x.log)) {
      const px = this.x(t);
      this.parts.push(
        `<line x1="${r2(px)}" y1="${y0}" x2="${r2(px)}" y2="${y0 + 5}" stroke="black"/>`,
        `<text x="${r2(px)}" y="${y0 + 18}" text-anchor="middle" font-size="11" font-family="sans-serif">${fmt(t)}</text>`,
      );
    }
    for (const t of ticks(this.y.domain[0], this.y.domain[1], this.y.log)) {
      const py = this.y(t);
      this.parts.push(
        `<line x1="${x0 - 5}" y1="${r2(py)}" x2="${x0}" y2="${r2(py)}" stroke="black"/>`,
        `<text x="${x0 - 8}" y="${r2(py + 4)}" text-anchor="end" font-size="11" font-family="sans-serif">${fmt(t)}</text>`,
      );
    }
    if (xLabel) {
      this.parts.push(
        `<text x="${(x0 + x1) / 2}" y="${HEIGHT - 8}" text-anchor="middle" font-size="12" font-family="sans-serif">${esc(xLabel)}</text>`,
      );
    }
    if (yLabel) {
      this.parts.push(
        `<text x="16" y="${(y0 + y1) / 2}" text-anchor="middle" font-size="12" font-family="sans-serif" transform="rotate(-90 16 ${(y0 + y1) / 2})">${esc(yLabel)}</text>`,
      );
    }
  }

  polyline(xs: number[], ys: number[], stroke: string, dash = ""): void {
    const pts = xs
      .map((v, i) => `${r2(this.x(v))},${r2(this.y(ys[i]))}`)
      .join(" ");
    const d = dash ? ` stroke-dasharray="${dash}"` : "";
    this.parts.push(
      `<polyline points="${pts}" fill="none" stroke="${stroke}" stroke-width="1.5"${d}/>`,
    );
  }

  steps(xs: number[], ys: number[], stroke: string): void {
    if (xs.length === 0) return;
    const pts: string[] = [`${r2(this.x(xs[0]))},${r2(this.y(ys[0]))}`];
    for (let i = 1; i < xs.length; i++) {
      pts.push(`${r2(this.x(xs[i]))},${r2(this.y(ys[i - 1]))}`);
      pts.push(`${r2(this.x(xs[i]))},${r2(this.y(ys[i]))}`);
    }
    this.parts.push(
      `<polyline points="${pts.join(" ")}" fill="none" stroke="${stroke}" stroke-width="1.5"/>`,
    );
  }

  scatter(xs: number[], ys: number[], fill: string): void {
    for (let i = 0; i < xs.length; i++) {
      this.parts.push(
        `<circle cx="${r2(this.x(xs[i]))}" cy="${r2(this.y(ys[i]))}" r="2.5" fill="${fill}" fill-opacity="0.6"/>`,
      );
    }
  }

  band(xs: number[], lo: number[], hi: number[], fill: string): void {
    const fwd = xs.map((v, i) => `${r2(this.x(v))},${r2(this.y(hi[i]))}`);
    const back = [...xs]
      .reverse()
      .map((v, i) => `${r2(this.x(v))},${r2(this.y([...lo].reverse()[i]))}`);
    this.parts.push(
      `<polygon points="${fwd.concat(back).join(" ")}" fill="${fill}" fill-opacity="0.25" stroke="none"/>`,
    );
  }

  legend(entries: [string, string][]): void {
    let yy = MARGIN.top + 8;
    for (const [label, color] of entries) {
      this.parts.push(
        `<line x1="${WIDTH - 170}" y1="${yy}" x2="${WIDTH - 148}" y2="${yy}" stroke="${color}" stroke-width="2"/>`,
        `<text x="${WIDTH - 142}" y="${yy + 4}" font-size="11" font-family="sans-serif">${esc(label)}</text>`,
      );
      yy += 16;
    }
  }

  raw(fragment: string): void {
    this.parts.push(fragment);
  }

  toSvg(): string {
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}">\n` +
      this.parts.join("\n") +
      "\n</svg>\n"
    );
  }
}

/** Plain text table rendered as a fixed-layout SVG (for z-score reports). */
export function svgTable(title: string, header: string[], rows: string[][]): string {
  const parts = [
    `<rect x="0" y="0" width="${WIDTH}" height="${HEIGHT}" fill="white"/>`,
    `<text x="${WIDTH / 2}" y="24" text-anchor="middle" font-size="15" font-family="sans-serif">${esc(title)}</text>`,
  ];
  const colW = (WIDTH - 60) / header.length;
  header.forEach((h, j) => {
    parts.push(
      `<text x="${30 + j * colW}" y="56" font-size="12" font-weight="bold" font-family="monospace">${esc(h)}</text>`,
    );
  });
  parts.push(`<line x1="24" y1="62" x2="${WIDTH - 24}" y2="62" stroke="black"/>`);
  rows.forEach((row, i) => {
    const y = 80 + i * 18;
    row.forEach((cell, j) => {
      parts.push(
        `<text x="${30 + j * colW}" y="${y}" font-size="12" font-family="monospace">${esc(cell)}</text>`,
      );
    });
  });
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}">\n` +
    parts.join("\n") +
    "\n</svg>\n"
  );
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function r2(v: number): number {
  return Math.round(v * 100) / 100;
}
