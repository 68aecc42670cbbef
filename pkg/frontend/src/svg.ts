// Minimal deterministic SVG scene builder: scales, axes, polylines.

export interface Scale {
  (v: number): number;
  domain: [number, number];
  range: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  const f = ((v: number) => r0 + ((v - d0) / span) * (r1 - r0)) as Scale;
  f.domain = domain;
  f.range = range;
  return f;
}

/** Round tick positions covering the domain (1/2/5 ladder). */
export function ticks(domain: [number, number], count = 6): number[] {
  const [lo, hi] = domain;
  const span = hi - lo;
  if (span <= 0) return [lo];
  const raw = span / count;
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  const candidates = [1, 2, 5, 10].map((m) => m * mag);
  const step = candidates.find((s) => span / s <= count) ?? candidates[3];
  const first = Math.ceil(lo / step) * step;
  const out: number[] = [];
  for (let v = first; v <= hi + step * 1e-9; v += step) {
    out.push(Math.abs(v) < step * 1e-9 ? 0 : Number(v.toPrecision(12)));
  }
  return out;
}

export function extent(values: number[], pad = 0.05): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (!Number.isFinite(lo)) return [0, 1];
  if (lo === hi) return [lo - 1, hi + 1];
  const p = (hi - lo) * pad;
  return [lo - p, hi + p];
}

const fmt = (v: number) => Number(v.toFixed(6)).toString();

export class Svg {
  private parts: string[] = [];
  constructor(readonly width: number, readonly height: number) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" ` +
        `height="${height}" viewBox="0 0 ${width} ${height}" ` +
        `font-family="Helvetica, Arial, sans-serif">`,
      `<rect width="${width}" height="${height}" fill="white"/>`
    );
  }

  raw(s: string): void {
    this.parts.push(s);
  }

  rect(x: number, y: number, w: number, h: number, attrs = ""): void {
    this.parts.push(
      `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" height="${fmt(h)}" ${attrs}/>`
    );
  }

  line(x1: number, y1: number, x2: number, y2: number, attrs: string): void {
    this.parts.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" ${attrs}/>`
    );
  }

  polyline(points: [number, number][], attrs: string): void {
    const pts = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    this.parts.push(`<polyline points="${pts}" fill="none" ${attrs}/>`);
  }

  circle(x: number, y: number, r: number, attrs: string): void {
    this.parts.push(`<circle cx="${fmt(x)}" cy="${fmt(y)}" r="${r}" ${attrs}/>`);
  }

  text(x: number, y: number, s: string, attrs = ""): void {
    this.parts.push(`<text x="${fmt(x)}" y="${fmt(y)}" ${attrs}>${s}</text>`);
  }

  toString(): string {
    return this.parts.join("\n") + "\n</svg>\n";
  }
}

export const SERIES_COLORS = ["#0072bd", "#d95319", "#edb120", "#7e2f8e", "#77ac30"];

export interface Panel {
  x: number;
  y: number;
  width: number;
  height: number;
  sx: Scale;
  sy: Scale;
}

/** Framed panel with tick marks and labels; returns the data scales. */
export function drawPanel(
  svg: Svg,
  box: { x: number; y: number; width: number; height: number },
  xDomain: [number, number],
  yDomain: [number, number],
  opts: { title?: string; xLabel?: string; yLabel?: string; xTicks?: boolean } = {}
): Panel {
  const sx = linearScale(xDomain, [box.x, box.x + box.width]);
  const sy = linearScale(yDomain, [box.y + box.height, box.y]);
  const axis = 'stroke="#222" stroke-width="1"';
  svg.line(box.x, box.y + box.height, box.x + box.width, box.y + box.height, axis);
  svg.line(box.x, box.y, box.x, box.y + box.height, axis);
  for (const v of ticks(xDomain)) {
    const x = sx(v);
    svg.line(x, box.y + box.height, x, box.y + box.height + 4, axis);
    if (opts.xTicks !== false) {
      svg.text(x, box.y + box.height + 16, String(v), 'font-size="10" text-anchor="middle"');
    }
  }
  for (const v of ticks(yDomain, 5)) {
    const y = sy(v);
    svg.line(box.x - 4, y, box.x, y, axis);
    svg.text(box.x - 7, y + 3, String(v), 'font-size="10" text-anchor="end"');
  }
  if (opts.title) {
    svg.text(
      box.x + box.width / 2,
      box.y - 8,
      opts.title,
      'font-size="12" font-weight="bold" text-anchor="middle"'
    );
  }
  if (opts.xLabel) {
    svg.text(
      box.x + box.width / 2,
      box.y + box.height + 32,
      opts.xLabel,
      'font-size="11" text-anchor="middle"'
    );
  }
  if (opts.yLabel) {
    const cx = box.x - 38;
    const cy = box.y + box.height / 2;
    svg.raw(
      `<text x="${fmt(cx)}" y="${fmt(cy)}" font-size="11" text-anchor="middle" ` +
        `transform="rotate(-90 ${fmt(cx)} ${fmt(cy)})">${opts.yLabel}</text>`
    );
  }
  return { ...box, sx, sy };
}

/** Grey bands marking collision-avoidance activity; carries the span in
 * data attributes so consumers can recover the intervals. */
export function drawColavBands(
  svg: Svg,
  panel: Panel,
  intervals: [number, number][]
): void {
  for (const [t0, t1] of intervals) {
    const x0 = panel.sx(t0);
    const x1 = panel.sx(t1);
    svg.rect(
      x0,
      panel.y,
      Math.max(x1 - x0, 0.5),
      panel.height,
      `class="colav-band" data-t0="${t0}" data-t1="${t1}" ` +
        'fill="#bbbbbb" fill-opacity="0.45" stroke="none"'
    );
  }
}

export function drawSeries(
  svg: Svg,
  panel: Panel,
  t: number[],
  values: number[],
  color: string,
  dash = ""
): void {
  const pts: [number, number][] = [];
  for (let k = 0; k < t.length; k++) pts.push([panel.sx(t[k]), panel.sy(values[k])]);
  const dashAttr = dash ? ` stroke-dasharray="${dash}"` : "";
  svg.polyline(pts, `stroke="${color}" stroke-width="1.4"${dashAttr}`);
}

export function drawLegend(
  svg: Svg,
  x: number,
  y: number,
  entries: { label: string; color: string; dash?: string }[]
): void {
  entries.forEach((e, k) => {
    const yy = y + 14 * k;
    const dash = e.dash ? ` stroke-dasharray="${e.dash}"` : "";
    svg.line(x, yy - 4, x + 18, yy - 4, `stroke="${e.color}" stroke-width="2"${dash}`);
    svg.text(x + 24, yy, e.label, 'font-size="10"');
  });
}
