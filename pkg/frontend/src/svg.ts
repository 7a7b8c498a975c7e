/** Minimal SVG scene builder: axes, linear/log scales, paths, markers. */

export interface Extent {
  min: number;
  max: number;
}

export type Scale = (value: number) => number;

export function linearScale(domain: Extent, range: Extent): Scale {
  const span = domain.max - domain.min || 1;
  return (v) =>
    range.min + ((v - domain.min) / span) * (range.max - range.min);
}

export function logScale(domain: Extent, range: Extent): Scale {
  const lo = Math.log10(domain.min);
  const hi = Math.log10(domain.max);
  const span = hi - lo || 1;
  return (v) =>
    range.min + ((Math.log10(v) - lo) / span) * (range.max - range.min);
}

export function niceLogTicks(domain: Extent): number[] {
  const ticks: number[] = [];
  const lo = Math.ceil(Math.log10(domain.min) - 1e-9);
  const hi = Math.floor(Math.log10(domain.max) + 1e-9);
  for (let e = lo; e <= hi; e += 1) {
    ticks.push(10 ** e);
  }
  return ticks;
}

export function niceLinearTicks(domain: Extent, count = 5): number[] {
  const raw = (domain.max - domain.min) / Math.max(count, 1);
  const mag = 10 ** Math.floor(Math.log10(raw || 1));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => s >= raw) ?? mag;
  const ticks: number[] = [];
  for (
    let v = Math.ceil(domain.min / step) * step;
    v <= domain.max + 1e-12;
    v += step
  ) {
    ticks.push(Number(v.toPrecision(12)));
  }
  return ticks;
}

const fmt = (v: number): string =>
  Math.abs(v) >= 1e4 || (Math.abs(v) < 1e-3 && v !== 0)
    ? v.toExponential(0)
    : String(Number(v.toPrecision(6)));

export class Svg {
  private parts: string[] = [];

  constructor(
    readonly width: number,
    readonly height: number,
  ) {}

  add(fragment: string): void {
    this.parts.push(fragment);
  }

  path(points: [number, number][], stroke: string, opts = ""): void {
    if (points.length === 0) return;
    const d =
      `M ${points[0][0].toFixed(2)} ${points[0][1].toFixed(2)} ` +
      points
        .slice(1)
        .map(([x, y]) => `L ${x.toFixed(2)} ${y.toFixed(2)}`)
        .join(" ");
    this.parts.push(
      `<path d="${d}" fill="none" stroke="${stroke}" ${opts}/>`,
    );
  }

  circle(x: number, y: number, r: number, fill: string): void {
    this.parts.push(
      `<circle cx="${x.toFixed(2)}" cy="${y.toFixed(2)}" r="${r}" fill="${fill}"/>`,
    );
  }

  text(x: number, y: number, content: string, opts = ""): void {
    this.parts.push(
      `<text x="${x.toFixed(2)}" y="${y.toFixed(2)}" font-family="sans-serif" ${opts}>${content}</text>`,
    );
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke: string,
       opts = ""): void {
    this.parts.push(
      `<line x1="${x1.toFixed(2)}" y1="${y1.toFixed(2)}" x2="${x2.toFixed(2)}" y2="${y2.toFixed(2)}" stroke="${stroke}" ${opts}/>`,
    );
  }

  render(): string {
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" ` +
      `height="${this.height}" viewBox="0 0 ${this.width} ${this.height}">\n` +
      `<rect width="${this.width}" height="${this.height}" fill="white"/>\n` +
      this.parts.join("\n") +
      "\n</svg>\n"
    );
  }
}

export interface AxesBox {
  left: number;
  right: number;
  top: number;
  bottom: number;
}

/** Draw a frame with ticks; returns scales mapping data to pixels. */
export function drawAxes(
  svg: Svg,
  box: AxesBox,
  xDomain: Extent,
  yDomain: Extent,
  loglog: boolean,
  xLabel: string,
  yLabel: string,
): { x: Scale; y: Scale } {
  const x = (loglog ? logScale : linearScale)(xDomain, {
    min: box.left,
    max: box.right,
  });
  const y = (loglog ? logScale : linearScale)(yDomain, {
    min: box.bottom,
    max: box.top,
  });
  svg.line(box.left, box.top, box.left, box.bottom, "black");
  svg.line(box.left, box.bottom, box.right, box.bottom, "black");
  const xTicks = loglog ? niceLogTicks(xDomain) : niceLinearTicks(xDomain);
  const yTicks = loglog ? niceLogTicks(yDomain) : niceLinearTicks(yDomain);
  for (const t of xTicks) {
    const px = x(t);
    svg.line(px, box.bottom, px, box.bottom + 4, "black");
    svg.text(px, box.bottom + 16, fmt(t),
             'font-size="10" text-anchor="middle"');
  }
  for (const t of yTicks) {
    const py = y(t);
    svg.line(box.left - 4, py, box.left, py, "black");
    svg.text(box.left - 6, py + 3, fmt(t),
             'font-size="10" text-anchor="end"');
  }
  svg.text((box.left + box.right) / 2, box.bottom + 32, xLabel,
           'font-size="12" text-anchor="middle"');
  svg.text(box.left, box.top - 8, yLabel, 'font-size="12"');
  return { x, y };
}

export const SERIES_COLORS = ["#1f77b4", "#2ca02c", "#d62728", "#ff7f0e",
                              "#9467bd", "#8c564b"];
