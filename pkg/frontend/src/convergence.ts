/**
 * Log-log convergence figure: the integral tracking cost per iteration for
 * each labeled history, plus a power-law reference line.
 */
import { HistoryData, SchemaError } from "./csv.js";
import { drawAxes, SERIES_COLORS, Svg } from "./svg.js";

export interface Series {
  label: string;
  history: HistoryData;
}

export interface ConvergenceOptions {
  loglog: boolean;
  refExponent: number;
  width?: number;
  height?: number;
}

export function renderConvergence(
  series: Series[],
  options: ConvergenceOptions,
): string {
  if (series.length === 0) {
    throw new SchemaError("at least one history series is required");
  }
  if (!Number.isFinite(options.refExponent)) {
    throw new SchemaError("reference exponent must be finite");
  }
  for (const s of series) {
    if (s.history.rows.length === 0) {
      throw new SchemaError(`series '${s.label}' has no data rows`);
    }
  }

  const width = options.width ?? 640;
  const height = options.height ?? 440;
  const box = { left: 64, right: width - 16, top: 16, bottom: height - 56 };

  // iterations are 0-based in the files; shift by one for the log axis
  const points = series.map((s) =>
    s.history.rows.map((row): [number, number] => [row.iter + 1, row.J_2]),
  );
  const xs = points.flat().map((p) => p[0]);
  const ys = points.flat().map((p) => p[1]).filter((v) => v > 0);
  if (ys.length === 0) {
    throw new SchemaError("all cost values are nonpositive");
  }
  const xDomain = { min: Math.min(...xs), max: Math.max(...xs) };
  const refYs = [xDomain.min, xDomain.max].map(
    (x) => x ** -options.refExponent,
  );
  const yDomain = {
    min: Math.min(...ys, ...refYs),
    max: Math.max(...ys, ...refYs),
  };

  const svg = new Svg(width, height);
  const { x, y } = drawAxes(svg, box, xDomain, yDomain, options.loglog,
                            "iteration", "integral tracking cost");

  const refPoints: [number, number][] = [];
  for (let k = 0; k <= 64; k += 1) {
    const t = options.loglog
      ? xDomain.min * (xDomain.max / xDomain.min) ** (k / 64)
      : xDomain.min + ((xDomain.max - xDomain.min) * k) / 64;
    refPoints.push([x(t), y(t ** -options.refExponent)]);
  }
  svg.path(refPoints, "#777777",
           'stroke-dasharray="6 3" class="reference-line"');

  series.forEach((s, i) => {
    const color = SERIES_COLORS[i % SERIES_COLORS.length];
    const pixels = points[i]
      .filter(([, v]) => !options.loglog || v > 0)
      .map(([it, v]): [number, number] => [x(it), y(v)]);
    svg.path(pixels, color, 'stroke-width="1.5" class="series-line"');
  });

  // legend, top-right
  const legendX = box.right - 230;
  series.forEach((s, i) => {
    const color = SERIES_COLORS[i % SERIES_COLORS.length];
    const ly = box.top + 14 + 16 * i;
    svg.line(legendX, ly - 4, legendX + 22, ly - 4, color,
             'stroke-width="2"');
    svg.text(legendX + 28, ly, s.label, 'font-size="11"');
  });
  const refY = box.top + 14 + 16 * series.length;
  svg.line(legendX, refY - 4, legendX + 22, refY - 4, "#777777",
           'stroke-dasharray="6 3"');
  svg.text(legendX + 28, refY, `x^-${options.refExponent}`, 'font-size="11"');

  return svg.render();
}
