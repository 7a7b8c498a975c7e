/**
 * Shape snapshots: the closed boundary polygon with the near-active mesh
 * nodes overlaid as markers, equal-aspect; several snapshots render as a
 * row of subplots in the given order.
 */
import { ShapeData } from "./csv.js";
import { Svg } from "./svg.js";

export interface ShapePanel {
  title: string;
  shape: ShapeData;
}

export function renderShapes(panels: ShapePanel[], size = 300): string {
  if (panels.length === 0) {
    throw new Error("at least one shape file is required");
  }
  const pad = 24;
  const width = panels.length * size;
  const height = size + 24;
  const svg = new Svg(width, height);

  panels.forEach((panel, k) => {
    const xs = panel.shape.polygon.map((p) => p[0])
      .concat(panel.shape.active.map((p) => p[0]));
    const ys = panel.shape.polygon.map((p) => p[1])
      .concat(panel.shape.active.map((p) => p[1]));
    const cx = (Math.min(...xs) + Math.max(...xs)) / 2;
    const cy = (Math.min(...ys) + Math.max(...ys)) / 2;
    const half = Math.max(
      (Math.max(...xs) - Math.min(...xs)) / 2,
      (Math.max(...ys) - Math.min(...ys)) / 2,
    ) || 1;
    const scale = (size / 2 - pad) / half;
    const left = k * size;
    const toPx = ([x, y]: [number, number]): [number, number] => [
      left + size / 2 + (x - cx) * scale,
      size / 2 - (y - cy) * scale + 12,
    ];

    svg.path(panel.shape.polygon.map(toPx), "#d62728",
             'stroke-width="1.5" class="boundary"');
    for (const p of panel.shape.active) {
      const [px, py] = toPx(p);
      svg.circle(px, py, 2.2, "#1f77b4");
    }
    svg.text(left + size / 2, 12, panel.title,
             'font-size="12" text-anchor="middle"');
  });
  return svg.render();
}
