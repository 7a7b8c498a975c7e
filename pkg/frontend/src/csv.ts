/**
 * Readers for the optimizer's CSV outputs.
 *
 * History files carry one row per iteration with the fixed header
 * `iter,J_inf,J_2,n_active,epsilon,step,psi,wall_ms`.  Shape files carry the
 * closed boundary polygon in columns x,y and optionally an active-point
 * block in columns active_x,active_y; the shorter block is padded with
 * empty fields.
 */

export const HISTORY_COLUMNS = [
  "iter",
  "J_inf",
  "J_2",
  "n_active",
  "epsilon",
  "step",
  "psi",
  "wall_ms",
] as const;

export type HistoryColumn = (typeof HISTORY_COLUMNS)[number];

export interface HistoryData {
  rows: Record<HistoryColumn, number>[];
}

export interface ShapeData {
  /** closed polygon: last point repeats the first */
  polygon: [number, number][];
  active: [number, number][];
}

export class SchemaError extends Error {}

const splitLines = (text: string): string[] =>
  text.split("\n").map((line) => line.trim()).filter((line) => line.length > 0);

const parseNumber = (field: string, where: string): number => {
  const value = Number(field);
  if (field === "" || Number.isNaN(value)) {
    throw new SchemaError(`non-numeric value ${JSON.stringify(field)} in ${where}`);
  }
  return value;
};

export function parseHistoryCsv(text: string): HistoryData {
  const lines = splitLines(text);
  if (lines.length === 0) {
    throw new SchemaError("history file is empty");
  }
  const header = lines[0].split(",");
  for (const column of HISTORY_COLUMNS) {
    if (!header.includes(column)) {
      throw new SchemaError(`history file missing column '${column}'`);
    }
  }
  const index = new Map(header.map((name, i) => [name, i]));
  const rows = lines.slice(1).map((line, k) => {
    const fields = line.split(",");
    const row = {} as Record<HistoryColumn, number>;
    for (const column of HISTORY_COLUMNS) {
      row[column] = parseNumber(fields[index.get(column)!], `row ${k + 1}`);
    }
    return row;
  });
  return { rows };
}

export function parseShapeCsv(text: string): ShapeData {
  const lines = splitLines(text);
  if (lines.length === 0) {
    throw new SchemaError("shape file is empty");
  }
  const header = lines[0].split(",");
  for (const column of ["x", "y"]) {
    if (!header.includes(column)) {
      throw new SchemaError(`shape file missing column '${column}'`);
    }
  }
  const hasActive = header.includes("active_x") && header.includes("active_y");
  const col = (name: string) => header.indexOf(name);
  const polygon: [number, number][] = [];
  const active: [number, number][] = [];
  for (const [k, line] of lines.slice(1).entries()) {
    const fields = line.split(",");
    const px = fields[col("x")] ?? "";
    if (px !== "") {
      polygon.push([
        parseNumber(px, `row ${k + 1}`),
        parseNumber(fields[col("y")] ?? "", `row ${k + 1}`),
      ]);
    }
    if (hasActive) {
      const ax = fields[col("active_x")] ?? "";
      if (ax !== "") {
        active.push([
          parseNumber(ax, `row ${k + 1}`),
          parseNumber(fields[col("active_y")] ?? "", `row ${k + 1}`),
        ]);
      }
    }
  }
  if (polygon.length < 4) {
    throw new SchemaError("shape file has no closed polygon");
  }
  return { polygon, active };
}
