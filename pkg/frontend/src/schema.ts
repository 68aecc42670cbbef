// Telemetry CSV schema: parsing and validation.
//
// The producer writes one row per step with a frozen column order:
// t, per-vehicle blocks of 16 columns, path state, barycenter error,
// formation-error components, pairwise distances, colav_active.

import Papa from "papaparse";
import { readFileSync } from "node:fs";

export class SchemaError extends Error {}

export interface SimLog {
  n: number;
  t: number[];
  /** per vehicle i (0-based): column arrays keyed by base name */
  vehicles: Record<string, number[]>[];
  xi: number[];
  xiDot: number[];
  xbp: number[];
  ybp: number[];
  zbp: number[];
  /** sigma2[i][axis] for i = 0..n-2, axis 0..2 */
  sigma2: number[][][];
  /** pair distances in (i, j) order with i < j */
  distances: { i: number; j: number; values: number[] }[];
  colav: number[];
}

const VEHICLE_FIELDS = [
  "x", "y", "z", "theta", "psi",
  "u", "v", "w", "q", "r",
  "u_d", "theta_d", "psi_d",
  "f_u", "t_q", "t_r",
];

export function expectedHeader(n: number): string[] {
  const cols = ["t"];
  for (let i = 1; i <= n; i++) {
    for (const f of VEHICLE_FIELDS) cols.push(`${f}_${i}`);
  }
  cols.push("xi", "xi_dot", "xbp", "ybp", "zbp");
  for (let i = 1; i < n; i++) cols.push(`sigma2_${i}_x`, `sigma2_${i}_y`, `sigma2_${i}_z`);
  for (let i = 1; i <= n; i++) {
    for (let j = i + 1; j <= n; j++) cols.push(`d_${i}_${j}`);
  }
  cols.push("colav_active");
  return cols;
}

export function parseLog(path: string): SimLog {
  const text = readFileSync(path, "utf8");
  const parsed = Papa.parse<string[]>(text.trim(), { skipEmptyLines: true });
  if (parsed.errors.length > 0) {
    throw new SchemaError(`CSV parse failure: ${parsed.errors[0].message}`);
  }
  const rows = parsed.data;
  if (rows.length < 2) throw new SchemaError("CSV has no data rows");
  const header = rows[0];

  const n = header.filter((c) => /^x_\d+$/.test(c)).length;
  if (n < 1) throw new SchemaError("no vehicle columns found (x_1, x_2, ...)");
  const expected = expectedHeader(n);
  const missing = expected.filter((c) => !header.includes(c));
  const extra = header.filter((c) => !expected.includes(c));
  if (missing.length > 0 || extra.length > 0) {
    throw new SchemaError(
      `schema mismatch: missing columns [${missing.join(", ")}], ` +
        `unexpected columns [${extra.join(", ")}]`
    );
  }

  const width = header.length;
  const col: Record<string, number[]> = {};
  header.forEach((name) => (col[name] = []));
  for (let r = 1; r < rows.length; r++) {
    const row = rows[r];
    if (row.length !== width) {
      throw new SchemaError(
        `row ${r} has ${row.length} fields, expected ${width} (truncated file?)`
      );
    }
    for (let c = 0; c < width; c++) {
      const v = Number(row[c]);
      if (!Number.isFinite(v)) {
        throw new SchemaError(`row ${r}, column ${header[c]}: not a number`);
      }
      col[header[c]].push(v);
    }
  }

  const vehicles = [];
  for (let i = 1; i <= n; i++) {
    const block: Record<string, number[]> = {};
    for (const f of VEHICLE_FIELDS) block[f] = col[`${f}_${i}`];
    vehicles.push(block);
  }
  const sigma2: number[][][] = [];
  for (let i = 1; i < n; i++) {
    sigma2.push([col[`sigma2_${i}_x`], col[`sigma2_${i}_y`], col[`sigma2_${i}_z`]]);
  }
  const distances = [];
  for (let i = 1; i <= n; i++) {
    for (let j = i + 1; j <= n; j++) {
      distances.push({ i, j, values: col[`d_${i}_${j}`] });
    }
  }
  return {
    n,
    t: col["t"],
    vehicles,
    xi: col["xi"],
    xiDot: col["xi_dot"],
    xbp: col["xbp"],
    ybp: col["ybp"],
    zbp: col["zbp"],
    sigma2,
    distances,
    colav: col["colav_active"],
  };
}

/** Contiguous [t_on, t_off] spans where the collision-avoidance flag is set. */
export function colavIntervals(log: SimLog): [number, number][] {
  const spans: [number, number][] = [];
  let active = false;
  let start = 0;
  for (let k = 0; k < log.t.length; k++) {
    const flag = log.colav[k] !== 0;
    if (flag && !active) {
      active = true;
      start = log.t[k];
    } else if (!flag && active) {
      spans.push([start, log.t[k]]);
      active = false;
    }
  }
  if (active) spans.push([start, log.t[log.t.length - 1]]);
  return spans;
}
