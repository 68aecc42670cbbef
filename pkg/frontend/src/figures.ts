// The four figure kinds rendered from a telemetry CSV:
//
//   errors      path-following error components vs time
//   distances   pairwise vehicle distances with the activation line and
//               collision-avoidance shading
//   formation   formation-error components (three stacked panels, one
//               trace per vehicle, the last derived from zero-sum)
//   trajectory3d  isometric 3D trajectories with time-synced formation
//               markers connected by dotted lines
//
// Rendering is pure: identical input bytes give identical SVG bytes.

import {
  SERIES_COLORS,
  Svg,
  drawColavBands,
  drawLegend,
  drawPanel,
  drawSeries,
  extent,
} from "./svg.js";
import { SimLog, colavIntervals } from "./schema.js";

export type FigureKind = "errors" | "distances" | "formation" | "trajectory3d";

export interface FigureOptions {
  dColav?: number; // activation-distance line on the distances figure
  markerInterval?: number; // seconds between trajectory markers
}

export const FIGURE_KINDS: FigureKind[] = [
  "errors",
  "distances",
  "formation",
  "trajectory3d",
];

const WIDTH = 720;

export function render(kind: FigureKind, log: SimLog, opts: FigureOptions = {}): string {
  switch (kind) {
    case "errors":
      return renderErrors(log);
    case "distances":
      return renderDistances(log, opts.dColav ?? 10);
    case "formation":
      return renderFormation(log);
    case "trajectory3d":
      return renderTrajectory(log, opts.markerInterval ?? 25);
    default:
      throw new Error(`unknown figure kind ${kind}`);
  }
}

function timeDomain(log: SimLog): [number, number] {
  return [log.t[0], log.t[log.t.length - 1]];
}

function renderErrors(log: SimLog): string {
  const svg = new Svg(WIDTH, 320);
  const panel = drawPanel(
    svg,
    { x: 60, y: 40, width: WIDTH - 90, height: 230 },
    timeDomain(log),
    extent([...log.xbp, ...log.ybp, ...log.zbp]),
    { title: "Path-following error", xLabel: "t [s]", yLabel: "error [m]" }
  );
  drawColavBands(svg, panel, colavIntervals(log));
  const series: [string, number[]][] = [
    ["along-track", log.xbp],
    ["cross-track y", log.ybp],
    ["cross-track z", log.zbp],
  ];
  series.forEach(([label, values], k) =>
    drawSeries(svg, panel, log.t, values, SERIES_COLORS[k])
  );
  drawLegend(
    svg,
    panel.x + 8,
    panel.y + 14,
    series.map(([label], k) => ({ label, color: SERIES_COLORS[k] }))
  );
  return svg.toString();
}

function renderDistances(log: SimLog, dColav: number): string {
  const svg = new Svg(WIDTH, 320);
  const all = log.distances.flatMap((d) => d.values);
  const panel = drawPanel(
    svg,
    { x: 60, y: 40, width: WIDTH - 90, height: 230 },
    timeDomain(log),
    extent([...all, 0, dColav * 1.1]),
    { title: "Distance between the vehicles", xLabel: "t [s]", yLabel: "distance [m]" }
  );
  drawColavBands(svg, panel, colavIntervals(log));
  log.distances.forEach((d, k) =>
    drawSeries(svg, panel, log.t, d.values, SERIES_COLORS[k % SERIES_COLORS.length])
  );
  // activation-distance line
  const y = panel.sy(dColav);
  svg.line(panel.x, y, panel.x + panel.width, y, 'stroke="#222" stroke-width="1" stroke-dasharray="6 3"');
  drawLegend(svg, panel.x + panel.width - 120, panel.y + panel.height - 8 - 14 * (log.distances.length + 1), [
    ...log.distances.map((d, k) => ({
      label: `d_${d.i},${d.j}`,
      color: SERIES_COLORS[k % SERIES_COLORS.length],
    })),
    { label: "activation", color: "#222", dash: "6 3" },
  ]);
  return svg.toString();
}

function renderFormation(log: SimLog): string {
  // per-vehicle traces: the first n-1 from the log, the last one from
  // the zero-sum property of barycenter-relative errors
  const n = log.n;
  const K = log.t.length;
  const perVehicle: number[][][] = []; // [vehicle][axis][k]
  for (let i = 0; i < n - 1; i++) perVehicle.push(log.sigma2[i]);
  const last: number[][] = [0, 1, 2].map((axis) => {
    const out = new Array(K).fill(0);
    for (let i = 0; i < n - 1; i++) {
      for (let k = 0; k < K; k++) out[k] -= log.sigma2[i][axis][k];
    }
    return out;
  });
  perVehicle.push(last);

  const svg = new Svg(WIDTH, 640);
  const labels = ["x", "y", "z"];
  const intervals = colavIntervals(log);
  for (let axis = 0; axis < 3; axis++) {
    const values = perVehicle.flatMap((v) => v[axis]);
    const panel = drawPanel(
      svg,
      { x: 60, y: 50 + axis * 195, width: WIDTH - 90, height: 150 },
      timeDomain(log),
      extent(values),
      {
        title: axis === 0 ? "Formation-keeping error" : undefined,
        xLabel: axis === 2 ? "t [s]" : undefined,
        yLabel: `sigma_${labels[axis]} [m]`,
        xTicks: axis === 2,
      }
    );
    drawColavBands(svg, panel, intervals);
    perVehicle.forEach((v, i) =>
      drawSeries(svg, panel, log.t, v[axis], SERIES_COLORS[i % SERIES_COLORS.length])
    );
    if (axis === 0) {
      drawLegend(
        svg,
        panel.x + panel.width - 90,
        panel.y + 14,
        perVehicle.map((_, i) => ({
          label: `vehicle ${i + 1}`,
          color: SERIES_COLORS[i % SERIES_COLORS.length],
        }))
      );
    }
  }
  return svg.toString();
}

function isoProject(x: number, y: number, z: number): [number, number] {
  // NED isometric look: east-north spread horizontally, depth downward
  const c = Math.cos(Math.PI / 6);
  const s = Math.sin(Math.PI / 6);
  return [(x - y) * c, (x + y) * s + z];
}

function renderTrajectory(log: SimLog, markerInterval: number): string {
  const n = log.n;
  const K = log.t.length;
  const projected: [number, number][][] = [];
  for (let i = 0; i < n; i++) {
    const pts: [number, number][] = [];
    const v = log.vehicles[i];
    for (let k = 0; k < K; k++) pts.push(isoProject(v.x[k], v.y[k], v.z[k]));
    projected.push(pts);
  }
  const xs = projected.flatMap((pts) => pts.map((p) => p[0]));
  const ys = projected.flatMap((pts) => pts.map((p) => p[1]));

  const svg = new Svg(WIDTH, 520);
  const panel = drawPanel(
    svg,
    { x: 60, y: 40, width: WIDTH - 90, height: 430 },
    extent(xs),
    extent(ys),
    { title: "3D trajectory (isometric view)", xLabel: "east-north [m]", yLabel: "depth-north [m]" }
  );
  projected.forEach((pts, i) => {
    const scaled: [number, number][] = pts.map(([x, y]) => [panel.sx(x), panel.sy(y)]);
    svg.polyline(scaled, `stroke="${SERIES_COLORS[i % SERIES_COLORS.length]}" stroke-width="1.2"`);
  });

  // time-synced markers with dotted formation polygons
  const dt = log.t.length > 1 ? log.t[1] - log.t[0] : 1;
  for (let m = 0; ; m++) {
    const tm = m * markerInterval;
    if (tm > log.t[K - 1] + dt / 2) break;
    const k = Math.min(Math.round(tm / dt), K - 1);
    const corners: [number, number][] = [];
    for (let i = 0; i < n; i++) {
      const [px, py] = projected[i][k];
      const sxy: [number, number] = [panel.sx(px), panel.sy(py)];
      corners.push(sxy);
      svg.circle(
        sxy[0],
        sxy[1],
        3,
        `class="marker" data-t="${log.t[k]}" fill="${SERIES_COLORS[i % SERIES_COLORS.length]}" stroke="white" stroke-width="0.8"`
      );
    }
    if (n > 1) {
      svg.polyline(
        [...corners, corners[0]],
        'stroke="#555" stroke-width="0.8" stroke-dasharray="2 3"'
      );
    }
    svg.text(corners[0][0] + 6, corners[0][1] - 6, `${Math.round(log.t[k])}s`, 'font-size="8" fill="#555"');
  }
  return svg.toString();
}
