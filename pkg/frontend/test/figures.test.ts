// Figure-rendering tests against a real reference-scenario telemetry
// CSV (produced by the simulator CLI at dt = 0.05) plus synthetic
// edge-case files.

import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { main } from "../src/cli.js";
import { FIGURE_KINDS, render } from "../src/figures.js";
import { SchemaError, colavIntervals, expectedHeader, parseLog } from "../src/schema.js";

const FIXTURE = join(__dirname, "fixtures", "reference_spiral.csv");

function tmp(): string {
  return mkdtempSync(join(tmpdir(), "plots-"));
}

function syntheticCsv(rows: number, colav: (k: number) => number): string {
  const header = expectedHeader(3);
  const lines = [header.join(",")];
  for (let k = 0; k < rows; k++) {
    const row = header.map((name) => {
      if (name === "t") return (k * 0.1).toString();
      if (name === "colav_active") return colav(k).toString();
      if (name.startsWith("x_")) return (k * 0.1).toString();
      if (name.startsWith("d_")) return "15";
      return "0";
    });
    lines.push(row.join(","));
  }
  return lines.join("\n") + "\n";
}

describe("schema", () => {
  it("parses the reference run", () => {
    const log = parseLog(FIXTURE);
    expect(log.n).toBe(3);
    expect(log.t.length).toBe(3001);
    expect(log.distances.length).toBe(3);
    expect(log.sigma2.length).toBe(2);
  });

  it("rejects a truncated file with a clean error", () => {
    const dir = tmp();
    const text = readFileSync(FIXTURE, "utf8").split("\n");
    const broken = [...text.slice(0, 40), text[40].slice(0, 100)].join("\n");
    const path = join(dir, "trunc.csv");
    writeFileSync(path, broken + "\n");
    expect(() => parseLog(path)).toThrow(SchemaError);
    expect(main(["errors", path, "-o", join(dir, "x.svg")])).toBe(1);
  });

  it("lists missing columns on schema mismatch", () => {
    const dir = tmp();
    const text = readFileSync(FIXTURE, "utf8");
    const path = join(dir, "renamed.csv");
    writeFileSync(path, text.replace("xi_dot", "xdot"));
    try {
      parseLog(path);
      expect.unreachable("schema error expected");
    } catch (err) {
      expect(err).toBeInstanceOf(SchemaError);
      expect(String(err)).toContain("xi_dot");
    }
  });
});

describe("figures", () => {
  it("renders all four kinds from the reference run", () => {
    const dir = tmp();
    const log = parseLog(FIXTURE);
    for (const kind of FIGURE_KINDS) {
      const out = join(dir, `${kind}.svg`);
      expect(main([kind, FIXTURE, "-o", out])).toBe(0);
      const svg = readFileSync(out, "utf8");
      expect(svg.length).toBeGreaterThan(2000);
      expect(svg.startsWith("<svg")).toBe(true);
      expect(svg.trimEnd().endsWith("</svg>")).toBe(true);
      // deterministic: rendering again gives identical bytes
      expect(render(kind, log)).toBe(svg);
    }
  });

  it("shading bands equal the colav support of the CSV", () => {
    const log = parseLog(FIXTURE);
    const expected = colavIntervals(log);
    expect(expected.length).toBeGreaterThan(0);
    for (const kind of ["errors", "distances", "formation"] as const) {
      const svg = render(kind, log);
      const bands = [...svg.matchAll(/data-t0="([^"]+)" data-t1="([^"]+)"/g)].map(
        (m) => [Number(m[1]), Number(m[2])] as [number, number]
      );
      // the formation figure repeats the bands on each of its panels
      const uniq = Array.from(new Set(bands.map((b) => b.join(",")))).map(
        (s) => s.split(",").map(Number) as [number, number]
      );
      uniq.sort((a, b) => a[0] - b[0]);
      expect(uniq).toEqual(expected);
    }
  });

  it("draws no bands when the flag never sets", () => {
    const dir = tmp();
    const path = join(dir, "quiet.csv");
    writeFileSync(path, syntheticCsv(50, () => 0));
    const svg = render("errors", parseLog(path));
    expect(svg.includes("colav-band")).toBe(false);
  });

  it("keeps a band open to the end when the flag never clears", () => {
    const dir = tmp();
    const path = join(dir, "busy.csv");
    writeFileSync(path, syntheticCsv(50, (k) => (k >= 10 ? 1 : 0)));
    const log = parseLog(path);
    expect(colavIntervals(log)).toEqual([[1.0, 4.9]]);
  });

  it("honors the marker interval", () => {
    const log = parseLog(FIXTURE);
    const svg = render("trajectory3d", log, { markerInterval: 50 });
    const markers = [...svg.matchAll(/class="marker" data-t="([^"]+)"/g)].map((m) =>
      Number(m[1])
    );
    expect(new Set(markers)).toEqual(new Set([0, 50, 100, 150]));
  });
});

describe("cli", () => {
  it("usage errors exit 2", () => {
    expect(main([])).toBe(2);
    expect(main(["nope", FIXTURE, "-o", "x.svg"])).toBe(2);
    expect(main(["errors", FIXTURE])).toBe(2);
  });

  it("missing input exits 1", () => {
    const dir = tmp();
    expect(main(["errors", join(dir, "absent.csv"), "-o", join(dir, "x.svg")])).toBe(1);
  });
});
