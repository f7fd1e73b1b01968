/** Scaled group velocity against wavelength-to-depth ratio, one curve per
 * model family, on a logarithmic wavelength axis. */

import { line, scaleLinear, scaleLog } from "d3";

import { curveColor } from "./palette.js";
import { axisBottom, axisLeft, document, el, legend } from "./svg.js";
import type { DispersionTable } from "./tables.js";

const WIDTH = 640;
const HEIGHT = 420;
const MARGIN = { top: 16, right: 16, bottom: 48, left: 64 };

export function renderDispersion(table: DispersionTable): string {
  let ratioMin = Infinity;
  let ratioMax = -Infinity;
  let cgMax = 0;
  for (const curve of table.values()) {
    for (let i = 0; i < curve.kh.length; i++) {
      const ratio = (2 * Math.PI) / curve.kh[i];
      ratioMin = Math.min(ratioMin, ratio);
      ratioMax = Math.max(ratioMax, ratio);
      cgMax = Math.max(cgMax, curve.groupVelocity[i]);
    }
  }
  if (!Number.isFinite(ratioMin) || ratioMin <= 0) {
    throw new Error("dispersion table has no usable wavenumbers");
  }

  const x = scaleLog([ratioMin, ratioMax], [MARGIN.left, WIDTH - MARGIN.right]);
  const y = scaleLinear([0, Math.max(1.05, cgMax * 1.05)],
    [HEIGHT - MARGIN.bottom, MARGIN.top]);

  const body: string[] = [];
  const entries: Array<{ label: string; color: string }> = [];
  let idx = 0;
  for (const [model, curve] of table) {
    const color = curveColor(idx);
    const gen = line<number>()
      .x((i) => x((2 * Math.PI) / curve.kh[i]))
      .y((i) => y(curve.groupVelocity[i]));
    const d = gen(curve.kh.map((_, i) => i));
    if (d !== null) {
      body.push(el("path", {
        class: "dispersion-curve", "data-model": model, d, fill: "none",
        stroke: color, "stroke-width": 1.5,
      }));
    }
    entries.push({ label: model, color });
    idx += 1;
  }

  body.push(axisBottom(x, HEIGHT - MARGIN.bottom,
    "wavelength / still-water depth"));
  body.push(axisLeft(y, MARGIN.left, "group velocity / long-wave speed"));
  body.push(legend(WIDTH - MARGIN.right - 120, MARGIN.top + 10, entries));
  return document(WIDTH, HEIGHT, body);
}
