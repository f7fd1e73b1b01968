/** Overlay of surface-elevation transects from one or more runs. */

import { extent, line, scaleLinear } from "d3";

import { curveColor } from "./palette.js";
import { axisBottom, axisLeft, document, el, legend } from "./svg.js";
import type { Transect } from "./tables.js";

export interface LabeledTransect {
  label: string;
  transect: Transect;
}

const WIDTH = 720;
const HEIGHT = 420;
const MARGIN = { top: 16, right: 16, bottom: 48, left: 64 };

export function renderTransectOverlay(inputs: LabeledTransect[]): string {
  if (inputs.length === 0) {
    throw new Error("no transects to plot");
  }
  const allS: number[] = [];
  const allEta: number[] = [];
  for (const { transect } of inputs) {
    for (let i = 0; i < transect.s.length; i++) {
      if (Number.isFinite(transect.eta[i])) {
        allS.push(transect.s[i]);
        allEta.push(transect.eta[i]);
      }
    }
  }
  if (allS.length === 0) {
    throw new Error("no finite surface samples in any transect");
  }
  const [s0, s1] = extent(allS) as [number, number];
  const [e0, e1] = extent(allEta) as [number, number];
  const pad = Math.max((e1 - e0) * 0.05, 1e-12);

  const x = scaleLinear([s0, s1], [MARGIN.left, WIDTH - MARGIN.right]);
  const y = scaleLinear([e0 - pad, e1 + pad],
    [HEIGHT - MARGIN.bottom, MARGIN.top]);

  const body: string[] = [];
  inputs.forEach(({ transect }, idx) => {
    const gen = line<number>()
      .defined((i) => Number.isFinite(transect.eta[i]))
      .x((i) => x(transect.s[i]))
      .y((i) => y(transect.eta[i]));
    const d = gen(transect.s.map((_, i) => i));
    if (d !== null) {
      body.push(el("path", {
        class: "transect-line", d, fill: "none",
        stroke: curveColor(idx), "stroke-width": 1.5,
      }));
    }
  });

  body.push(axisBottom(x, HEIGHT - MARGIN.bottom, "distance along transect (m)"));
  body.push(axisLeft(y, MARGIN.left, "surface elevation (m)"));
  body.push(legend(MARGIN.left + 14, MARGIN.top + 10,
    inputs.map(({ label }, idx) => ({ label, color: curveColor(idx) }))));
  return document(WIDTH, HEIGHT, body);
}
