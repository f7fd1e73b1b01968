/** Surface-elevation colormap of a full patch hierarchy at one time.
 *
 * Patches are painted coarsest first so refined data covers the coarse data
 * underneath; each patch then gets an outline in its level's color.  The
 * color range is symmetric about the reference surface so still water reads
 * as white.
 */

import { scaleLinear } from "d3";

import { divergingColor, levelOutlineColor } from "./palette.js";
import { document, el, legend } from "./svg.js";
import type { FrameSet, Patch } from "./frames.js";

const WIDTH = 640;
const MARGIN = { top: 28, right: 96, bottom: 40, left: 56 };

export function renderFrame(frame: FrameSet, seaLevel = 0): string {
  const patches = [...frame.patches].sort((a, b) => a.level - b.level);

  let x0 = Infinity;
  let x1 = -Infinity;
  let y0 = Infinity;
  let y1 = -Infinity;
  let amp = 0;
  for (const p of patches) {
    x0 = Math.min(x0, p.xLo);
    x1 = Math.max(x1, p.xLo + p.mx * p.dx);
    y0 = Math.min(y0, p.yLo);
    y1 = Math.max(y1, p.yLo + p.my * p.dy);
    for (const v of p.surface) {
      if (Number.isFinite(v)) amp = Math.max(amp, Math.abs(v - seaLevel));
    }
  }
  if (amp === 0) amp = 1e-30; // a perfectly flat frame still renders

  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = Math.max(1, Math.round(plotW * (y1 - y0) / (x1 - x0)));
  const height = plotH + MARGIN.top + MARGIN.bottom;
  const sx = scaleLinear([x0, x1], [MARGIN.left, MARGIN.left + plotW]);
  const sy = scaleLinear([y0, y1], [MARGIN.top + plotH, MARGIN.top]);

  const body: string[] = [];
  for (const p of patches) {
    body.push(renderCells(p, sx, sy, seaLevel, amp));
  }
  for (const p of patches) {
    body.push(el("rect", {
      class: "patch-outline", "data-level": p.level,
      x: sx(p.xLo), y: sy(p.yLo + p.my * p.dy),
      width: sx(p.xLo + p.mx * p.dx) - sx(p.xLo),
      height: sy(p.yLo) - sy(p.yLo + p.my * p.dy),
      fill: "none", stroke: levelOutlineColor(p.level), "stroke-width": 1.5,
    }));
  }

  body.push(el("text", {
    x: MARGIN.left, y: MARGIN.top - 10,
  }, `t = ${frame.time} s`));
  body.push(colorbar(MARGIN.left + plotW + 16, MARGIN.top, plotH, amp));

  const levels = [...new Set(patches.map((p) => p.level))].sort((a, b) => a - b);
  body.push(legend(MARGIN.left, MARGIN.top + plotH + 16,
    levels.map((l) => ({ label: `level ${l}`, color: levelOutlineColor(l) }))));
  return document(WIDTH, Math.max(height, MARGIN.top + plotH + 24
    + 18 * levels.length), body);
}

type Scale = (v: number) => number;

function renderCells(
  p: Patch, sx: Scale, sy: Scale, seaLevel: number, amp: number,
): string {
  const cells: string[] = [];
  for (let i = 0; i < p.mx; i++) {
    const cx0 = sx(p.xLo + i * p.dx);
    const cx1 = sx(p.xLo + (i + 1) * p.dx);
    for (let j = 0; j < p.my; j++) {
      const cy0 = sy(p.yLo + (j + 1) * p.dy);
      const cy1 = sy(p.yLo + j * p.dy);
      const v = p.surface[i * p.my + j];
      cells.push(el("rect", {
        x: cx0, y: cy0,
        width: Math.max(cx1 - cx0, 0.1), height: Math.max(cy1 - cy0, 0.1),
        fill: divergingColor((v - seaLevel) / amp),
      }));
    }
  }
  return el("g", { class: "patch-cells", "data-level": p.level },
    cells.join(""));
}

function colorbar(x: number, y: number, h: number, amp: number): string {
  const steps = 64;
  const parts: string[] = [];
  for (let k = 0; k < steps; k++) {
    const t = 1 - (2 * k) / (steps - 1);
    parts.push(el("rect", {
      x, y: y + (h * k) / steps, width: 14, height: h / steps + 0.5,
      fill: divergingColor(t),
    }));
  }
  parts.push(el("rect", {
    x, y, width: 14, height: h, fill: "none", stroke: "black",
  }));
  const label = (v: number, yy: number): string => el("text", {
    x: x + 18, y: yy, "font-size": 11,
  }, fmtAmp(v));
  parts.push(label(amp, y + 10));
  parts.push(label(0, y + h / 2 + 4));
  parts.push(label(-amp, y + h));
  return el("g", { class: "colorbar" }, parts.join(""));
}

function fmtAmp(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  const text = a >= 0.01 && a < 1000 ? v.toFixed(3) : v.toExponential(2);
  return `${text} m`;
}
