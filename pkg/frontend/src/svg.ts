/** Minimal SVG document builder plus axis rendering for d3 scales.
 *
 * Figures are assembled as plain strings; no DOM is involved, so the
 * renderers run under node and write the file directly.
 */

import type { ScaleContinuousNumeric } from "d3";

export type Attrs = Record<string, string | number>;

const ESCAPES: Record<string, string> = {
  "&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;",
};

export function escapeText(text: string): string {
  return text.replace(/[&<>"]/g, (c) => ESCAPES[c]);
}

export function el(tag: string, attrs: Attrs, body = ""): string {
  const parts = Object.entries(attrs)
    .map(([k, v]) => `${k}="${typeof v === "number" ? fmt(v) : escapeText(v)}"`);
  const open = `<${tag}${parts.length > 0 ? " " + parts.join(" ") : ""}`;
  return body === "" ? `${open}/>` : `${open}>${body}</${tag}>`;
}

/** Compact coordinate formatting keeps large cell-level figures small. */
export function fmt(v: number): string {
  const r = Math.round(v * 100) / 100;
  return Object.is(r, -0) ? "0" : String(r);
}

export interface Margins {
  top: number;
  right: number;
  bottom: number;
  left: number;
}

export function document(
  width: number, height: number, body: string[],
): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" `
    + `height="${height}" viewBox="0 0 ${width} ${height}" `
    + `font-family="sans-serif" font-size="12">`,
    el("rect", { x: 0, y: 0, width, height, fill: "white" }),
    ...body,
    "</svg>",
  ].join("\n");
}

type Scale = ScaleContinuousNumeric<number, number>;

export function axisBottom(
  scale: Scale, y: number, label: string, tickCount = 6,
): string {
  const [x0, x1] = scale.range();
  const format = scale.tickFormat(tickCount);
  const parts = [el("line", {
    x1: x0, y1: y, x2: x1, y2: y, stroke: "black",
  })];
  for (const t of scale.ticks(tickCount)) {
    const x = scale(t);
    parts.push(el("line", { x1: x, y1: y, x2: x, y2: y + 5, stroke: "black" }));
    parts.push(el("text", {
      x, y: y + 18, "text-anchor": "middle",
    }, escapeText(format(t))));
  }
  parts.push(el("text", {
    x: (x0 + x1) / 2, y: y + 34, "text-anchor": "middle",
  }, escapeText(label)));
  return parts.join("\n");
}

export function axisLeft(
  scale: Scale, x: number, label: string, tickCount = 6,
): string {
  const [y1, y0] = scale.range();
  const format = scale.tickFormat(tickCount);
  const parts = [el("line", {
    x1: x, y1: y0, x2: x, y2: y1, stroke: "black",
  })];
  for (const t of scale.ticks(tickCount)) {
    const y = scale(t);
    parts.push(el("line", { x1: x - 5, y1: y, x2: x, y2: y, stroke: "black" }));
    parts.push(el("text", {
      x: x - 8, y: y + 4, "text-anchor": "end",
    }, escapeText(format(t))));
  }
  parts.push(el("g", {
    transform: `translate(${fmt(x - 40)} ${fmt((y0 + y1) / 2)}) rotate(-90)`,
  }, el("text", { "text-anchor": "middle" }, escapeText(label))));
  return parts.join("\n");
}

/** One legend row per entry, anchored at (x, y), rows 18 px apart. */
export function legend(
  x: number, y: number, entries: Array<{ label: string; color: string }>,
): string {
  return entries.map((e, i) => {
    const yy = y + 18 * i;
    return el("g", { class: "legend-entry" },
      el("line", {
        x1: x, y1: yy, x2: x + 22, y2: yy, stroke: e.color, "stroke-width": 2,
      })
      + el("text", { x: x + 28, y: yy + 4 }, escapeText(e.label)));
  }).join("\n");
}
