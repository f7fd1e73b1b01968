/** Color conventions shared by the figure renderers. */

/** Outline color per refinement level, fixed so figures from different runs
 * stay visually comparable.  Level 1 is the base grid and gets a neutral
 * gray; levels beyond the table wrap around. */
const LEVEL_OUTLINES: Record<number, string> = {
  2: "blue",
  3: "black",
  4: "magenta",
  5: "cyan",
  6: "black",
  7: "green",
};

export function levelOutlineColor(level: number): string {
  if (level <= 1) return "#888888";
  const keys = Object.keys(LEVEL_OUTLINES).length;
  const wrapped = 2 + ((level - 2) % keys);
  return LEVEL_OUTLINES[wrapped];
}

/** Line colors for overlaid curves, in assignment order. */
export const CURVE_COLORS = [
  "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

export function curveColor(index: number): string {
  return CURVE_COLORS[index % CURVE_COLORS.length];
}

function clampByte(x: number): number {
  return Math.max(0, Math.min(255, Math.round(x)));
}

function mix(a: [number, number, number], b: [number, number, number],
  t: number): string {
  const r = clampByte(a[0] + (b[0] - a[0]) * t);
  const g = clampByte(a[1] + (b[1] - a[1]) * t);
  const bb = clampByte(a[2] + (b[2] - a[2]) * t);
  return `rgb(${r},${g},${bb})`;
}

const BLUE: [number, number, number] = [33, 68, 170];
const WHITE: [number, number, number] = [255, 255, 255];
const RED: [number, number, number] = [178, 24, 43];

/** Diverging blue-white-red map over [-1, 1]; NaN renders gray. */
export function divergingColor(t: number): string {
  if (Number.isNaN(t)) return "rgb(200,200,200)";
  const c = Math.max(-1, Math.min(1, t));
  return c < 0 ? mix(WHITE, BLUE, -c) : mix(WHITE, RED, c);
}
