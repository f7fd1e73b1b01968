/** Parsers for the simulator's CSV outputs (transects and dispersion tables).
 *
 * Both formats are plain UTF-8 text with a fixed header line.  Parse errors
 * always name the offending file and line so a bad artifact can be located
 * without re-running anything.
 */

export interface Transect {
  /** arc length along the sampled segment, metres */
  s: number[];
  /** free-surface elevation, metres; NaN where no cell covers the point */
  eta: number[];
}

export interface DispersionCurve {
  /** dimensionless wavenumber k*h0 */
  kh: number[];
  /** angular frequency */
  omega: number[];
  /** group velocity scaled by the long-wave speed */
  groupVelocity: number[];
}

export type DispersionTable = Map<string, DispersionCurve>;

const TRANSECT_HEADER = "s,x,y,eta,h,B,level";
const DISPERSION_HEADER = "kh0,model,omega,scaled_group_velocity";

function fail(name: string, line: number, message: string): never {
  throw new Error(`${name}:${line}: ${message}`);
}

function splitLines(text: string): string[] {
  const lines = text.split(/\r?\n/);
  while (lines.length > 0 && lines[lines.length - 1].trim() === "") {
    lines.pop();
  }
  return lines;
}

/** Parse a number field, accepting "nan" as produced by the simulator. */
function parseField(
  token: string, name: string, line: number, column: string,
): number {
  const t = token.trim();
  if (/^nan$/i.test(t)) return NaN;
  const v = Number(t);
  if (t === "" || !Number.isFinite(v)) {
    fail(name, line, `cannot parse ${column} value '${token}'`);
  }
  return v;
}

export function parseTransect(text: string, name: string): Transect {
  const lines = splitLines(text);
  if (lines.length === 0) fail(name, 1, "empty file");
  if (lines[0].trim() !== TRANSECT_HEADER) {
    fail(name, 1, `expected header '${TRANSECT_HEADER}', got '${lines[0]}'`);
  }
  const s: number[] = [];
  const eta: number[] = [];
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(",");
    if (parts.length !== 7) {
      fail(name, i + 1, `expected 7 comma-separated fields, got ${parts.length}`);
    }
    s.push(parseField(parts[0], name, i + 1, "s"));
    const t = parts[3].trim();
    eta.push(/^nan$/i.test(t) ? NaN : parseField(parts[3], name, i + 1, "eta"));
  }
  if (s.length === 0) fail(name, 1, "no data rows");
  return { s, eta };
}

export function parseDispersion(text: string, name: string): DispersionTable {
  const lines = splitLines(text);
  if (lines.length === 0) fail(name, 1, "empty file");
  if (lines[0].trim() !== DISPERSION_HEADER) {
    fail(name, 1, `expected header '${DISPERSION_HEADER}', got '${lines[0]}'`);
  }
  const table: DispersionTable = new Map();
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(",");
    if (parts.length !== 4) {
      fail(name, i + 1, `expected 4 comma-separated fields, got ${parts.length}`);
    }
    const model = parts[1].trim();
    if (model === "") fail(name, i + 1, "empty model name");
    let curve = table.get(model);
    if (curve === undefined) {
      curve = { kh: [], omega: [], groupVelocity: [] };
      table.set(model, curve);
    }
    curve.kh.push(parseField(parts[0], name, i + 1, "kh0"));
    curve.omega.push(parseField(parts[2], name, i + 1, "omega"));
    curve.groupVelocity.push(
      parseField(parts[3], name, i + 1, "scaled_group_velocity"));
  }
  if (table.size === 0) fail(name, 1, "no data rows");
  return table;
}
