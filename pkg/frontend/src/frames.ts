/** Parser for the simulator's frame files: the full patch hierarchy at one
 * output time, written as self-delimiting text blocks.
 *
 * A frame starts with `# time T`, followed by one block per patch: a header
 * `patch level i_lo j_lo mx my dx dy x_lo y_lo` and then mx*my cell lines
 * (row-major, the y index varying fastest) with columns
 * `h hu hv surface psi1 psi2`.
 *
 * Loading also checks the hierarchy's structural rules — patches on one
 * level must not overlap, and every refined patch must sit inside the union
 * of the next-coarser level.  Violations are collected and reported to the
 * caller; the frame is still returned as written.
 */

export interface Patch {
  level: number;
  /** column index of the first cell in this level's index space */
  iLo: number;
  /** row index of the first cell in this level's index space */
  jLo: number;
  mx: number;
  my: number;
  dx: number;
  dy: number;
  /** physical coordinates of the patch's lower-left corner */
  xLo: number;
  yLo: number;
  /** free-surface elevation per cell, index i * my + j */
  surface: Float64Array;
}

export interface FrameSet {
  time: number;
  patches: Patch[];
  /** structural-rule violations found on load (empty when well nested) */
  violations: string[];
}

function fail(name: string, line: number, message: string): never {
  throw new Error(`${name}:${line}: ${message}`);
}

function parseNumber(
  token: string, name: string, line: number, what: string,
): number {
  const v = Number(token);
  if (token.trim() === "" || Number.isNaN(v)) {
    fail(name, line, `cannot parse ${what} value '${token}'`);
  }
  return v;
}

export function parseFrame(text: string, name: string): FrameSet {
  const lines = text.split(/\r?\n/);
  let ln = 0;
  const next = (): string | null => {
    while (ln < lines.length) {
      const line = lines[ln++];
      if (line.trim() !== "") return line;
    }
    return null;
  };

  const first = next();
  if (first === null) fail(name, 1, "empty file");
  const timeMatch = /^#\s*time\s+(\S+)$/.exec(first.trim());
  if (timeMatch === null) {
    fail(name, ln, `expected '# time T' header, got '${first}'`);
  }
  const time = parseNumber(timeMatch[1], name, ln, "time");

  const patches: Patch[] = [];
  for (let line = next(); line !== null; line = next()) {
    const headerLine = ln;
    const tokens = line.trim().split(/\s+/);
    if (tokens[0] !== "patch" || tokens.length !== 10) {
      fail(name, headerLine,
        `expected 'patch level i_lo j_lo mx my dx dy x_lo y_lo', got '${line}'`);
    }
    const nums = tokens.slice(1).map((t, i) =>
      parseNumber(t, name, headerLine, `patch field ${i + 1}`));
    const [level, iLo, jLo, mx, my, dx, dy, xLo, yLo] = nums;
    if (!Number.isInteger(level) || level < 1) {
      fail(name, headerLine, `patch level must be a positive integer, got ${level}`);
    }
    if (!Number.isInteger(mx) || !Number.isInteger(my) || mx < 1 || my < 1) {
      fail(name, headerLine, `patch size must be positive integers, got ${mx} x ${my}`);
    }
    const surface = new Float64Array(mx * my);
    for (let c = 0; c < mx * my; c++) {
      const cellLine = next();
      if (cellLine === null) {
        fail(name, ln, `patch at line ${headerLine} truncated: `
          + `${c} of ${mx * my} cells`);
      }
      const fields = cellLine.trim().split(/\s+/);
      if (fields.length !== 6) {
        fail(name, ln, `expected 6 cell fields, got ${fields.length}`);
      }
      surface[c] = parseNumber(fields[3], name, ln, "surface");
    }
    patches.push({ level, iLo, jLo, mx, my, dx, dy, xLo, yLo, surface });
  }
  if (patches.length === 0) fail(name, ln, "no patches in frame");
  return { time, patches, violations: checkNesting(patches) };
}

function overlap1d(a0: number, a1: number, b0: number, b1: number): boolean {
  return a0 < b1 && b0 < a1;
}

function describe(p: Patch): string {
  return `level ${p.level} patch [${p.iLo},${p.iLo + p.mx})x`
    + `[${p.jLo},${p.jLo + p.my})`;
}

/** Structural checks over one frame's patch list. */
export function checkNesting(patches: Patch[]): string[] {
  const violations: string[] = [];
  const byLevel = new Map<number, Patch[]>();
  for (const p of patches) {
    const list = byLevel.get(p.level);
    if (list === undefined) byLevel.set(p.level, [p]);
    else list.push(p);
  }

  for (const [level, list] of byLevel) {
    for (let a = 0; a < list.length; a++) {
      for (let b = a + 1; b < list.length; b++) {
        const pa = list[a];
        const pb = list[b];
        if (overlap1d(pa.iLo, pa.iLo + pa.mx, pb.iLo, pb.iLo + pb.mx)
          && overlap1d(pa.jLo, pa.jLo + pa.my, pb.jLo, pb.jLo + pb.my)) {
          violations.push(
            `${describe(pa)} overlaps ${describe(pb)} on level ${level}`);
        }
      }
    }
  }

  for (const [level, list] of byLevel) {
    const coarser = byLevel.get(level - 1);
    if (coarser === undefined || coarser.length === 0) continue;
    // integer refinement ratio recovered from the stored cell sizes
    const ratio = Math.round(coarser[0].dx / list[0].dx);
    for (const p of list) {
      const ci0 = Math.floor(p.iLo / ratio);
      const ci1 = Math.ceil((p.iLo + p.mx) / ratio);
      const cj0 = Math.floor(p.jLo / ratio);
      const cj1 = Math.ceil((p.jLo + p.my) / ratio);
      let reported = false;
      for (let i = ci0; i < ci1 && !reported; i++) {
        for (let j = cj0; j < cj1 && !reported; j++) {
          const covered = coarser.some((c) =>
            i >= c.iLo && i < c.iLo + c.mx && j >= c.jLo && j < c.jLo + c.my);
          if (!covered) {
            violations.push(`${describe(p)} extends outside the union of `
              + `level ${level - 1} near coarse cell (${i}, ${j})`);
            reported = true;
          }
        }
      }
    }
  }
  return violations;
}
