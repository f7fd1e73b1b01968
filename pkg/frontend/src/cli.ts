/** Shared command-line plumbing for the figure scripts.
 *
 * Every script takes positional input files plus `--out PATH` and writes a
 * single image chosen by the output extension.  Exit codes follow the
 * simulator's convention: 0 success, 1 runtime failure (unreadable or
 * malformed input), 2 usage error.  Nothing is ever written to the input
 * files, and on failure no partial image is left behind: the document is
 * rendered fully in memory before the output file is created.
 */

import { readFileSync, writeFileSync } from "node:fs";

export class UsageError extends Error {}

export interface ParsedArgs {
  files: string[];
  out: string;
  labels: string[] | null;
}

export function parseArgs(argv: string[], usage: string): ParsedArgs {
  const files: string[] = [];
  let out: string | null = null;
  let labels: string[] | null = null;
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg === "--out") {
      out = argv[++i];
      if (out === undefined) throw new UsageError("--out needs a path");
    } else if (arg === "--labels") {
      const raw = argv[++i];
      if (raw === undefined) {
        throw new UsageError("--labels needs a comma-separated list");
      }
      labels = raw.split(",").map((s) => s.trim());
    } else if (arg === "-h" || arg === "--help") {
      throw new UsageError(usage);
    } else if (arg.startsWith("-")) {
      throw new UsageError(`unknown option '${arg}'\n${usage}`);
    } else {
      files.push(arg);
    }
  }
  if (files.length === 0) throw new UsageError(`no input files\n${usage}`);
  if (out === null) throw new UsageError(`missing --out PATH\n${usage}`);
  if (!out.endsWith(".svg")) {
    throw new UsageError(
      `output '${out}' must end in .svg (the only format this build emits)`);
  }
  return { files, out, labels };
}

export function readInput(path: string): string {
  try {
    return readFileSync(path, "utf-8");
  } catch (err) {
    throw new Error(`cannot read ${path}: ${(err as Error).message}`);
  }
}

/** Run a renderer with the standard exit-code and error reporting rules. */
export function runMain(
  usage: string,
  render: (args: ParsedArgs, warn: (message: string) => void) => string,
): void {
  let args: ParsedArgs;
  try {
    args = parseArgs(process.argv.slice(2), usage);
  } catch (err) {
    process.stderr.write(`${(err as Error).message}\n`);
    process.exitCode = 2;
    return;
  }
  try {
    const svg = render(args, (m) => process.stderr.write(`warning: ${m}\n`));
    writeFileSync(args.out, svg, "utf-8");
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n`);
    process.exitCode = 1;
  }
}

/** Default labels fall back to the file names when --labels is absent. */
export function labelsFor(args: ParsedArgs): string[] {
  if (args.labels === null) return args.files;
  if (args.labels.length !== args.files.length) {
    throw new UsageError(`--labels gives ${args.labels.length} names for `
      + `${args.files.length} files`);
  }
  return args.labels;
}
