/**
 * Node bindings for the `latoracle` lattice-oracle CLI.
 *
 * A handle owns one loaded lattice file plus the linear-cost weights
 * (p, r); every query shells out to the core binary so each number in
 * a record comes from the same code path as the command line. The
 * bindings compute nothing themselves: they slice lattice lines, move
 * tokens and parse TSV.
 *
 * The core binary is looked up as `latoracle` on PATH; set
 * LATORACLE_BIN to point somewhere else.
 */

import { execFile } from "node:child_process";
import { promisify } from "node:util";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

const run = promisify(execFile);

/** Must match the core package version (`latoracle --version`). */
export const VERSION = "0.1.0";

const HEADER =
  "matched_prefix\tcontinuation\tlinear_cost\texact_bleu\treward_to_go";

export interface OracleRecord {
  matchedPrefix: string[];
  continuation: string[];
  linearCost: number;
  exactBleu: number;
  rewardToGo: number;
  /** The record line exactly as the core printed it (no newline). */
  tsv: string;
}

function bin(): string {
  return process.env.LATORACLE_BIN ?? "latoracle";
}

async function exec(args: string[]): Promise<string> {
  try {
    const { stdout } = await run(bin(), args, { maxBuffer: 1 << 24 });
    return stdout;
  } catch (err) {
    const e = err as NodeJS.ErrnoException & { stderr?: string };
    if (e.code === "ENOENT") {
      throw new Error(`${bin()} not found on PATH (set LATORACLE_BIN)`);
    }
    const detail = (e.stderr ?? e.message).trim();
    throw new Error(detail.replace(/^latoracle: error: /, ""));
  }
}

/** Version reported by the core binary, e.g. "0.1.0". */
export async function coreVersion(): Promise<string> {
  const out = await exec(["--version"]);
  const ver = out.trim().split(" ").pop();
  if (!ver) throw new Error(`unexpected version output: ${JSON.stringify(out)}`);
  return ver;
}

function checkTokens(what: string, tokens: string[]): void {
  for (const t of tokens) {
    if (typeof t !== "string" || t.length === 0 || /\s/.test(t)) {
      throw new Error(
        `${what} token ${JSON.stringify(t)} is empty or contains whitespace`,
      );
    }
  }
}

function parseRecord(stdout: string): OracleRecord {
  const lines = stdout.split("\n");
  if (lines[0] !== HEADER || !lines[1]) {
    throw new Error(`unexpected core output: ${JSON.stringify(stdout.slice(0, 200))}`);
  }
  const tsv = lines[1];
  const fields = tsv.split("\t");
  if (fields.length !== 5) {
    throw new Error(`unexpected record: ${JSON.stringify(tsv)}`);
  }
  const toks = (s: string) => (s === "" ? [] : s.split(" "));
  return {
    matchedPrefix: toks(fields[0]),
    continuation: toks(fields[1]),
    linearCost: Number(fields[2]),
    exactBleu: Number(fields[3]),
    rewardToGo: Number(fields[4]),
    tsv,
  };
}

/**
 * One loaded lattice file. Example ids are 0..size-1 in file order
 * (blank lines skipped, matching the core). Immutable after load;
 * queries are independent, so a handle may be shared across
 * concurrent callers.
 */
export class OracleHandle {
  readonly path: string;
  readonly p: number;
  readonly r: number;
  readonly size: number;
  private readonly lines: string[];
  private readonly ext: string;
  private closed = false;

  /** @internal use {@link load} */
  constructor(latticePath: string, p: number, r: number, lines: string[]) {
    this.path = latticePath;
    this.p = p;
    this.r = r;
    this.lines = lines;
    this.size = lines.length;
    // the core picks PLF vs JSON by extension; per-query temp files
    // must keep it
    this.ext = /\.(json|jsonl)$/.exec(latticePath)?.[0] ?? ".plf";
  }

  /**
   * Force `prefix` through lattice `exampleId` and continue toward
   * `reference`. The record is exactly what the CLI `continue`
   * subcommand prints for the same lattice, reference and prefix.
   */
  async continueFromPrefix(
    exampleId: number,
    prefix: string[],
    reference: string[],
  ): Promise<OracleRecord> {
    if (this.closed) throw new Error("handle is closed");
    if (!Number.isInteger(exampleId) || exampleId < 0 || exampleId >= this.size) {
      throw new RangeError(
        `unknown example id ${exampleId} (handle holds ${this.size} lattices)`,
      );
    }
    if (reference.length === 0) throw new Error("reference must not be empty");
    checkTokens("reference", reference);
    checkTokens("prefix", prefix);
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), "latoracle-"));
    try {
      const lat = path.join(dir, `lattice${this.ext}`);
      const refs = path.join(dir, "refs.txt");
      const pfx = path.join(dir, "prefixes.txt");
      fs.writeFileSync(lat, this.lines[exampleId] + "\n");
      fs.writeFileSync(refs, reference.join(" ") + "\n");
      fs.writeFileSync(pfx, prefix.join(" ") + "\n");
      const stdout = await exec([
        "continue",
        "--lattices", lat,
        "--refs", refs,
        "--prefixes", pfx,
        "--p", String(this.p),
        "--r", String(this.r),
        "--jobs", "1",
      ]);
      return parseRecord(stdout);
    } finally {
      fs.rmSync(dir, { recursive: true, force: true });
    }
  }

  /** Release the handle; further queries throw. Idempotent. */
  close(): void {
    this.closed = true;
  }
}

/**
 * Load a lattice file (PLF, or JSON/JSONL by extension) and fix the
 * linear-cost weights. Parsing is delegated to the core, so malformed
 * input fails here with the core's message, including the offending
 * line number.
 */
export async function load(
  latticePath: string,
  p = 0.25,
  r = 0.5,
): Promise<OracleHandle> {
  // same bounds the core enforces; checking here makes a bad handle
  // impossible instead of failing on the first query
  if (!(p > 0 && p < 1)) throw new Error(`p must be in (0, 1), got ${p}`);
  if (!(r > 0 && r < 1)) throw new Error(`r must be in (0, 1), got ${r}`);
  let text: string;
  try {
    text = fs.readFileSync(latticePath, "utf-8");
  } catch (err) {
    throw new Error(`cannot read lattice file: ${(err as Error).message}`);
  }
  const lines = text.split("\n").filter((l) => l.trim() !== "");
  if (lines.length === 0) throw new Error(`${latticePath}: no lattices found`);
  await exec(["decode", "--lattices", latticePath, "--parse-only"]);
  return new OracleHandle(latticePath, p, r, lines);
}
