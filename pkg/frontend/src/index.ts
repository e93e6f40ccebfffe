/**
 * Scripting binding for the mwpmdec decoder core.
 *
 * The binding talks to the core exclusively through its command-line
 * interface and documented JSON file formats, so results are numerically
 * identical to direct CLI runs.  All weights and indices stay integers end
 * to end; no value crosses the boundary through floating point.
 *
 * A handle wraps one generated decoding graph on disk.  Handles are cheap to
 * keep around and independent of each other; a single handle must not be
 * used from two threads at once.
 */

import { execFileSync, spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

export interface CodeParams {
  /** odd code distance >= 3 */
  d: number;
  /** noisy measurement rounds N >= 0 */
  rounds: number;
  /** uniform physical error probability in (0, 0.5] */
  p: number;
  /** even integer scale for log-likelihood weights (default 1000) */
  weightResolution?: number;
}

export interface DecodeOutput {
  /** matched defect pairs [u, v, weight] */
  pairs: [number, number, number][];
  /** defects matched to the boundary [defect, virtualVertex, weight] */
  boundary: [number, number, number][];
  /** decoding-graph edge ids whose flips reproduce the syndrome */
  correction: number[];
  /** total matching weight (integer) */
  weight: number;
}

export interface BindingHandle {
  readonly dir: string;
  readonly graphPath: string;
  closed: boolean;
}

export interface BindingOptions {
  /** python executable that has the core installed (default: python3) */
  python?: string;
}

const CLI_MODULE = "mwpmdec.cli";

function pythonExe(options?: BindingOptions): string {
  return options?.python ?? process.env.MWPMDEC_PYTHON ?? "python3";
}

function runCli(options: BindingOptions | undefined, args: string[]): string {
  try {
    return execFileSync(pythonExe(options), ["-m", CLI_MODULE, ...args], {
      encoding: "utf8",
    });
  } catch (err: unknown) {
    const e = err as { status?: number; stderr?: string; message?: string };
    const diagnostic = (e.stderr ?? "").trim() || e.message || "decoder invocation failed";
    throw new Error(diagnostic);
  }
}

function requireOpen(handle: BindingHandle): void {
  if (handle.closed) {
    throw new Error("binding handle is closed");
  }
}

function checkDefects(defects: number[]): void {
  for (const v of defects) {
    if (!Number.isInteger(v) || v < 0) {
      throw new Error(`defect list must contain non-negative integers, got ${v}`);
    }
  }
}

/**
 * Build a rotated-surface-code decoding graph and return a handle to it.
 * Throws with the core's diagnostic when the code parameters are invalid.
 */
export function build(params: CodeParams, options?: BindingOptions): BindingHandle {
  const dir = mkdtempSync(join(tmpdir(), "mwpmdec-"));
  const resolution = params.weightResolution ?? 1000;
  const code = `${params.d},${params.rounds},${params.p},${resolution}`;
  try {
    runCli(options, ["generate", "--code", code, "--seed", "0", "--shots", "0", "--out", dir]);
  } catch (err) {
    rmSync(dir, { recursive: true, force: true });
    throw err;
  }
  return { dir, graphPath: join(dir, "graph.json"), closed: false };
}

function writeSyndromes(handle: BindingHandle, defects: number[]): string {
  const path = join(handle.dir, "query.json");
  writeFileSync(path, JSON.stringify({ syndromes: [[...defects].sort((a, b) => a - b)] }));
  return path;
}

/**
 * Decode one defect set.  Exact pass-through to the core's solve; the result
 * is numerically identical to `mwpmdec decode` on the same inputs.
 */
export function decode(
  handle: BindingHandle,
  defects: number[],
  options?: BindingOptions,
): DecodeOutput {
  requireOpen(handle);
  checkDefects(defects);
  const syndromes = writeSyndromes(handle, defects);
  const out = join(handle.dir, "result.json");
  runCli(options, [
    "decode",
    "--graph", handle.graphPath,
    "--syndromes", syndromes,
    "--decoder", "parity",
    "--out", out,
  ]);
  const payload = JSON.parse(readFileSync(out, "utf8")) as {
    results: {
      pairs: [number, number, number][];
      boundary: [number, number, number][];
      correction: number[];
      primal_weight: number;
    }[];
  };
  const result = payload.results[0];
  return {
    pairs: result.pairs,
    boundary: result.boundary,
    correction: result.correction,
    weight: result.primal_weight,
  };
}

/**
 * Decode one defect set and compare against the exact reference matcher.
 * True when the matching weight is provably optimal and the correction
 * reproduces the syndrome.
 */
export function verify(
  handle: BindingHandle,
  defects: number[],
  options?: BindingOptions,
): boolean {
  requireOpen(handle);
  checkDefects(defects);
  const syndromes = writeSyndromes(handle, defects);
  const proc = spawnSync(
    pythonExe(options),
    ["-m", CLI_MODULE, "verify",
     "--graph", handle.graphPath,
     "--syndromes", syndromes,
     "--decoder", "parity"],
    { encoding: "utf8" },
  );
  if (proc.status === 0) {
    return true;
  }
  if (proc.status === 1) {
    return false;
  }
  throw new Error((proc.stderr ?? "").trim() || `verify failed with status ${proc.status}`);
}

/** Release the handle's on-disk state.  Closing twice is a no-op. */
export function close(handle: BindingHandle): void {
  if (handle.closed) {
    return;
  }
  rmSync(handle.dir, { recursive: true, force: true });
  handle.closed = true;
}
