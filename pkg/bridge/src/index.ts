/**
 * Bindings for the emocal scoring core.
 *
 * Every entry point shells out to the Python package (CLI subcommands or
 * module runners) over its documented JSONL interfaces, so the arithmetic
 * has exactly one implementation. This module only moves bytes: it writes
 * request files, invokes the core, and parses results. Core domain errors
 * surface as {@link CoreError} carrying the core's stable error code.
 */

import { spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join, resolve } from "node:path";
import { fileURLToPath } from "node:url";

export interface TranscriptRecord {
  id?: string;
  task?: string;
  raw: string;
  gold_label?: string | null;
  token_probs?: number[] | null;
  mean_prob?: number | null;
  [key: string]: unknown;
}

export interface RewardBreakdown {
  format: number;
  correct: number;
  conf: number;
  total: number;
  advantage?: number;
}

export interface ScoredRecord extends TranscriptRecord {
  reward: RewardBreakdown;
}

export interface MetricsReport {
  acc: number;
  macro_f1: number;
  ece: number;
  brier: number;
  auc: number | null;
  n: number;
  bin_stats: [number, number, number][];
}

export interface RolloutResponse {
  reward: number;
  p_theta: number[];
  p_old: number[];
  p_ref: number[];
}

export interface RolloutGroup {
  query_id: string;
  responses: RolloutResponse[];
}

export interface GroupObjective {
  query_id: string;
  loss: number;
  advantages: number[];
  mean_ratio: number;
  clip_fraction: number;
  mean_kl: number;
}

export type RewardVariant = "log_likelihood" | "brier";

export interface BridgeOptions {
  /** Python executable used to run the core (default: "python3"). */
  python?: string;
}

export interface ScoreBatchOptions extends BridgeOptions {
  variant?: RewardVariant;
  normalizeAdvantage?: boolean;
}

export interface GrpoOptions extends BridgeOptions {
  clipEps?: number;
  klBeta?: number;
  normalizeAdvantage?: boolean;
}

/** A domain error raised by the core, with its machine-readable code. */
export class CoreError extends Error {
  readonly code: string;

  constructor(code: string, message: string) {
    super(message);
    this.name = "CoreError";
    this.code = code;
  }
}

const REPO_ROOT = resolve(dirname(fileURLToPath(import.meta.url)), "..", "..");

function runPython(moduleArgs: string[], opts: BridgeOptions): string {
  const python = opts.python ?? process.env.EMOCAL_PYTHON ?? "python3";
  const env = {
    ...process.env,
    PYTHONPATH: [join(REPO_ROOT, "src"), process.env.PYTHONPATH ?? ""]
      .filter(Boolean)
      .join(":"),
  };
  const result = spawnSync(python, moduleArgs, { env, encoding: "utf-8", maxBuffer: 1 << 28 });
  if (result.error) {
    throw new CoreError("spawn_failed", `cannot run ${python}: ${result.error.message}`);
  }
  if (result.status === 0) {
    return result.stdout;
  }
  const stderr = (result.stderr ?? "").trim();
  if (result.status === 1) {
    // domain errors arrive as one structured JSON line on stderr
    const line = stderr.split("\n").filter(Boolean).pop() ?? "";
    try {
      const doc = JSON.parse(line) as { error: { code: string; message: string } };
      throw new CoreError(doc.error.code, doc.error.message);
    } catch (err) {
      if (err instanceof CoreError) throw err;
      throw new CoreError("error", stderr || "core exited with status 1");
    }
  }
  throw new CoreError("usage", stderr || `core exited with status ${result.status}`);
}

function runCli(args: string[], opts: BridgeOptions): string {
  return runPython(["-m", "emocal", ...args], opts);
}

function withTempDir<T>(fn: (dir: string) => T): T {
  const dir = mkdtempSync(join(tmpdir(), "emocal-bridge-"));
  try {
    return fn(dir);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}

function writeJsonl(path: string, rows: unknown[]): void {
  writeFileSync(path, rows.map((r) => JSON.stringify(r) + "\n").join(""), "utf-8");
}

function readJsonl<T>(path: string): T[] {
  return readFileSync(path, "utf-8")
    .split("\n")
    .filter((line) => line.trim().length > 0)
    .map((line) => JSON.parse(line) as T);
}

function asRecords(records: TranscriptRecord[] | string, dir: string): string {
  if (typeof records === "string") {
    return records;
  }
  const path = join(dir, "records.jsonl");
  writeJsonl(path, records);
  return path;
}

/**
 * Score a batch of transcript records with the core reward, treating the
 * batch as one rollout group for advantage computation.
 */
export function scoreBatch(
  records: TranscriptRecord[] | string,
  opts: ScoreBatchOptions = {},
): { records: ScoredRecord[]; breakdowns: RewardBreakdown[]; advantages: number[] } {
  if (Array.isArray(records) && records.length === 0) {
    return { records: [], breakdowns: [], advantages: [] };
  }
  return withTempDir((dir) => {
    const input = asRecords(records, dir);
    const output = join(dir, "scored.jsonl");
    runCli(
      [
        "score",
        "-i",
        input,
        "-o",
        output,
        "--variant",
        opts.variant ?? "log_likelihood",
        "--group-advantages",
        opts.normalizeAdvantage ? "normalized" : "plain",
      ],
      opts,
    );
    const scored = readJsonl<ScoredRecord>(output);
    return {
      records: scored,
      breakdowns: scored.map((r) => r.reward),
      advantages: scored.map((r) => r.reward.advantage as number),
    };
  });
}

/** Append core-computed confidence tags to a batch of records. */
export function annotateBatch(
  records: TranscriptRecord[] | string,
  loopPath: string,
  opts: BridgeOptions = {},
): TranscriptRecord[] {
  if (Array.isArray(records) && records.length === 0) {
    return [];
  }
  return withTempDir((dir) => {
    const input = asRecords(records, dir);
    const output = join(dir, "annotated.jsonl");
    runCli(["annotate", "--loop", resolve(loopPath), "-i", input, "-o", output], opts);
    return readJsonl<TranscriptRecord>(output);
  });
}

/**
 * Evaluate a batch of records with the core metrics suite (accuracy,
 * macro-F1, ECE, Brier, AUC) by running the benchmark harness over a
 * single-subtask manifest.
 */
export function metricsBatch(
  records: TranscriptRecord[] | string,
  taxonomyPath: string | null = null,
  opts: BridgeOptions = {},
): MetricsReport {
  return withTempDir((dir) => {
    const input = asRecords(records, dir);
    const manifest = {
      name: "batch",
      subtasks: [
        {
          name: "batch",
          taxonomy: taxonomyPath ? resolve(taxonomyPath) : "",
          loop: "",
          records: input,
        },
      ],
      groups: {},
    };
    const manifestPath = join(dir, "manifest.json");
    writeFileSync(manifestPath, JSON.stringify(manifest), "utf-8");
    const reportPath = join(dir, "report.json");
    runCli(["eval", "--manifest", manifestPath, "-o", reportPath], opts);
    const report = JSON.parse(readFileSync(reportPath, "utf-8")) as {
      subtasks: Record<string, MetricsReport>;
    };
    return report.subtasks["batch"];
  });
}

/** Evaluate the clipped-surrogate objective for rollout groups. */
export function grpoObjective(
  groups: RolloutGroup[] | string,
  opts: GrpoOptions = {},
): GroupObjective[] {
  if (Array.isArray(groups) && groups.length === 0) {
    return [];
  }
  return withTempDir((dir) => {
    let input: string;
    if (typeof groups === "string") {
      input = groups;
    } else {
      input = join(dir, "rollouts.jsonl");
      writeJsonl(input, groups);
    }
    // -c instead of -m keeps runpy from re-importing emocal.grpo as __main__
    const runner = "import sys; from emocal.grpo import main; sys.exit(main(sys.argv[1:]))";
    const args = ["-c", runner, input];
    if (opts.clipEps !== undefined) args.push("--clip-eps", String(opts.clipEps));
    if (opts.klBeta !== undefined) args.push("--kl-beta", String(opts.klBeta));
    if (opts.normalizeAdvantage) args.push("--normalize-adv");
    const stdout = runPython(args, opts);
    return stdout
      .split("\n")
      .filter((line) => line.trim().length > 0)
      .map((line) => JSON.parse(line) as GroupObjective);
  });
}
