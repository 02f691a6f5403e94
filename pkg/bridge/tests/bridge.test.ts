import { readFileSync } from "node:fs";
import { dirname, join, resolve } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import {
  CoreError,
  annotateBatch,
  grpoObjective,
  metricsBatch,
  scoreBatch,
  type TranscriptRecord,
} from "../src/index.js";

const REPO = resolve(dirname(fileURLToPath(import.meta.url)), "..", "..");
const CORPUS = join(REPO, "tests", "fixtures", "corpus");
const GOLDEN = join(REPO, "tests", "fixtures", "golden");

function readJsonl(path: string): TranscriptRecord[] {
  return readFileSync(path, "utf-8")
    .split("\n")
    .filter((line) => line.trim().length > 0)
    .map((line) => JSON.parse(line) as TranscriptRecord);
}

function wellFormedRaw(answer: string, confidence?: string): string {
  const body = [
    "<think>",
    "<element>a lantern on a pier</element>",
    "<human>nobody in frame</human>",
    "<context>calm water at dusk</context>",
    "<interaction>the light reflects on the ripples</interaction>",
    "<analysis>quiet and serene</analysis>",
    "</think>",
    `<answer>${answer}</answer>`,
  ].join("\n");
  return confidence === undefined ? body : body + `\n<confidence>${confidence}</confidence>`;
}

describe("scoreBatch", () => {
  it("matches the CLI's reward breakdowns on the golden fixtures bit for bit", () => {
    const annotated = readJsonl(join(GOLDEN, "records_ver.annotated.jsonl"));
    const golden = readJsonl(join(GOLDEN, "records_ver.scored.jsonl"));
    const result = scoreBatch(annotated);
    expect(result.records.length).toBe(golden.length);
    for (let i = 0; i < golden.length; i++) {
      const got = result.breakdowns[i];
      const want = (golden[i] as { reward: Record<string, number> }).reward;
      expect(Object.is(got.format, want.format)).toBe(true);
      expect(Object.is(got.correct, want.correct)).toBe(true);
      expect(Object.is(got.conf, want.conf)).toBe(true);
      expect(Object.is(got.total, want.total)).toBe(true);
    }
  });

  it("returns group advantages that recenter the totals", () => {
    const annotated = readJsonl(join(GOLDEN, "records_vsa.annotated.jsonl"));
    const result = scoreBatch(annotated);
    const totals = result.breakdowns.map((b) => b.total);
    const mean = totals.reduce((a, b) => a + b, 0) / totals.length;
    const sum = result.advantages.reduce((a, b) => a + b, 0);
    expect(Math.abs(sum)).toBeLessThan(1e-9);
    expect(result.advantages[0]).toBeCloseTo(totals[0] - mean, 12);
  });

  it("supports the brier variant", () => {
    const records = [
      { id: "x1", raw: wellFormedRaw("joy", "0.70"), gold_label: "joy" },
    ];
    const wrong = [
      { id: "x2", raw: wellFormedRaw("joy", "0.70"), gold_label: "fear" },
    ];
    const result = scoreBatch([...records, ...wrong], { variant: "brier" });
    expect(result.breakdowns[0].conf).toBe(-((1.0 - 0.7) ** 2));
    expect(result.breakdowns[1].correct).toBe(0);
  });

  it("returns an empty result for an empty batch", () => {
    const result = scoreBatch([]);
    expect(result.records).toEqual([]);
    expect(result.breakdowns).toEqual([]);
    expect(result.advantages).toEqual([]);
  });

  it("surfaces the core's missing_gold error code", () => {
    const records = [{ id: "x", raw: wellFormedRaw("joy", "0.50"), gold_label: null }];
    expect(() => scoreBatch(records)).toThrowError(CoreError);
    try {
      scoreBatch(records);
      expect.unreachable();
    } catch (err) {
      expect((err as CoreError).code).toBe("missing_gold");
    }
  });
});

describe("annotateBatch", () => {
  it("reproduces the golden annotations", () => {
    const inputs = readJsonl(join(CORPUS, "records_ver.jsonl"));
    const golden = readJsonl(join(GOLDEN, "records_ver.annotated.jsonl"));
    const result = annotateBatch(inputs, join(GOLDEN, "loop_ver.json"));
    expect(result).toEqual(golden);
  });

  it("rejects records that already carry a confidence tag", () => {
    const annotated = readJsonl(join(GOLDEN, "records_ver.annotated.jsonl"));
    try {
      annotateBatch(annotated, join(GOLDEN, "loop_ver.json"));
      expect.unreachable();
    } catch (err) {
      expect((err as CoreError).code).toBe("already_annotated");
    }
  });
});

describe("metricsBatch", () => {
  it("matches the core eval report on the golden subtask", () => {
    const scored = readJsonl(join(GOLDEN, "records_ver.scored.jsonl"));
    const report = metricsBatch(scored, join(CORPUS, "mikels8.json"));
    const golden = JSON.parse(readFileSync(join(GOLDEN, "report.json"), "utf-8")) as {
      subtasks: Record<string, unknown>;
    };
    expect(report).toEqual(golden.subtasks["toy-ver"]);
  });

  it("scores an all-correct toy batch at accuracy 1.0", () => {
    const records = [
      { id: "a", raw: wellFormedRaw("joy", "0.90"), gold_label: "joy" },
      { id: "b", raw: wellFormedRaw("fear", "0.40"), gold_label: "fear" },
    ];
    const report = metricsBatch(records);
    expect(report.acc).toBe(1.0);
    expect(report.n).toBe(2);
    // one-class confidence data: AUC is undefined
    expect(report.auc).toBeNull();
  });
});

describe("grpoObjective", () => {
  it("evaluates the clipped-surrogate worked example", () => {
    const groups = [
      {
        query_id: "q",
        responses: [
          { reward: 1.0, p_theta: [1.0], p_old: [0.5], p_ref: [1.0] },
          { reward: 0.0, p_theta: [0.5], p_old: [0.5], p_ref: [0.5] },
        ],
      },
    ];
    const results = grpoObjective(groups, { klBeta: 0 });
    expect(results.length).toBe(1);
    expect(results[0].loss).toBeCloseTo(-0.05, 12);
    expect(results[0].advantages).toEqual([0.5, -0.5]);
    expect(results[0].clip_fraction).toBe(0.5);
  });

  it("propagates core validation errors", () => {
    const groups = [
      {
        query_id: "q",
        responses: [{ reward: 1.0, p_theta: [0.5], p_old: [0.5], p_ref: [0.5] }],
      },
    ];
    try {
      grpoObjective(groups);
      expect.unreachable();
    } catch (err) {
      expect((err as CoreError).code).toBe("grpo");
    }
  });

  it("returns an empty list for no groups", () => {
    expect(grpoObjective([])).toEqual([]);
  });
});
