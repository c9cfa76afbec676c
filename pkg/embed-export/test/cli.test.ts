/** Exercises the built binary; `npm test` builds before running vitest. */

import { execFileSync } from "node:child_process";
import { existsSync, mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";

import { describe, expect, it } from "vitest";

const CLI = resolve(__dirname, "..", "dist", "cli.js");

function runCli(args: string[]): { code: number; out: string; err: string } {
  try {
    const out = execFileSync("node", [CLI, ...args], { encoding: "utf-8" });
    return { code: 0, out, err: "" };
  } catch (error) {
    const e = error as { status?: number; stdout?: string; stderr?: string };
    return { code: e.status ?? -1, out: e.stdout ?? "", err: e.stderr ?? "" };
  }
}

describe("cli", () => {
  it("exports entities and writes a manifest", () => {
    expect(existsSync(CLI)).toBe(true);
    const dir = mkdtempSync(join(tmpdir(), "embed-export-cli-"));
    const input = join(dir, "in.jsonl");
    writeFileSync(input, JSON.stringify({ qid: "Q1", label: "Thing" }) + "\n");
    const result = runCli(["--entities", input, "--model", "hashed-ngram-32",
                           "--norm", "unit", "--out", join(dir, "o")]);
    expect(result.code).toBe(0);
    const manifest = JSON.parse(
      readFileSync(join(dir, "o", "manifest.json"), "utf-8"));
    expect(manifest.model).toBe("hashed-ngram-32");
    expect(manifest.count).toBe(1);
    expect(Object.keys(manifest.checksums).sort()).toEqual(
      ["embeddings.bin", "entities.jsonl"]);
  });

  it("reruns produce an identical manifest", () => {
    const dir = mkdtempSync(join(tmpdir(), "embed-export-cli-"));
    const input = join(dir, "in.jsonl");
    writeFileSync(input, JSON.stringify({ qid: "Q1", label: "Thing" }) + "\n");
    runCli(["--entities", input, "--out", join(dir, "a")]);
    runCli(["--entities", input, "--out", join(dir, "b")]);
    expect(readFileSync(join(dir, "a", "manifest.json"), "utf-8")).toBe(
      readFileSync(join(dir, "b", "manifest.json"), "utf-8"));
  });

  it("fails with a nonzero exit for an unknown model", () => {
    const dir = mkdtempSync(join(tmpdir(), "embed-export-cli-"));
    const input = join(dir, "in.jsonl");
    writeFileSync(input, JSON.stringify({ qid: "Q1", label: "X" }) + "\n");
    const result = runCli(["--entities", input, "--model", "mbert-base",
                           "--out", join(dir, "o")]);
    expect(result.code).toBe(1);
    expect(result.err).toMatch(/cannot load model/);
  });

  it("requires exactly one input kind", () => {
    expect(runCli([]).code).toBe(1);
    const dir = mkdtempSync(join(tmpdir(), "embed-export-cli-"));
    const input = join(dir, "in.jsonl");
    writeFileSync(input, "");
    expect(runCli(["--entities", input, "--corpus", input]).code).toBe(1);
  });
});
