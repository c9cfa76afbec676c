/**
 * Export operations: read entities JSONL or a corpus file, encode, and write
 * the binary embedding container plus a manifest with output checksums.
 */

import { createHash } from "node:crypto";
import { readFileSync, writeFileSync, mkdirSync } from "node:fs";
import { join, basename } from "node:path";

import { Encoder, loadEncoder, meanPool } from "./encoder";
import { NormMode, encodeEmbeddings } from "./format";
import { extractMentions } from "./corpus";

export interface ExportManifest {
  model: string;
  dimension: number;
  norm_mode: NormMode;
  count: number;
  checksums: Record<string, string>;
  text_fields?: string[];
  ids?: string[];
}

export interface ExportResult {
  manifest: ExportManifest;
  files: string[];
}

function sha256(data: Buffer | string): string {
  return createHash("sha256").update(data).digest("hex");
}

interface EntityRow {
  qid?: string;
  label?: string;
  description?: string;
  [key: string]: unknown;
}

function readJsonl(path: string): EntityRow[] {
  const rows: EntityRow[] = [];
  const text = readFileSync(path, "utf-8");
  const lines = text.split(/\r?\n/);
  for (let i = 0; i < lines.length; i++) {
    if (lines[i].trim() === "") continue;
    try {
      rows.push(JSON.parse(lines[i]));
    } catch (err) {
      throw new Error(`${basename(path)} line ${i + 1}: invalid JSON`);
    }
  }
  return rows;
}

/** Text embedded per entity: label plus description when present. */
function entityText(row: EntityRow): string {
  const parts = [row.label ?? ""];
  if (row.description) parts.push(String(row.description));
  return parts.join(" ").trim();
}

export function exportEntities(
  entitiesPath: string,
  modelId: string,
  normMode: NormMode,
  outDir: string,
): ExportResult {
  const encoder: Encoder = loadEncoder(modelId);
  const rows = readJsonl(entitiesPath);
  mkdirSync(outDir, { recursive: true });

  const vectors = rows.map((row) => encoder.encodeText(entityText(row)));
  const binary = encodeEmbeddings(vectors, encoder.dimension, normMode);
  const embeddingsPath = join(outDir, "embeddings.bin");
  writeFileSync(embeddingsPath, binary);

  // enriched JSONL: embedding_id points at the row written for the entity,
  // preserving the input order
  const enriched = rows
    .map((row, i) => JSON.stringify({ ...row, embedding_id: i }))
    .join("\n");
  const entitiesOutPath = join(outDir, "entities.jsonl");
  const entitiesBody = enriched.length ? enriched + "\n" : "";
  writeFileSync(entitiesOutPath, entitiesBody);

  const manifest: ExportManifest = {
    model: modelId,
    dimension: encoder.dimension,
    norm_mode: normMode,
    count: rows.length,
    checksums: {
      "embeddings.bin": sha256(binary),
      "entities.jsonl": sha256(entitiesBody),
    },
    text_fields: ["label", "description"],
  };
  const manifestPath = join(outDir, "manifest.json");
  writeFileSync(manifestPath, JSON.stringify(manifest, null, 2) + "\n");
  return { manifest, files: [embeddingsPath, entitiesOutPath, manifestPath] };
}

export function exportMentions(
  corpusPath: string,
  modelId: string,
  normMode: NormMode,
  outDir: string,
): ExportResult {
  const encoder: Encoder = loadEncoder(modelId);
  const mentions = extractMentions(readFileSync(corpusPath, "utf-8"));
  mkdirSync(outDir, { recursive: true });

  // mention vector = mean of its tokens' vectors
  const vectors = mentions.map((m) =>
    meanPool(
      m.tokens.map((t) => encoder.encodeToken(t)),
      encoder.dimension,
    ),
  );
  const binary = encodeEmbeddings(vectors, encoder.dimension, normMode);
  const mentionsPath = join(outDir, "mentions.bin");
  writeFileSync(mentionsPath, binary);

  const manifest: ExportManifest = {
    model: modelId,
    dimension: encoder.dimension,
    norm_mode: normMode,
    count: mentions.length,
    checksums: { "mentions.bin": sha256(binary) },
    ids: mentions.map((m) => m.mentionId),
  };
  const manifestPath = join(outDir, "manifest.json");
  writeFileSync(manifestPath, JSON.stringify(manifest, null, 2) + "\n");
  return { manifest, files: [mentionsPath, manifestPath] };
}
