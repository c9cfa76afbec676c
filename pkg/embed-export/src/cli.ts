#!/usr/bin/env node
/**
 * embed-export --entities PATH | --corpus PATH
 *              [--model ID] [--norm unit|raw] [--out DIR]
 *
 * Produces the binary embedding file (plus, for entities, the enriched
 * JSONL with embedding_id) and a manifest JSON with output checksums.
 */

import { parseArgs } from "node:util";

import { exportEntities, exportMentions } from "./exporter";
import { NormMode } from "./format";

export function main(argv: string[]): number {
  let parsed;
  try {
    parsed = parseArgs({
      args: argv,
      options: {
        entities: { type: "string" },
        corpus: { type: "string" },
        model: { type: "string", default: "hashed-ngram-64" },
        norm: { type: "string", default: "unit" },
        out: { type: "string", default: "export" },
      },
      allowPositionals: false,
    });
  } catch (err) {
    console.error(`usage error: ${(err as Error).message}`);
    return 1;
  }
  const { entities, corpus, model, norm, out } = parsed.values;
  if (!!entities === !!corpus) {
    console.error("exactly one of --entities or --corpus is required");
    return 1;
  }
  if (norm !== "unit" && norm !== "raw") {
    console.error(`--norm must be unit or raw, got ${JSON.stringify(norm)}`);
    return 1;
  }
  try {
    const result = entities
      ? exportEntities(entities, model!, norm as NormMode, out!)
      : exportMentions(corpus!, model!, norm as NormMode, out!);
    console.log(
      `wrote ${result.manifest.count} x ${result.manifest.dimension} ` +
        `(${result.manifest.norm_mode}) -> ${result.files.join(", ")}`,
    );
    return 0;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
