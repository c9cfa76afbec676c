/**
 * Text encoders behind a model-id interface.
 *
 * The built-in family `hashed-ngram-<dim>` is a deterministic featurizer
 * (signed hashing of character trigrams and whole tokens) that needs no
 * model weights, so exports are reproducible offline. Transformer backends
 * can be added under new model ids; the consumer only sees the id recorded
 * in the manifest.
 */

export interface Encoder {
  readonly modelId: string;
  readonly dimension: number;
  /** Vector for a single token. */
  encodeToken(token: string): Float64Array;
  /** Vector for free text: mean over its whitespace tokens. */
  encodeText(text: string): Float64Array;
}

/** FNV-1a, 32-bit. */
function fnv1a(text: string): number {
  let hash = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    hash ^= text.charCodeAt(i);
    hash = Math.imul(hash, 0x01000193) >>> 0;
  }
  return hash >>> 0;
}

class HashedNgramEncoder implements Encoder {
  constructor(
    readonly modelId: string,
    readonly dimension: number,
  ) {}

  encodeToken(token: string): Float64Array {
    const v = new Float64Array(this.dimension);
    const t = token.toLowerCase();
    const padded = `^${t}$`;
    const features: string[] = [t];
    for (let i = 0; i + 3 <= padded.length; i++) {
      features.push(padded.slice(i, i + 3));
    }
    for (const feature of features) {
      const h = fnv1a(feature);
      const bucket = h % this.dimension;
      const sign = (h >>> 16) & 1 ? 1 : -1;
      v[bucket] += sign;
    }
    return v;
  }

  encodeText(text: string): Float64Array {
    const tokens = text.split(/\s+/).filter((t) => t.length > 0);
    const v = new Float64Array(this.dimension);
    if (tokens.length === 0) return v;
    for (const token of tokens) {
      const tv = this.encodeToken(token);
      for (let i = 0; i < this.dimension; i++) v[i] += tv[i];
    }
    for (let i = 0; i < this.dimension; i++) v[i] /= tokens.length;
    return v;
  }
}

const HASHED_PATTERN = /^hashed-ngram-(\d+)$/;

export function loadEncoder(modelId: string): Encoder {
  const match = HASHED_PATTERN.exec(modelId);
  if (match) {
    const dimension = Number(match[1]);
    if (dimension < 1 || dimension > 65536) {
      throw new Error(`model ${modelId}: unsupported dimension ${dimension}`);
    }
    return new HashedNgramEncoder(modelId, dimension);
  }
  throw new Error(
    `cannot load model ${JSON.stringify(modelId)}: no such backend ` +
      `(built-in: hashed-ngram-<dim>)`,
  );
}

/** Mean of per-token vectors, matching the toolkit's mention pooling. */
export function meanPool(vectors: Float64Array[], dimension: number): Float64Array {
  const out = new Float64Array(dimension);
  if (vectors.length === 0) return out;
  for (const v of vectors) {
    for (let i = 0; i < dimension; i++) out[i] += v[i];
  }
  for (let i = 0; i < dimension; i++) out[i] /= vectors.length;
  return out;
}
