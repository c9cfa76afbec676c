/**
 * Binary embedding container shared with the linking toolkit.
 *
 * Layout (little-endian):
 *   0..7   : magic "HELIXEMB"
 *   8..11  : uint32 vector count
 *   12..15 : uint32 dimension
 *   16     : uint8 norm mode (0 = raw, 1 = unit)
 *   17..   : count x dimension float32 values in row order
 */

export const MAGIC = "HELIXEMB";
export const HEADER_SIZE = 17;

export type NormMode = "raw" | "unit";

const NORM_CODES: Record<NormMode, number> = { raw: 0, unit: 1 };

export function normalizeRow(row: Float64Array): Float64Array {
  let sq = 0;
  for (const v of row) sq += v * v;
  const norm = Math.sqrt(sq);
  const out = new Float64Array(row.length);
  if (norm === 0) {
    // deterministic fallback: a zero vector cannot be unit-normalized
    out[0] = 1;
    return out;
  }
  for (let i = 0; i < row.length; i++) out[i] = row[i] / norm;
  return out;
}

export function encodeEmbeddings(
  rows: Float64Array[],
  dimension: number,
  normMode: NormMode,
): Buffer {
  for (const row of rows) {
    if (row.length !== dimension) {
      throw new Error(
        `row length ${row.length} does not match dimension ${dimension}`,
      );
    }
  }
  const buffer = Buffer.alloc(HEADER_SIZE + rows.length * dimension * 4);
  buffer.write(MAGIC, 0, "ascii");
  buffer.writeUInt32LE(rows.length, 8);
  buffer.writeUInt32LE(dimension, 12);
  buffer.writeUInt8(NORM_CODES[normMode], 16);
  let offset = HEADER_SIZE;
  for (const source of rows) {
    const row = normMode === "unit" ? normalizeRow(source) : source;
    for (let i = 0; i < dimension; i++) {
      buffer.writeFloatLE(Math.fround(row[i]), offset);
      offset += 4;
    }
  }
  return buffer;
}

export interface DecodedEmbeddings {
  count: number;
  dimension: number;
  normMode: NormMode;
  rows: Float32Array[];
}

/** Reader counterpart used by the tests to check byte-exact compatibility. */
export function decodeEmbeddings(buffer: Buffer): DecodedEmbeddings {
  if (buffer.length < HEADER_SIZE) {
    throw new Error("truncated embeddings header");
  }
  const magic = buffer.toString("ascii", 0, 8);
  if (magic !== MAGIC) {
    throw new Error(`bad magic ${JSON.stringify(magic)}`);
  }
  const count = buffer.readUInt32LE(8);
  const dimension = buffer.readUInt32LE(12);
  const code = buffer.readUInt8(16);
  const normMode = (Object.keys(NORM_CODES) as NormMode[]).find(
    (k) => NORM_CODES[k] === code,
  );
  if (!normMode) throw new Error(`unknown norm mode byte ${code}`);
  if (buffer.length !== HEADER_SIZE + count * dimension * 4) {
    throw new Error(
      `payload is ${buffer.length - HEADER_SIZE} bytes, header promises ` +
        `${count}x${dimension} float32`,
    );
  }
  const rows: Float32Array[] = [];
  let offset = HEADER_SIZE;
  for (let r = 0; r < count; r++) {
    const row = new Float32Array(dimension);
    for (let i = 0; i < dimension; i++) {
      row[i] = buffer.readFloatLE(offset);
      offset += 4;
    }
    rows.push(row);
  }
  return { count, dimension, normMode, rows };
}
