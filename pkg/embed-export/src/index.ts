export { encodeEmbeddings, decodeEmbeddings, normalizeRow, MAGIC,
         HEADER_SIZE } from "./format";
export type { NormMode, DecodedEmbeddings } from "./format";
export { loadEncoder, meanPool } from "./encoder";
export type { Encoder } from "./encoder";
export { extractMentions } from "./corpus";
export type { CorpusMention } from "./corpus";
export { exportEntities, exportMentions } from "./exporter";
export type { ExportManifest, ExportResult } from "./exporter";
