export { encodeEmbeddings, decodeEmbeddings, MAGIC, FORMAT_VERSION } from './format.js';
export type { EmbeddingRecord } from './format.js';
export { readExamples } from './examples.js';
export type { PreparedExample } from './examples.js';
export { pool } from './pooling.js';
export type { PoolingMode } from './pooling.js';
export { resolveEncoder, HashEncoder, fnv1a64 } from './encoder.js';
export type { Encoder, EncodeResult } from './encoder.js';
export { runExport } from './export.js';
export type { ExportJob, ExportReport } from './export.js';
