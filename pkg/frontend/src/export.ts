/** Export job: prepared examples -> frozen embeddings in RPEMB1. */

import { writeFileSync } from 'node:fs';

import { resolveEncoder } from './encoder.js';
import { readExamples } from './examples.js';
import { EmbeddingRecord, encodeEmbeddings } from './format.js';
import { PoolingMode } from './pooling.js';

export interface ExportJob {
  model: string;
  pooling: PoolingMode;
  input: string;
  output: string;
  batchSize: number;
}

export interface ExportReport {
  model: string;
  pooling: PoolingMode;
  count: number;
  dim: number;
  truncated: number;
  output: string;
}

export async function runExport(job: ExportJob): Promise<ExportReport> {
  if (job.batchSize < 1) throw new Error('batch size must be >= 1');
  const examples = readExamples(job.input);
  if (examples.length === 0) {
    throw new Error(`no examples in ${job.input}`);
  }
  const encoder = await resolveEncoder(job.model);

  const records: EmbeddingRecord[] = [];
  let truncated = 0;
  for (let start = 0; start < examples.length; start += job.batchSize) {
    const batch = examples.slice(start, start + job.batchSize);
    const result = await encoder.encodeBatch(
      batch.map((ex) => ex.text),
      job.pooling,
    );
    truncated += result.truncated;
    batch.forEach((ex, i) => records.push({ id: ex.example_id, vector: result.vectors[i] }));
  }

  writeFileSync(job.output, encodeEmbeddings(encoder.dim, records));
  return {
    model: encoder.name,
    pooling: job.pooling,
    count: records.length,
    dim: encoder.dim,
    truncated,
    output: job.output,
  };
}
