/**
 * Encoder resolution.
 *
 * Two families are supported:
 *   - "hash-<dim>": a self-contained deterministic random-feature sentence
 *     encoder (FNV-1a hashed word/char n-grams scattered onto <dim>
 *     signed coordinates, L2-normalized).  Needs no downloads, so tests
 *     and offline pipelines can exercise the full export path.
 *   - any other name is treated as a pretrained checkpoint and served
 *     through @huggingface/transformers (or the @xenova/transformers
 *     predecessor) if that package is installed; token states are pooled
 *     per the job's pooling mode.
 */

import { PoolingMode, pool } from './pooling.js';

const FNV_OFFSET = 0xcbf29ce484222325n;
const FNV_PRIME = 0x100000001b3n;
const MASK64 = (1n << 64n) - 1n;

export function fnv1a64(data: Uint8Array): bigint {
  let h = FNV_OFFSET;
  for (const byte of data) {
    h = ((h ^ BigInt(byte)) * FNV_PRIME) & MASK64;
  }
  return h;
}

export interface EncodeResult {
  vectors: Float32Array[];
  truncated: number;
}

export interface Encoder {
  readonly name: string;
  readonly dim: number;
  encodeBatch(texts: string[], pooling: PoolingMode): Promise<EncodeResult>;
}

export class HashEncoder implements Encoder {
  readonly name: string;
  readonly dim: number;
  private readonly textEncoder = new TextEncoder();

  constructor(dim: number) {
    if (!Number.isInteger(dim) || dim < 8) {
      throw new Error(`hash encoder dimension must be an integer >= 8, got ${dim}`);
    }
    this.dim = dim;
    this.name = `hash-${dim}`;
  }

  private grams(text: string): string[] {
    const lower = text.toLowerCase();
    const out: string[] = [];
    for (const token of lower.split(/\s+/u).filter(Boolean)) {
      out.push(`w ${token}`);
    }
    const chars = Array.from(lower);
    for (let n = 3; n <= 5; n++) {
      for (let i = 0; i + n <= chars.length; i++) {
        out.push(`c ${chars.slice(i, i + n).join('')}`);
      }
    }
    return out;
  }

  encodeOne(text: string): Float32Array {
    const acc = new Float64Array(this.dim);
    for (const gram of this.grams(text)) {
      const h = fnv1a64(this.textEncoder.encode(gram));
      // four signed coordinates per gram: a sparse random projection
      for (let k = 0; k < 4; k++) {
        const coord = Number((h >> BigInt(16 * k)) & 0xffffn) % this.dim;
        const sign = ((h >> BigInt(60 - k)) & 1n) === 1n ? 1 : -1;
        acc[coord] += sign;
      }
    }
    let normSq = 0;
    for (let i = 0; i < this.dim; i++) normSq += acc[i] * acc[i];
    const out = new Float32Array(this.dim);
    if (normSq > 0) {
      const norm = Math.sqrt(normSq);
      for (let i = 0; i < this.dim; i++) out[i] = acc[i] / norm;
    }
    return out;
  }

  async encodeBatch(texts: string[]): Promise<EncodeResult> {
    return { vectors: texts.map((t) => this.encodeOne(t)), truncated: 0 };
  }
}

class TransformersEncoder implements Encoder {
  readonly name: string;
  readonly dim: number;
  private readonly extractor: any;
  private readonly maxLength: number;

  constructor(name: string, extractor: any, dim: number, maxLength: number) {
    this.name = name;
    this.extractor = extractor;
    this.dim = dim;
    this.maxLength = maxLength;
  }

  async encodeBatch(texts: string[], pooling: PoolingMode): Promise<EncodeResult> {
    const vectors: Float32Array[] = [];
    let truncated = 0;
    for (const text of texts) {
      const ids = await this.extractor.tokenizer(text);
      if (ids.input_ids.size > this.maxLength) truncated += 1;
      const output = await this.extractor(text.length ? text : ' ');
      // output shape [1, tokens, dim]
      const [, tokens, dim] = output.dims;
      const data = output.data as Float32Array;
      const states: number[][] = [];
      for (let t = 0; t < tokens; t++) {
        states.push(Array.from(data.subarray(t * dim, (t + 1) * dim)));
      }
      vectors.push(pool(states, pooling));
    }
    return { vectors, truncated };
  }
}

async function loadTransformers(): Promise<any> {
  for (const pkg of ['@huggingface/transformers', '@xenova/transformers']) {
    try {
      return await import(pkg);
    } catch {
      // try the next package name
    }
  }
  return null;
}

export async function resolveEncoder(model: string): Promise<Encoder> {
  const hashMatch = /^hash-(\d+)$/.exec(model);
  if (hashMatch) {
    return new HashEncoder(Number(hashMatch[1]));
  }
  const transformers = await loadTransformers();
  if (transformers === null) {
    throw new Error(
      `cannot resolve checkpoint ${model}: install @huggingface/transformers ` +
        `(or use a built-in "hash-<dim>" encoder)`,
    );
  }
  const extractor = await transformers.pipeline('feature-extraction', model);
  const dim = extractor.model.config.hidden_size;
  const maxLength =
    extractor.tokenizer.model_max_length ?? extractor.model.config.max_position_embeddings ?? 512;
  return new TransformersEncoder(model, extractor, dim, maxLength);
}
