import { mkdtempSync, readFileSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

import { describe, expect, it } from 'vitest';

import { decodeEmbeddings } from '../src/format.js';
import { runExport } from '../src/export.js';

function preparedFile(dir: string, texts: Record<string, string>): string {
  const lines = Object.entries(texts).map(([id, text]) =>
    JSON.stringify({
      example_id: id,
      dataset_id: 'syn',
      recipient_id: `r_${id}`,
      label: 'F',
      text,
    }),
  );
  const path = join(dir, 'prepared.jsonl');
  writeFileSync(path, lines.join('\n') + '\n');
  return path;
}

describe('runExport', () => {
  it('writes one embedding per example with matching count and dim', async () => {
    const dir = mkdtempSync(join(tmpdir(), 'embexp-'));
    const input = preparedFile(dir, {
      e1: 'first little sentence',
      e2: 'second one with glimmerquartz inside',
      e3: '',
    });
    const out = join(dir, 'out.rpemb');
    const report = await runExport({
      model: 'hash-64',
      pooling: 'mean',
      input,
      output: out,
      batchSize: 2,
    });
    expect(report.count).toBe(3);
    expect(report.dim).toBe(64);
    expect(report.truncated).toBe(0);

    const decoded = decodeEmbeddings(readFileSync(out));
    expect(decoded.dim).toBe(64);
    expect(decoded.records.map((r) => r.id)).toEqual(['e1', 'e2', 'e3']);
    // empty text embeds to the zero vector rather than failing
    expect(Array.from(decoded.records[2].vector)).toEqual(new Array(64).fill(0));
  });

  it('same job twice produces byte-identical payloads', async () => {
    const dir = mkdtempSync(join(tmpdir(), 'embexp-'));
    const input = preparedFile(dir, { a: 'alpha beta', b: 'gamma delta' });
    const out1 = join(dir, 'one.rpemb');
    const out2 = join(dir, 'two.rpemb');
    await runExport({ model: 'hash-32', pooling: 'mean', input, output: out1, batchSize: 32 });
    await runExport({ model: 'hash-32', pooling: 'mean', input, output: out2, batchSize: 32 });
    expect(readFileSync(out1).equals(readFileSync(out2))).toBe(true);
  });

  it('rejects empty inputs', async () => {
    const dir = mkdtempSync(join(tmpdir(), 'embexp-'));
    const input = join(dir, 'empty.jsonl');
    writeFileSync(input, '');
    await expect(
      runExport({
        model: 'hash-32',
        pooling: 'mean',
        input,
        output: join(dir, 'x.rpemb'),
        batchSize: 8,
      }),
    ).rejects.toThrow(/no examples/);
  });

  it('rejects duplicate example ids', async () => {
    const dir = mkdtempSync(join(tmpdir(), 'embexp-'));
    const line = JSON.stringify({
      example_id: 'dup',
      dataset_id: 'syn',
      recipient_id: 'r',
      label: 'F',
      text: 'x y z',
    });
    const input = join(dir, 'dup.jsonl');
    writeFileSync(input, line + '\n' + line + '\n');
    await expect(
      runExport({
        model: 'hash-32',
        pooling: 'mean',
        input,
        output: join(dir, 'x.rpemb'),
        batchSize: 8,
      }),
    ).rejects.toThrow(/duplicate/);
  });
});
