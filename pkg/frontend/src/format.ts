/**
 * RPEMB1 embedding interchange format.
 *
 * Layout (all integers little-endian):
 *   magic  "RPEMB1" (6 bytes)
 *   u8     format version (1)
 *   u32    dim
 *   u64    count
 *   count records of: u32 id byte-length, UTF-8 id, dim * f32
 */

export const MAGIC = Buffer.from('RPEMB1', 'ascii');
export const FORMAT_VERSION = 1;

export interface EmbeddingRecord {
  id: string;
  vector: Float32Array;
}

export function encodeEmbeddings(dim: number, records: EmbeddingRecord[]): Buffer {
  const parts: Buffer[] = [];
  const header = Buffer.alloc(MAGIC.length + 1 + 4 + 8);
  MAGIC.copy(header, 0);
  let off = MAGIC.length;
  off = header.writeUInt8(FORMAT_VERSION, off);
  off = header.writeUInt32LE(dim, off);
  header.writeBigUInt64LE(BigInt(records.length), off);
  parts.push(header);

  for (const record of records) {
    if (record.vector.length !== dim) {
      throw new Error(
        `embedding for ${record.id} has length ${record.vector.length}, expected ${dim}`,
      );
    }
    const idBytes = Buffer.from(record.id, 'utf-8');
    const len = Buffer.alloc(4);
    len.writeUInt32LE(idBytes.length, 0);
    const values = Buffer.alloc(dim * 4);
    for (let i = 0; i < dim; i++) {
      values.writeFloatLE(record.vector[i], i * 4);
    }
    parts.push(len, idBytes, values);
  }
  return Buffer.concat(parts);
}

export function decodeEmbeddings(blob: Buffer): { dim: number; records: EmbeddingRecord[] } {
  if (blob.length < MAGIC.length + 1 + 4 + 8 || !blob.subarray(0, MAGIC.length).equals(MAGIC)) {
    throw new Error('not an RPEMB1 file (bad magic)');
  }
  let off = MAGIC.length;
  const version = blob.readUInt8(off);
  off += 1;
  if (version !== FORMAT_VERSION) {
    throw new Error(`unsupported RPEMB1 version ${version}`);
  }
  const dim = blob.readUInt32LE(off);
  off += 4;
  const count = Number(blob.readBigUInt64LE(off));
  off += 8;

  const records: EmbeddingRecord[] = [];
  for (let r = 0; r < count; r++) {
    if (off + 4 > blob.length) throw new Error('truncated RPEMB1 file');
    const idLen = blob.readUInt32LE(off);
    off += 4;
    if (off + idLen + dim * 4 > blob.length) throw new Error('truncated RPEMB1 file');
    const id = blob.subarray(off, off + idLen).toString('utf-8');
    off += idLen;
    const vector = new Float32Array(dim);
    for (let i = 0; i < dim; i++) {
      vector[i] = blob.readFloatLE(off + i * 4);
    }
    off += dim * 4;
    records.push({ id, vector });
  }
  return { dim, records };
}
