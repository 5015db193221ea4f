/** Pooling of per-token hidden states into one sentence vector. */

export type PoolingMode = 'mean' | 'cls';

export function pool(tokenStates: number[][], mode: PoolingMode): Float32Array {
  if (tokenStates.length === 0) {
    throw new Error('cannot pool an empty token sequence');
  }
  const dim = tokenStates[0].length;
  const out = new Float32Array(dim);
  if (mode === 'cls') {
    for (let i = 0; i < dim; i++) out[i] = tokenStates[0][i];
    return out;
  }
  for (const state of tokenStates) {
    if (state.length !== dim) throw new Error('ragged token states');
    for (let i = 0; i < dim; i++) out[i] += state[i];
  }
  for (let i = 0; i < dim; i++) out[i] /= tokenStates.length;
  return out;
}
