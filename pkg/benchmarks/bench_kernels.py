#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Times the two hot paths (n-gram featurization and SGD epochs) on synthetic
chunk-sized texts and asserts that both backends return bit-identical
results.  Run from the repo root:

    python benchmarks/bench_kernels.py
"""

from __future__ import annotations

import time

import numpy as np

from recipro import _pykernels as pk
from recipro.rng import SplitMix64

try:
    from recipro import _ckernels as ck
except ImportError:
    ck = None

WORDS = [
    "about", "again", "along", "answer", "around", "because", "before",
    "better", "between", "change", "could", "dinner", "early", "enough",
    "evening", "every", "garden", "little", "maybe", "minute", "morning",
    "nothing", "people", "perhaps", "question", "really", "should",
    "something", "station", "together", "weather", "weekend",
]


def make_texts(n: int, words_per_text: int, seed: int = 42) -> list[str]:
    rng = SplitMix64(seed)
    return [
        " ".join(WORDS[rng.randbelow(len(WORDS))] for _ in range(words_per_text))
        for _ in range(n)
    ]


def bench_ngrams(backend, texts, dims=1 << 18):
    start = time.perf_counter()
    out = [backend.ngram_counts(t, 1, 2, 3, 5, dims) for t in texts]
    return time.perf_counter() - start, out


def make_csr(texts, backend, dims=1 << 18):
    rows = [backend.ngram_counts(t, 1, 2, 3, 5, dims) for t in texts]
    indptr = np.zeros(len(rows) + 1, dtype=np.int64)
    for i, (idx, _) in enumerate(rows):
        indptr[i + 1] = indptr[i] + idx.shape[0]
    indices = np.concatenate([r[0] for r in rows])
    values = np.concatenate([r[1] for r in rows])
    return indptr, indices, values


def bench_sgd(backend, indptr, indices, values, y, perm, dims, epochs=3):
    w = np.zeros(dims, dtype=np.float64)
    bias = 0.0
    start = time.perf_counter()
    for _ in range(epochs):
        bias = backend.sgd_epoch(w, bias, indptr, indices, values, y, perm, 0.1, 1e-4, 32)
    return time.perf_counter() - start, w, bias


def main() -> None:
    n_texts, words = 400, 160  # ~1000-character chunks
    dims = 1 << 18
    texts = make_texts(n_texts, words)
    print(f"corpus: {n_texts} texts x ~{len(texts[0])} chars, hash_dims={dims}")

    t_py, out_py = bench_ngrams(pk, texts, dims)
    print(f"ngram_counts  python : {t_py:8.3f} s")
    if ck is not None:
        t_cy, out_cy = bench_ngrams(ck, texts, dims)
        print(f"ngram_counts  cython : {t_cy:8.3f} s   ({t_py / t_cy:5.1f}x)")
        for (i1, c1), (i2, c2) in zip(out_py, out_cy):
            assert np.array_equal(i1, i2) and np.array_equal(c1, c2)
        print("ngram_counts  outputs bit-identical")

    indptr, indices, values = make_csr(texts, pk, dims)
    rng = np.random.default_rng(7)
    y = rng.integers(0, 2, size=n_texts).astype(np.float64)
    perm = rng.permutation(n_texts).astype(np.int64)

    t_py, w_py, b_py = bench_sgd(pk, indptr, indices, values, y, perm, dims)
    print(f"sgd 3 epochs  python : {t_py:8.3f} s")
    if ck is not None:
        t_cy, w_cy, b_cy = bench_sgd(ck, indptr, indices, values, y, perm, dims)
        print(f"sgd 3 epochs  cython : {t_cy:8.3f} s   ({t_py / t_cy:5.1f}x)")
        assert b_py == b_cy and np.array_equal(w_py, w_cy)
        print("sgd           outputs bit-identical")
    if ck is None:
        print("compiled extension not available; python fallback only")


if __name__ == "__main__":
    main()
