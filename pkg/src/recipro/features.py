"""Deterministic text featurization: hashed word/char n-grams with TF-IDF.

Feature hashing keeps the model dimensionality fixed with no vocabulary
file; FNV-1a was chosen because it is trivial to reimplement bit-exactly
anywhere.  Collisions are tolerated by design.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from recipro import kernels
from recipro.errors import DataError

FEATURIZER_MAGIC = b"RPFEAT1"
_FORMAT_VERSION = 1


def _is_power_of_two(n: int) -> bool:
    return n >= 2 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class FeaturizerConfig:
    word_ngrams: tuple[int, int] = (1, 2)
    char_ngrams: tuple[int, int] = (3, 5)
    hash_dims: int = 1 << 18
    use_tfidf: bool = True
    lowercase: bool = True

    def __post_init__(self):
        for name, (lo, hi) in (("word_ngrams", self.word_ngrams), ("char_ngrams", self.char_ngrams)):
            if lo < 1 or hi < lo:
                raise DataError(f"{name} range must satisfy 1 <= low <= high, got {(lo, hi)}")
        if not _is_power_of_two(self.hash_dims):
            raise DataError(f"hash_dims must be a power of two >= 2, got {self.hash_dims}")

    def to_dict(self) -> dict:
        return {
            "word_ngrams": list(self.word_ngrams),
            "char_ngrams": list(self.char_ngrams),
            "hash_dims": self.hash_dims,
            "use_tfidf": self.use_tfidf,
            "lowercase": self.lowercase,
        }

    @staticmethod
    def from_dict(obj: dict) -> "FeaturizerConfig":
        return FeaturizerConfig(
            word_ngrams=tuple(obj.get("word_ngrams", (1, 2))),
            char_ngrams=tuple(obj.get("char_ngrams", (3, 5))),
            hash_dims=obj.get("hash_dims", 1 << 18),
            use_tfidf=obj.get("use_tfidf", True),
            lowercase=obj.get("lowercase", True),
        )

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


@dataclass
class SparseVector:
    """Sorted (index, weight) pairs; unit L2 norm unless the text was empty."""

    indices: np.ndarray  # int64, strictly increasing
    weights: np.ndarray  # float64

    def __len__(self) -> int:
        return int(self.indices.shape[0])

    def pairs(self) -> list[tuple[int, float]]:
        return [(int(i), float(w)) for i, w in zip(self.indices, self.weights)]


class FittedFeaturizer:
    """Immutable featurizer; safe for concurrent featurize() callers."""

    def __init__(self, config: FeaturizerConfig, idf: dict[int, float] | None, fitted_on: str):
        self.config = config
        self.idf = idf
        self.fitted_on = fitted_on
        # Dense lookup: unseen indices keep idf = 1 (count passthrough).
        self._idf_dense = None
        if idf is not None:
            dense = np.ones(config.hash_dims, dtype=np.float64)
            for idx, value in idf.items():
                dense[idx] = value
            self._idf_dense = dense

    def featurize(self, text: str) -> SparseVector:
        cfg = self.config
        if cfg.lowercase:
            text = text.lower()
        indices, counts = kernels.ngram_counts(
            text,
            cfg.word_ngrams[0],
            cfg.word_ngrams[1],
            cfg.char_ngrams[0],
            cfg.char_ngrams[1],
            cfg.hash_dims,
        )
        if indices.shape[0] == 0:
            return SparseVector(indices=indices, weights=counts)
        weights = counts
        if self._idf_dense is not None:
            weights = counts * self._idf_dense[indices]
        normalized, _ = kernels.l2_normalize(weights)
        return SparseVector(indices=indices, weights=normalized)


def hash_token(token_bytes: bytes, hash_dims: int) -> int:
    """FNV-1a 64-bit digest reduced modulo hash_dims (a power of two)."""
    if not _is_power_of_two(hash_dims):
        raise DataError(f"hash_dims must be a power of two >= 2, got {hash_dims}")
    return kernels.fnv1a64(token_bytes) % hash_dims


def fit(texts: list[str], cfg: FeaturizerConfig | None = None, fitted_on: str = "") -> FittedFeaturizer:
    """Fit document frequencies over a corpus: idf(t) = ln((1+N)/(1+df(t))) + 1.

    With use_tfidf disabled the featurizer is stateless and fitting only
    records provenance.
    """
    cfg = cfg or FeaturizerConfig()
    if not texts:
        raise DataError("cannot fit a featurizer on an empty corpus")
    if not cfg.use_tfidf:
        return FittedFeaturizer(cfg, None, fitted_on)
    df: dict[int, int] = {}
    for text in texts:
        if cfg.lowercase:
            text = text.lower()
        indices, _ = kernels.ngram_counts(
            text,
            cfg.word_ngrams[0],
            cfg.word_ngrams[1],
            cfg.char_ngrams[0],
            cfg.char_ngrams[1],
            cfg.hash_dims,
        )
        for idx in indices:
            i = int(idx)
            df[i] = df.get(i, 0) + 1
    n = len(texts)
    idf = {i: math.log((1 + n) / (1 + d)) + 1.0 for i, d in sorted(df.items())}
    return FittedFeaturizer(cfg, idf, fitted_on)


def save_featurizer(f: FittedFeaturizer, path: str | Path) -> None:
    """Versioned binary file: magic, config JSON, little-endian idf pairs."""
    cfg_blob = json.dumps(f.config.to_dict(), sort_keys=True).encode("utf-8")
    fitted_blob = f.fitted_on.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(FEATURIZER_MAGIC)
        fh.write(struct.pack("<B", _FORMAT_VERSION))
        fh.write(struct.pack("<I", len(cfg_blob)))
        fh.write(cfg_blob)
        if f.idf is None:
            fh.write(struct.pack("<B", 0))
            fh.write(struct.pack("<Q", 0))
        else:
            fh.write(struct.pack("<B", 1))
            fh.write(struct.pack("<Q", len(f.idf)))
            for idx in sorted(f.idf):
                fh.write(struct.pack("<Id", idx, f.idf[idx]))
        fh.write(struct.pack("<I", len(fitted_blob)))
        fh.write(fitted_blob)


def load_featurizer(path: str | Path) -> FittedFeaturizer:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read featurizer file {path}: {exc}") from exc
    try:
        if blob[: len(FEATURIZER_MAGIC)] != FEATURIZER_MAGIC:
            raise DataError(f"{path}: not a featurizer file (bad magic)")
        off = len(FEATURIZER_MAGIC)
        (version,) = struct.unpack_from("<B", blob, off)
        off += 1
        if version != _FORMAT_VERSION:
            raise DataError(f"{path}: unsupported featurizer version {version}")
        (cfg_len,) = struct.unpack_from("<I", blob, off)
        off += 4
        cfg = FeaturizerConfig.from_dict(json.loads(blob[off : off + cfg_len]))
        off += cfg_len
        (has_idf,) = struct.unpack_from("<B", blob, off)
        off += 1
        (n_idf,) = struct.unpack_from("<Q", blob, off)
        off += 8
        idf: dict[int, float] | None = None
        if has_idf:
            idf = {}
            for _ in range(n_idf):
                idx, value = struct.unpack_from("<Id", blob, off)
                off += 12
                idf[idx] = value
        (fitted_len,) = struct.unpack_from("<I", blob, off)
        off += 4
        fitted_on = blob[off : off + fitted_len].decode("utf-8")
    except (struct.error, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise DataError(f"{path}: corrupt featurizer file: {exc}") from exc
    return FittedFeaturizer(cfg, idf, fitted_on)
