"""Binary logistic-regression models over sparse hashed features or dense
frozen-encoder embeddings.

The default optimizer is plain mini-batch gradient descent: it is the one
path guaranteed bit-reproducible from (data bytes, config), including across
the compiled and pure-Python kernel backends.  An adaptive-moment ("adam")
mode is also available but excluded from the bit-exactness guarantee.
"""

from __future__ import annotations

import hashlib
import math
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from recipro import kernels
from recipro.errors import DataError
from recipro.features import SparseVector
from recipro.rng import SplitMix64, derive_seed

MODEL_MAGIC = b"RPMOD1"
EMBEDDING_MAGIC = b"RPEMB1"
_MODEL_VERSION = 1
_EMBEDDING_VERSION = 1

_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8


@dataclass(frozen=True)
class FeatureSpace:
    """Tags which inputs a model accepts: hashed n-grams (dim = hash_dims,
    plus the featurizer config digest) or dense embeddings (dim only)."""

    kind: str  # "hashed" | "dense"
    dim: int
    config_digest: str = ""

    def to_dict(self) -> dict:
        if self.kind == "hashed":
            return {"kind": "hashed", "dim": self.dim, "config_digest": self.config_digest}
        return {"kind": "dense", "dim": self.dim}

    @staticmethod
    def from_dict(obj: dict) -> "FeatureSpace":
        if obj["kind"] == "hashed":
            return FeatureSpace(kind="hashed", dim=obj["dim"], config_digest=obj["config_digest"])
        return FeatureSpace(kind="dense", dim=obj["dim"])


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 3
    l2_lambda: float = 1e-4
    batch_size: int = 32
    seed: int = 0
    optimizer: str = "sgd"  # "sgd" | "adam"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise DataError("learning_rate must be > 0")
        if self.epochs < 1:
            raise DataError("epochs must be >= 1")
        if self.l2_lambda < 0:
            raise DataError("l2_lambda must be >= 0")
        if self.batch_size < 1:
            raise DataError("batch_size must be >= 1")
        if self.optimizer not in ("sgd", "adam"):
            raise DataError(f"unknown optimizer: {self.optimizer!r}")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "l2_lambda": self.l2_lambda,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "optimizer": self.optimizer,
        }

    @staticmethod
    def from_dict(obj: dict) -> "TrainConfig":
        return TrainConfig(
            learning_rate=obj.get("learning_rate", 0.1),
            epochs=obj.get("epochs", 3),
            l2_lambda=obj.get("l2_lambda", 1e-4),
            batch_size=obj.get("batch_size", 32),
            seed=obj.get("seed", 0),
            optimizer=obj.get("optimizer", "sgd"),
        )

# Default schedule for linear probes over frozen embeddings; dense features
# need no L2 here.
PROBE_TRAIN_DEFAULTS = TrainConfig(learning_rate=2e-5, epochs=3, l2_lambda=0.0)


@dataclass
class LinearModel:
    """label_order is [negative, positive]; score is P(positive)."""

    label_order: list[str]
    weights: np.ndarray  # float64
    bias: float
    feature_space: FeatureSpace
    train_meta: dict = field(default_factory=dict)

    @property
    def positive_label(self) -> str:
        return self.label_order[1]

    @property
    def negative_label(self) -> str:
        return self.label_order[0]


@dataclass
class EmbeddingTable:
    """Frozen per-example embeddings keyed by example_id."""

    dim: int
    source_model: str
    vectors: dict[str, np.ndarray]

    def __post_init__(self):
        for ex_id, vec in self.vectors.items():
            if vec.shape != (self.dim,):
                raise DataError(f"embedding for {ex_id!r} has shape {vec.shape}, want ({self.dim},)")
            if not np.all(np.isfinite(vec)):
                raise DataError(f"embedding for {ex_id!r} contains non-finite values")


class _CSR:
    """Flat row storage shared by the sparse and dense training paths."""

    __slots__ = ("indptr", "indices", "values", "n_rows", "dims")

    def __init__(self, indptr, indices, values, dims):
        self.indptr = indptr
        self.indices = indices
        self.values = values
        self.n_rows = indptr.shape[0] - 1
        self.dims = dims


def _csr_from_sparse(vectors: list[SparseVector], dims: int) -> _CSR:
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    for i, v in enumerate(vectors):
        indptr[i + 1] = indptr[i] + len(v)
    total = int(indptr[-1])
    indices = np.empty(total, dtype=np.int64)
    values = np.empty(total, dtype=np.float64)
    for i, v in enumerate(vectors):
        indices[indptr[i] : indptr[i + 1]] = v.indices
        values[indptr[i] : indptr[i + 1]] = v.weights
    return _CSR(indptr, indices, values, dims)


def _csr_from_dense(matrix: np.ndarray) -> _CSR:
    n, dims = matrix.shape
    indptr = np.arange(0, (n + 1) * dims, dims, dtype=np.int64)
    indices = np.tile(np.arange(dims, dtype=np.int64), n)
    values = np.ascontiguousarray(matrix, dtype=np.float64).reshape(-1)
    return _CSR(indptr, indices, values, dims)


def _data_digest(csr: _CSR, y: np.ndarray, labels: list[str]) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(csr.indptr).tobytes())
    h.update(np.ascontiguousarray(csr.indices).tobytes())
    h.update(np.ascontiguousarray(csr.values).tobytes())
    h.update(np.ascontiguousarray(y).tobytes())
    h.update(json.dumps(labels).encode("utf-8"))
    return h.hexdigest()


def _adam_epoch(w, bias, csr, y, perm, cfg: TrainConfig, m, v, mb, vb, step: int):
    """Adam over the same mini-batch gradients; numpy-vectorized (no
    bit-exactness contract for this mode)."""
    lr, l2 = cfg.learning_rate, cfg.l2_lambda
    n = perm.shape[0]
    start = 0
    while start < n:
        stop = min(start + cfg.batch_size, n)
        rows = perm[start:stop]
        grad = np.zeros_like(w)
        gb = 0.0
        for row in rows:
            sl = slice(int(csr.indptr[row]), int(csr.indptr[row + 1]))
            z = bias + float(np.dot(w[csr.indices[sl]], csr.values[sl]))
            p = 1.0 / (1.0 + np.exp(-z)) if z >= 0 else np.exp(z) / (1.0 + np.exp(z))
            err = p - float(y[row])
            grad[csr.indices[sl]] += err * csr.values[sl]
            gb += err
        bsz = stop - start
        grad /= bsz
        gb /= bsz
        if l2:
            grad += l2 * w
        step += 1
        m[:] = _ADAM_BETA1 * m + (1 - _ADAM_BETA1) * grad
        v[:] = _ADAM_BETA2 * v + (1 - _ADAM_BETA2) * grad * grad
        mb = _ADAM_BETA1 * mb + (1 - _ADAM_BETA1) * gb
        vb = _ADAM_BETA2 * vb + (1 - _ADAM_BETA2) * gb * gb
        mhat = m / (1 - _ADAM_BETA1**step)
        vhat = v / (1 - _ADAM_BETA2**step)
        w -= lr * mhat / (np.sqrt(vhat) + _ADAM_EPS)
        bias -= lr * (mb / (1 - _ADAM_BETA1**step)) / (
            np.sqrt(vb / (1 - _ADAM_BETA2**step)) + _ADAM_EPS
        )
        start = stop
    return bias, mb, vb, step


def _train_csr(
    csr: _CSR,
    labels: list[str],
    cfg: TrainConfig,
    feature_space: FeatureSpace,
    extra_meta: dict | None = None,
) -> LinearModel:
    distinct = sorted(set(labels))
    if len(distinct) < 2:
        raise DataError("degenerate_class: training needs two label values")
    if len(distinct) > 2:
        raise DataError(f"binary training path got {len(distinct)} labels: {distinct}")
    if not (np.all(np.isfinite(csr.values))):
        raise DataError("non-finite feature value in training data")
    negative, positive = distinct
    y = np.array([1.0 if lab == positive else 0.0 for lab in labels], dtype=np.float64)

    w = np.zeros(csr.dims, dtype=np.float64)
    bias = 0.0
    perm = np.arange(csr.n_rows, dtype=np.int64)
    rng = SplitMix64(derive_seed(cfg.seed, "batch-order"))
    loss_history: list[float] = []

    if cfg.optimizer == "adam":
        m = np.zeros_like(w)
        v = np.zeros_like(w)
        mb = vb = 0.0
        step = 0
        for _ in range(cfg.epochs):
            order = list(range(csr.n_rows))
            rng.shuffle(order)
            perm = np.array(order, dtype=np.int64)
            bias, mb, vb, step = _adam_epoch(w, bias, csr, y, perm, cfg, m, v, mb, vb, step)
            loss, _, _ = kernels.logistic_loss_grad(
                w, bias, csr.indptr, csr.indices, csr.values, y, cfg.l2_lambda
            )
            loss_history.append(float(loss))
    else:
        for _ in range(cfg.epochs):
            order = list(range(csr.n_rows))
            rng.shuffle(order)
            perm = np.array(order, dtype=np.int64)
            bias = kernels.sgd_epoch(
                w,
                bias,
                csr.indptr,
                csr.indices,
                csr.values,
                y,
                perm,
                cfg.learning_rate,
                cfg.l2_lambda,
                cfg.batch_size,
            )
            loss, _, _ = kernels.logistic_loss_grad(
                w, bias, csr.indptr, csr.indices, csr.values, y, cfg.l2_lambda
            )
            loss_history.append(float(loss))

    meta = {
        **cfg.to_dict(),
        "dataset_digest": _data_digest(csr, y, labels),
        "loss_history": loss_history,
    }
    if extra_meta:
        meta.update(extra_meta)
    return LinearModel(
        label_order=[negative, positive],
        weights=w,
        bias=float(bias),
        feature_space=feature_space,
        train_meta=meta,
    )


def train(
    features: list[tuple[SparseVector, str]],
    cfg: TrainConfig,
    feature_space: FeatureSpace,
) -> LinearModel:
    """Train the sparse-feature baseline by seed-deterministic mini-batch
    descent on mean logistic loss + (l2/2)||w||^2."""
    if not features:
        raise DataError("degenerate_class: no training examples")
    if feature_space.kind == "hashed" and not feature_space.config_digest:
        raise DataError("hashed feature space needs a featurizer config digest")
    for vec, _ in features:
        if len(vec) and int(vec.indices[-1]) >= feature_space.dim:
            raise DataError(
                f"feature index {int(vec.indices[-1])} outside feature space of dim "
                f"{feature_space.dim}"
            )
    csr = _csr_from_sparse([vec for vec, _ in features], feature_space.dim)
    return _train_csr(csr, [lab for _, lab in features], cfg, feature_space)


def train_hashed(
    vectors: list[SparseVector],
    labels: list[str],
    cfg: TrainConfig,
    featurizer_config_digest: str,
    hash_dims: int,
) -> LinearModel:
    """Convenience wrapper for the n-gram baseline feature space."""
    return train(
        list(zip(vectors, labels)),
        cfg,
        FeatureSpace(kind="hashed", dim=hash_dims, config_digest=featurizer_config_digest),
    )


def train_probe(
    table: EmbeddingTable, labels: dict[str, str], cfg: TrainConfig | None = None
) -> LinearModel:
    """Linear probe over frozen embeddings: same optimizer, dense inputs.

    Example order is the sorted labeled id list, making the run a pure
    function of (table, labels, config).
    """
    cfg = cfg or PROBE_TRAIN_DEFAULTS
    ids = sorted(labels)
    missing = [i for i in ids if i not in table.vectors]
    if missing:
        raise DataError(f"missing embeddings for labeled ids: {missing[:10]}")
    if not ids:
        raise DataError("degenerate_class: no labeled examples")
    matrix = np.stack([table.vectors[i].astype(np.float64) for i in ids])
    csr = _csr_from_dense(matrix)
    return _train_csr(
        csr,
        [labels[i] for i in ids],
        cfg,
        FeatureSpace(kind="dense", dim=table.dim),
        extra_meta={"source_model": table.source_model},
    )


def _margin(m: LinearModel, vector) -> float:
    if isinstance(vector, SparseVector):
        if len(vector) and int(vector.indices[-1]) >= m.weights.shape[0]:
            raise DataError(
                f"feature index {int(vector.indices[-1])} out of range for model "
                f"with {m.weights.shape[0]} weights"
            )
        indptr = np.array([0, len(vector)], dtype=np.int64)
        z = kernels.csr_margins(m.weights, m.bias, indptr, vector.indices, vector.weights)
        return float(z[0])
    vec = np.asarray(vector, dtype=np.float64)
    if vec.shape != (m.weights.shape[0],):
        raise DataError(f"dense vector shape {vec.shape} does not match model dim {m.weights.shape[0]}")
    csr = _csr_from_dense(vec.reshape(1, -1))
    z = kernels.csr_margins(m.weights, m.bias, csr.indptr, csr.indices, csr.values)
    return float(z[0])


def predict(m: LinearModel, vector) -> tuple[str, float]:
    """Returns (label, score) with score = sigmoid(w.x + b) = P(positive).

    The decision threshold is 0.5; a score of exactly 0.5 predicts the
    positive label.  Saturated sigmoid outputs are nudged to the nearest
    representable value inside (0, 1).
    """
    z = _margin(m, vector)
    score = float(kernels.sigmoid_vec(np.array([z], dtype=np.float64))[0])
    score = min(max(score, math.nextafter(0.0, 1.0)), math.nextafter(1.0, 0.0))
    label = m.positive_label if score >= 0.5 else m.negative_label
    return label, score


def predict_many(m: LinearModel, vectors: list) -> list[tuple[str, float]]:
    return [predict(m, v) for v in vectors]


def save(m: LinearModel, path: str | Path) -> None:
    """Model file: magic, version, header JSON, LE float64 weights, bias,
    train_meta JSON block.  load(save(m)) is bit-exact."""
    header = json.dumps(
        {
            "label_order": m.label_order,
            "feature_space": m.feature_space.to_dict(),
            "n_weights": int(m.weights.shape[0]),
        },
        sort_keys=True,
    ).encode("utf-8")
    meta = json.dumps(m.train_meta, sort_keys=True).encode("utf-8")
    weights = np.ascontiguousarray(m.weights, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<B", _MODEL_VERSION))
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(weights.tobytes())
        fh.write(struct.pack("<d", m.bias))
        fh.write(struct.pack("<I", len(meta)))
        fh.write(meta)


def load(path: str | Path) -> LinearModel:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read model file {path}: {exc}") from exc
    try:
        if blob[: len(MODEL_MAGIC)] != MODEL_MAGIC:
            raise DataError(f"corrupt_model: {path}: bad magic")
        off = len(MODEL_MAGIC)
        (version,) = struct.unpack_from("<B", blob, off)
        off += 1
        if version != _MODEL_VERSION:
            raise DataError(f"corrupt_model: {path}: unsupported version {version}")
        (hlen,) = struct.unpack_from("<I", blob, off)
        off += 4
        header = json.loads(blob[off : off + hlen])
        off += hlen
        n = header["n_weights"]
        need = n * 8
        if off + need + 8 + 4 > len(blob):
            raise DataError(f"corrupt_model: {path}: truncated")
        weights = np.frombuffer(blob[off : off + need], dtype="<f8").copy()
        off += need
        (bias,) = struct.unpack_from("<d", blob, off)
        off += 8
        (mlen,) = struct.unpack_from("<I", blob, off)
        off += 4
        meta = json.loads(blob[off : off + mlen])
    except (struct.error, json.JSONDecodeError, KeyError, UnicodeDecodeError) as exc:
        raise DataError(f"corrupt_model: {path}: {exc}") from exc
    space = FeatureSpace.from_dict(header["feature_space"])
    if space.dim != weights.shape[0]:
        raise DataError(
            f"corrupt_model: {path}: feature space dim {space.dim} does not match "
            f"{weights.shape[0]} stored weights"
        )
    return LinearModel(
        label_order=header["label_order"],
        weights=weights,
        bias=float(bias),
        feature_space=space,
        train_meta=meta,
    )


def write_embeddings(table: EmbeddingTable, path: str | Path) -> None:
    """Write the embedding interchange file (magic RPEMB1, version, u32 dim,
    u64 count, then per record: u32 id length, UTF-8 id, dim LE float32)."""
    with open(path, "wb") as fh:
        fh.write(EMBEDDING_MAGIC)
        fh.write(struct.pack("<B", _EMBEDDING_VERSION))
        fh.write(struct.pack("<I", table.dim))
        fh.write(struct.pack("<Q", len(table.vectors)))
        for ex_id in table.vectors:
            id_bytes = ex_id.encode("utf-8")
            fh.write(struct.pack("<I", len(id_bytes)))
            fh.write(id_bytes)
            fh.write(np.ascontiguousarray(table.vectors[ex_id], dtype="<f4").tobytes())


def read_embeddings(path: str | Path, source_model: str = "") -> EmbeddingTable:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read embedding file {path}: {exc}") from exc
    try:
        if blob[: len(EMBEDDING_MAGIC)] != EMBEDDING_MAGIC:
            raise DataError(f"{path}: not an embedding file (bad magic)")
        off = len(EMBEDDING_MAGIC)
        (version,) = struct.unpack_from("<B", blob, off)
        off += 1
        if version != _EMBEDDING_VERSION:
            raise DataError(f"{path}: unsupported embedding version {version}")
        (dim,) = struct.unpack_from("<I", blob, off)
        off += 4
        (count,) = struct.unpack_from("<Q", blob, off)
        off += 8
        vectors: dict[str, np.ndarray] = {}
        for _ in range(count):
            (id_len,) = struct.unpack_from("<I", blob, off)
            off += 4
            ex_id = blob[off : off + id_len].decode("utf-8")
            off += id_len
            need = dim * 4
            if off + need > len(blob):
                raise DataError(f"{path}: truncated embedding file")
            vec = np.frombuffer(blob[off : off + need], dtype="<f4").copy()
            off += need
            if ex_id in vectors:
                raise DataError(f"{path}: duplicate example_id {ex_id!r}")
            vectors[ex_id] = vec
    except (struct.error, UnicodeDecodeError) as exc:
        raise DataError(f"{path}: corrupt embedding file: {exc}") from exc
    return EmbeddingTable(dim=dim, source_model=source_model, vectors=vectors)
