"""Pure-Python reference kernels.

These are the hot loops of the toolchain: n-gram hashing, sparse dot
products, and mini-batch logistic-regression epochs.  `recipro._ckernels`
is a compiled drop-in replacement; `recipro.kernels` picks whichever is
importable.

Bit-exactness contract: both backends must execute the *same sequence* of
IEEE-754 double operations.  That is why the accumulations below are plain
sequential loops (never numpy reductions, whose summation order differs)
and why numpy is only used for storage and elementwise operations.
"""

from __future__ import annotations

import math

import numpy as np

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1

# Hash-domain prefixes keep word and character n-grams from colliding by
# construction (they still collide modulo hash_dims, which is tolerated).
_WORD_PREFIX = b"w "
_CHAR_PREFIX = b"c "


def fnv1a64(data: bytes) -> int:
    """FNV-1a 64-bit digest of a byte string."""
    h = FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * FNV_PRIME) & _MASK64
    return h


def _fnv_update(h: int, data: bytes) -> int:
    for byte in data:
        h = ((h ^ byte) * FNV_PRIME) & _MASK64
    return h


_WORD_STATE = fnv1a64(_WORD_PREFIX)
_CHAR_STATE = fnv1a64(_CHAR_PREFIX)


def ngram_counts(text, w_lo, w_hi, c_lo, c_hi, hash_dims):
    """Hashed n-gram occurrence counts for one text.

    Word n-grams are drawn from whitespace tokens and hashed as
    ``b"w " + " ".join(tokens)``; character n-grams slide over the code
    points of the raw string and hash as ``b"c " + gram``.  Indices are
    FNV-1a digests reduced modulo ``hash_dims`` (a power of two).

    Returns (indices, counts): strictly increasing int64 indices and
    float64 occurrence counts.
    """
    mask = hash_dims - 1
    counts: dict[int, int] = {}

    tokens = text.split()
    tok_bytes = [t.encode("utf-8") for t in tokens]
    for n in range(w_lo, w_hi + 1):
        for start in range(len(tok_bytes) - n + 1):
            h = _fnv_update(_WORD_STATE, tok_bytes[start])
            for k in range(start + 1, start + n):
                h = _fnv_update(h, b" ")
                h = _fnv_update(h, tok_bytes[k])
            idx = h & mask
            counts[idx] = counts.get(idx, 0) + 1

    n_chars = len(text)
    for n in range(c_lo, c_hi + 1):
        for start in range(n_chars - n + 1):
            h = _fnv_update(_CHAR_STATE, text[start : start + n].encode("utf-8"))
            idx = h & mask
            counts[idx] = counts.get(idx, 0) + 1

    if not counts:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64)
    items = sorted(counts.items())
    idx_arr = np.array([i for i, _ in items], dtype=np.int64)
    cnt_arr = np.array([float(c) for _, c in items], dtype=np.float64)
    return idx_arr, cnt_arr


def _sigmoid(z: float) -> float:
    # Branchy form never overflows exp().
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def sigmoid_vec(z):
    out = np.empty(z.shape[0], dtype=np.float64)
    for i in range(z.shape[0]):
        out[i] = _sigmoid(float(z[i]))
    return out


def l2_normalize(weights):
    """Scale to unit L2 norm; the all-zero vector is passed through.

    Returns (normalized array, original norm).
    """
    acc = 0.0
    for i in range(weights.shape[0]):
        v = float(weights[i])
        acc += v * v
    norm = math.sqrt(acc)
    if norm == 0.0:
        return weights.copy(), 0.0
    out = np.empty(weights.shape[0], dtype=np.float64)
    for i in range(weights.shape[0]):
        out[i] = float(weights[i]) / norm
    return out, norm


def csr_margins(w, bias, indptr, indices, values):
    """Row-wise w.x + b over a CSR matrix, accumulated in storage order."""
    n = indptr.shape[0] - 1
    out = np.empty(n, dtype=np.float64)
    b = float(bias)
    for row in range(n):
        z = b
        for t in range(int(indptr[row]), int(indptr[row + 1])):
            z += float(w[indices[t]]) * float(values[t])
        out[row] = z
    return out


def sgd_epoch(w, bias, indptr, indices, values, y, perm, lr, l2, batch_size):
    """One pass of mini-batch gradient descent on the logistic loss.

    Visits rows in `perm` order, forming consecutive batches (the final
    batch may be short).  Per batch: forward pass at the current weights,
    then the L2 shrink ``w *= (1 - lr*l2)``, then the data-gradient update
    ``w[j] -= (lr/B) * err_i * x_ij`` row by row.  Updates `w` in place and
    returns the new bias.
    """
    n = perm.shape[0]
    b = float(bias)
    lr = float(lr)
    decay = 1.0 - lr * float(l2)
    start = 0
    while start < n:
        stop = min(start + batch_size, n)
        bsz = stop - start
        errs = []
        for k in range(start, stop):
            row = int(perm[k])
            z = b
            for t in range(int(indptr[row]), int(indptr[row + 1])):
                z += float(w[indices[t]]) * float(values[t])
            errs.append(_sigmoid(z) - float(y[row]))
        if l2 != 0.0:
            w *= decay
        coef = lr / bsz
        esum = 0.0
        for i, k in enumerate(range(start, stop)):
            row = int(perm[k])
            c = coef * errs[i]
            for t in range(int(indptr[row]), int(indptr[row + 1])):
                w[indices[t]] -= c * float(values[t])
            esum += errs[i]
        b -= lr * (esum / bsz)
        start = stop
    return b


def logistic_loss_grad(w, bias, indptr, indices, values, y, l2):
    """Full-batch mean logistic loss plus L2 term, with its gradient.

    Returns (loss, grad_w, grad_bias).  loss = mean_i softplus-form loss
    + (l2/2)*||w||^2; grad_w = mean_i (p_i - y_i) x_i + l2*w.
    """
    n = indptr.shape[0] - 1
    grad_w = np.zeros(w.shape[0], dtype=np.float64)
    loss_sum = 0.0
    gb_sum = 0.0
    for row in range(n):
        z = float(bias)
        for t in range(int(indptr[row]), int(indptr[row + 1])):
            z += float(w[indices[t]]) * float(values[t])
        yv = float(y[row])
        if z > 0.0:
            loss_sum += (z + math.log1p(math.exp(-z))) - yv * z
        else:
            loss_sum += math.log1p(math.exp(z)) - yv * z
        err = _sigmoid(z) - yv
        for t in range(int(indptr[row]), int(indptr[row + 1])):
            grad_w[indices[t]] += err * float(values[t])
        gb_sum += err
    inv_n = 1.0 / n
    loss = loss_sum * inv_n
    grad_w *= inv_n
    if l2 != 0.0:
        acc = 0.0
        for i in range(w.shape[0]):
            v = float(w[i])
            acc += v * v
        loss += 0.5 * float(l2) * acc
        grad_w += l2 * w
    return loss, grad_w, gb_sum * inv_n
