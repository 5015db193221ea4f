# cython: language_level=3
# cython: boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled kernels.

Drop-in replacement for recipro._pykernels; that module is the semantics
contract.  Every floating-point accumulation here runs in the same order as
the Python reference so both backends produce bit-identical results (the
extension is compiled with -ffp-contract=off to rule out FMA fusion).
"""

from cpython.bytes cimport PyBytes_AS_STRING, PyBytes_GET_SIZE
from libc.math cimport exp, log1p, sqrt
from libc.stdlib cimport free, malloc

import numpy as np

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3

cdef unsigned long long _OFFSET = 0xCBF29CE484222325
cdef unsigned long long _PRIME = 0x100000001B3


cdef inline unsigned long long _update(unsigned long long h,
                                       const unsigned char* data,
                                       Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(n):
        h = (h ^ (<unsigned long long>data[i])) * _PRIME
    return h


cdef inline unsigned long long _update_byte(unsigned long long h,
                                            unsigned char b) noexcept nogil:
    return (h ^ (<unsigned long long>b)) * _PRIME


# Prefix states: FNV over b"w " / b"c ".
cdef unsigned long long _WORD_STATE = _update_byte(_update_byte(_OFFSET, 0x77), 0x20)
cdef unsigned long long _CHAR_STATE = _update_byte(_update_byte(_OFFSET, 0x63), 0x20)


def fnv1a64(bytes data):
    """FNV-1a 64-bit digest of a byte string."""
    cdef Py_ssize_t n = PyBytes_GET_SIZE(data)
    if n == 0:
        return FNV_OFFSET
    return _update(_OFFSET, <const unsigned char*>PyBytes_AS_STRING(data), n)


def ngram_counts(str text, int w_lo, int w_hi, int c_lo, int c_hi, long long hash_dims):
    """Hashed n-gram occurrence counts; see the reference implementation."""
    cdef unsigned long long mask = <unsigned long long>(hash_dims - 1)
    cdef list tok_bytes = [t.encode("utf-8") for t in text.split()]
    cdef Py_ssize_t T = len(tok_bytes)
    raw_b = text.encode("utf-8")
    cdef Py_ssize_t nbytes = PyBytes_GET_SIZE(raw_b)
    cdef const unsigned char* raw = NULL
    if nbytes > 0:
        raw = <const unsigned char*>PyBytes_AS_STRING(raw_b)

    # Character starts in the UTF-8 buffer (bytes that are not continuations).
    cdef Py_ssize_t* coff = <Py_ssize_t*>malloc((nbytes + 1) * sizeof(Py_ssize_t))
    if coff == NULL:
        raise MemoryError()
    cdef Py_ssize_t i, n_chars = 0
    for i in range(nbytes):
        if (raw[i] & 0xC0) != 0x80:
            coff[n_chars] = i
            n_chars += 1
    coff[n_chars] = nbytes

    cdef Py_ssize_t total = 0
    cdef int n
    for n in range(w_lo, w_hi + 1):
        if T - n + 1 > 0:
            total += T - n + 1
    for n in range(c_lo, c_hi + 1):
        if n_chars - n + 1 > 0:
            total += n_chars - n + 1
    if total == 0:
        free(coff)
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64)

    idx_np = np.empty(total, dtype=np.int64)
    cdef long long[::1] idx = idx_np
    cdef Py_ssize_t pos = 0

    cdef const unsigned char** tptr = NULL
    cdef Py_ssize_t* tlen = NULL
    cdef Py_ssize_t start, k
    cdef unsigned long long h
    if T > 0:
        tptr = <const unsigned char**>malloc(T * sizeof(unsigned char*))
        tlen = <Py_ssize_t*>malloc(T * sizeof(Py_ssize_t))
        if tptr == NULL or tlen == NULL:
            free(coff)
            if tptr != NULL:
                free(tptr)
            if tlen != NULL:
                free(tlen)
            raise MemoryError()
        for i in range(T):
            tb = tok_bytes[i]
            tptr[i] = <const unsigned char*>PyBytes_AS_STRING(tb)
            tlen[i] = PyBytes_GET_SIZE(tb)
        for n in range(w_lo, w_hi + 1):
            for start in range(T - n + 1):
                h = _update(_WORD_STATE, tptr[start], tlen[start])
                for k in range(start + 1, start + n):
                    h = _update_byte(h, 0x20)
                    h = _update(h, tptr[k], tlen[k])
                idx[pos] = <long long>(h & mask)
                pos += 1
        free(tptr)
        free(tlen)

    for n in range(c_lo, c_hi + 1):
        for start in range(n_chars - n + 1):
            h = _update(_CHAR_STATE, raw + coff[start], coff[start + n] - coff[start])
            idx[pos] = <long long>(h & mask)
            pos += 1
    free(coff)

    idx_np.sort()

    cdef Py_ssize_t n_unique = 1
    for i in range(1, total):
        if idx[i] != idx[i - 1]:
            n_unique += 1
    out_idx_np = np.empty(n_unique, dtype=np.int64)
    out_cnt_np = np.empty(n_unique, dtype=np.float64)
    cdef long long[::1] out_idx = out_idx_np
    cdef double[::1] out_cnt = out_cnt_np
    cdef Py_ssize_t u = 0
    cdef double run = 1.0
    out_idx[0] = idx[0]
    for i in range(1, total):
        if idx[i] == idx[i - 1]:
            run += 1.0
        else:
            out_cnt[u] = run
            u += 1
            out_idx[u] = idx[i]
            run = 1.0
    out_cnt[u] = run
    return out_idx_np, out_cnt_np


cdef inline double _sigmoid_c(double z) noexcept nogil:
    cdef double e
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


def sigmoid_vec(const double[::1] z):
    out_np = np.empty(z.shape[0], dtype=np.float64)
    cdef double[::1] out = out_np
    cdef Py_ssize_t i
    for i in range(z.shape[0]):
        out[i] = _sigmoid_c(z[i])
    return out_np


def l2_normalize(const double[::1] weights):
    cdef double acc = 0.0, v
    cdef Py_ssize_t i, n = weights.shape[0]
    for i in range(n):
        v = weights[i]
        acc += v * v
    cdef double norm = sqrt(acc)
    out_np = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_np
    if norm == 0.0:
        for i in range(n):
            out[i] = weights[i]
        return out_np, 0.0
    for i in range(n):
        out[i] = weights[i] / norm
    return out_np, norm


def csr_margins(const double[::1] w, double bias,
                const long long[::1] indptr, const long long[::1] indices,
                const double[::1] values):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    out_np = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_np
    cdef Py_ssize_t row, t
    cdef double z
    for row in range(n):
        z = bias
        for t in range(<Py_ssize_t>indptr[row], <Py_ssize_t>indptr[row + 1]):
            z += w[indices[t]] * values[t]
        out[row] = z
    return out_np


def sgd_epoch(double[::1] w, double bias,
              const long long[::1] indptr, const long long[::1] indices,
              const double[::1] values, const double[::1] y,
              const long long[::1] perm, double lr, double l2,
              long long batch_size):
    cdef Py_ssize_t n = perm.shape[0]
    cdef Py_ssize_t dims = w.shape[0]
    cdef double b = bias
    cdef double decay = 1.0 - lr * l2
    errs_np = np.empty(<Py_ssize_t>batch_size, dtype=np.float64)
    cdef double[::1] errs = errs_np
    cdef Py_ssize_t start = 0, stop, bsz, k, t, row, d
    cdef double z, coef, c, esum
    while start < n:
        stop = start + <Py_ssize_t>batch_size
        if stop > n:
            stop = n
        bsz = stop - start
        for k in range(start, stop):
            row = <Py_ssize_t>perm[k]
            z = b
            for t in range(<Py_ssize_t>indptr[row], <Py_ssize_t>indptr[row + 1]):
                z += w[indices[t]] * values[t]
            errs[k - start] = _sigmoid_c(z) - y[row]
        if l2 != 0.0:
            for d in range(dims):
                w[d] *= decay
        coef = lr / bsz
        esum = 0.0
        for k in range(start, stop):
            row = <Py_ssize_t>perm[k]
            c = coef * errs[k - start]
            for t in range(<Py_ssize_t>indptr[row], <Py_ssize_t>indptr[row + 1]):
                w[indices[t]] -= c * values[t]
            esum += errs[k - start]
        b -= lr * (esum / bsz)
        start = stop
    return b


def logistic_loss_grad(const double[::1] w, double bias,
                       const long long[::1] indptr, const long long[::1] indices,
                       const double[::1] values, const double[::1] y, double l2):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t dims = w.shape[0]
    grad_np = np.zeros(dims, dtype=np.float64)
    cdef double[::1] grad_w = grad_np
    cdef double loss_sum = 0.0, gb_sum = 0.0
    cdef Py_ssize_t row, t, d
    cdef double z, yv, err, v, acc
    for row in range(n):
        z = bias
        for t in range(<Py_ssize_t>indptr[row], <Py_ssize_t>indptr[row + 1]):
            z += w[indices[t]] * values[t]
        yv = y[row]
        if z > 0.0:
            loss_sum += (z + log1p(exp(-z))) - yv * z
        else:
            loss_sum += log1p(exp(z)) - yv * z
        err = _sigmoid_c(z) - yv
        for t in range(<Py_ssize_t>indptr[row], <Py_ssize_t>indptr[row + 1]):
            grad_w[indices[t]] += err * values[t]
        gb_sum += err
    cdef double inv_n = 1.0 / n
    cdef double loss = loss_sum * inv_n
    for d in range(dims):
        grad_w[d] *= inv_n
    if l2 != 0.0:
        acc = 0.0
        for d in range(dims):
            v = w[d]
            acc += v * v
        loss += 0.5 * l2 * acc
        for d in range(dims):
            grad_w[d] += l2 * w[d]
    return loss, grad_np, gb_sum * inv_n
