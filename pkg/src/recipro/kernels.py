"""Kernel backend selection.

The compiled extension (`recipro._ckernels`) is preferred when it built;
otherwise the pure-Python reference (`recipro._pykernels`) takes over.  Both
produce bit-identical outputs, so the choice only affects speed.  Set
RECIPRO_KERNELS=python|cython to force a backend (forcing "cython" on an
install without the extension raises ImportError).
"""

from __future__ import annotations

import os

_forced = os.environ.get("RECIPRO_KERNELS", "").strip().lower()

if _forced == "python":
    from recipro import _pykernels as _impl

    BACKEND = "python"
elif _forced == "cython":
    from recipro import _ckernels as _impl  # type: ignore[no-redef]

    BACKEND = "cython"
else:
    try:
        from recipro import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        from recipro import _pykernels as _impl

        BACKEND = "python"

FNV_OFFSET = _impl.FNV_OFFSET
FNV_PRIME = _impl.FNV_PRIME
fnv1a64 = _impl.fnv1a64
ngram_counts = _impl.ngram_counts
sigmoid_vec = _impl.sigmoid_vec
l2_normalize = _impl.l2_normalize
csr_margins = _impl.csr_margins
sgd_epoch = _impl.sgd_epoch
logistic_loss_grad = _impl.logistic_loss_grad
