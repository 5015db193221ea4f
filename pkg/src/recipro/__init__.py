"""recipro: recipient-profiling toolchain.

Ingest conversation corpora, prepare balanced recipient-grouped example
sets, train linear classifiers over hashed n-grams or frozen embeddings,
and analyze the results (balanced accuracy, transfer matrices, per-class
gaps, kappa agreement).
"""

__version__ = "0.1.0"
