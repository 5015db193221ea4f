"""Bridges from prepared examples to model feature spaces.

A vectorizer answers two questions: can this model be applied to examples
of a given dataset, and what vector does one example map to.  The hashed
featurizer works on any text; embedding tables only cover the datasets they
were exported for.
"""

from __future__ import annotations

from recipro.errors import DataError
from recipro.features import FittedFeaturizer
from recipro.model import EmbeddingTable
from recipro.pipeline import ProfilingExample


class HashedVectorizer:
    """Vectorizes any dataset through one fitted n-gram featurizer."""

    def __init__(self, featurizer: FittedFeaturizer):
        self.featurizer = featurizer

    def supports(self, dataset_id: str) -> bool:
        return True

    def vectorize(self, example: ProfilingExample, dataset_id: str):
        return self.featurizer.featurize(example.text)


class EmbeddingVectorizer:
    """Serves dense vectors from per-dataset embedding tables."""

    def __init__(self, tables: dict[str, EmbeddingTable]):
        self.tables = tables

    def supports(self, dataset_id: str) -> bool:
        return dataset_id in self.tables

    def vectorize(self, example: ProfilingExample, dataset_id: str):
        table = self.tables.get(dataset_id)
        if table is None:
            raise DataError(f"no embedding table for dataset {dataset_id!r}")
        vec = table.vectors.get(example.example_id)
        if vec is None:
            raise DataError(f"no embedding for example {example.example_id!r}")
        return vec
