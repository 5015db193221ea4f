"""Declarative run configuration.

One JSON document describes datasets, pipeline settings, the featurizer,
the model roster, and the seed list; CLI flags narrow a run to a single
dataset/model/seed without editing the file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from recipro.corpus import CleaningConfig
from recipro.errors import UsageError
from recipro.features import FeaturizerConfig
from recipro.model import TrainConfig
from recipro.pipeline import BalanceConfig, ChunkingConfig, SplitConfig

DEFAULT_SEEDS = (1, 2, 3)


@dataclass
class DatasetConfig:
    dataset_id: str
    path: Path
    label_alphabet: list[str]
    cleaning: CleaningConfig
    chunking: ChunkingConfig
    balance: BalanceConfig
    split: SplitConfig

    def pipeline_dict(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "label_alphabet": sorted(self.label_alphabet),
            "cleaning": {
                "strip_patterns": list(self.cleaning.strip_patterns),
                "collapse_whitespace": self.cleaning.collapse_whitespace,
                "lowercase": self.cleaning.lowercase,
            },
            "chunking": {
                "char_limit": self.chunking.char_limit,
                "separator": self.chunking.separator,
                "keep_short_tail": self.chunking.keep_short_tail,
            },
            "balance": {"level": self.balance.level, "seed": self.balance.seed},
            "split": {
                "fractions": list(self.split.fractions),
                "seed": self.split.seed,
            },
        }


@dataclass
class ModelConfig:
    model_id: str
    model_type: str  # "baseline" | "probe"
    train: TrainConfig
    embeddings: dict[str, Path] = field(default_factory=dict)  # dataset_id -> file


@dataclass
class RunConfig:
    output_root: Path
    seeds: list[int]
    datasets: list[DatasetConfig]
    featurizer: FeaturizerConfig
    models: list[ModelConfig]
    agreement_mode: str = "correctness"

    def dataset(self, dataset_id: str) -> DatasetConfig:
        for ds in self.datasets:
            if ds.dataset_id == dataset_id:
                return ds
        raise UsageError(f"unknown dataset id: {dataset_id!r}")

    def model(self, model_id: str) -> ModelConfig:
        for m in self.models:
            if m.model_id == model_id:
                return m
        raise UsageError(f"unknown model id: {model_id!r}")


def _require(obj: dict, key: str, context: str):
    if key not in obj:
        raise UsageError(f"config: {context} is missing required key {key!r}")
    return obj[key]


def load_config(path: str | Path) -> RunConfig:
    """Parse and validate a run config; raises UsageError on any problem."""
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from exc

    base = path.parent

    def resolve(p: str) -> Path:
        q = Path(p)
        return q if q.is_absolute() else (base / q)

    seeds = obj.get("seeds", list(DEFAULT_SEEDS))
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) for s in seeds):
        raise UsageError("config: seeds must be a non-empty list of integers")

    datasets = []
    for dobj in _require(obj, "datasets", "run config"):
        ds_id = _require(dobj, "id", "dataset entry")
        ds_path = resolve(_require(dobj, "path", f"dataset {ds_id!r}"))
        if not ds_path.exists():
            raise UsageError(f"config: dataset {ds_id!r} path does not exist: {ds_path}")
        alphabet = _require(dobj, "label_alphabet", f"dataset {ds_id!r}")
        if not alphabet:
            raise UsageError(f"config: dataset {ds_id!r} has an empty label_alphabet")
        cleaning_obj = dobj.get("cleaning", {})
        chunking_obj = dobj.get("chunking", {})
        balance_obj = dobj.get("balance", {})
        split_obj = dobj.get("split", {})
        try:
            cleaning = CleaningConfig(
                strip_patterns=tuple(cleaning_obj.get("strip_patterns", CleaningConfig().strip_patterns)),
                collapse_whitespace=cleaning_obj.get("collapse_whitespace", True),
                lowercase=cleaning_obj.get("lowercase", False),
            )
            chunking = ChunkingConfig(
                char_limit=chunking_obj.get("char_limit", 1000),
                separator=chunking_obj.get("separator", " "),
                keep_short_tail=chunking_obj.get("keep_short_tail", True),
            )
            balance = BalanceConfig(
                level=balance_obj.get("level", "utterance"),
                seed=balance_obj.get("seed", 0),
            )
            split = SplitConfig(
                train_fraction=split_obj.get("train_fraction", 0.80),
                val_fraction=split_obj.get("val_fraction", 0.04),
                test_fraction=split_obj.get("test_fraction", 0.16),
                seed=split_obj.get("seed", 0),
            )
        except Exception as exc:
            raise UsageError(f"config: dataset {ds_id!r}: {exc}") from exc
        datasets.append(
            DatasetConfig(
                dataset_id=ds_id,
                path=ds_path,
                label_alphabet=list(alphabet),
                cleaning=cleaning,
                chunking=chunking,
                balance=balance,
                split=split,
            )
        )
    if len({d.dataset_id for d in datasets}) != len(datasets):
        raise UsageError("config: duplicate dataset ids")

    try:
        featurizer = FeaturizerConfig.from_dict(obj.get("featurizer", {}))
    except Exception as exc:
        raise UsageError(f"config: featurizer: {exc}") from exc

    models = []
    for mobj in _require(obj, "models", "run config"):
        model_id = _require(mobj, "id", "model entry")
        model_type = mobj.get("type", "baseline")
        if model_type not in ("baseline", "probe"):
            raise UsageError(f"config: model {model_id!r} has unknown type {model_type!r}")
        try:
            train = TrainConfig.from_dict(mobj.get("train", {}))
        except Exception as exc:
            raise UsageError(f"config: model {model_id!r} train config: {exc}") from exc
        embeddings = {}
        if model_type == "probe":
            emb_obj = _require(mobj, "embeddings", f"probe model {model_id!r}")
            if not emb_obj:
                raise UsageError(f"config: probe model {model_id!r} names no embedding files")
            embeddings = {ds: resolve(p) for ds, p in emb_obj.items()}
        models.append(
            ModelConfig(model_id=model_id, model_type=model_type, train=train, embeddings=embeddings)
        )
    if not models:
        raise UsageError("config: at least one model is required")
    if len({m.model_id for m in models}) != len(models):
        raise UsageError("config: duplicate model ids")

    mode = obj.get("agreement_mode", "correctness")
    if mode not in ("correctness", "labels"):
        raise UsageError(f"config: unknown agreement_mode {mode!r}")

    return RunConfig(
        output_root=resolve(obj.get("output_root", "out")),
        seeds=list(seeds),
        datasets=datasets,
        featurizer=featurizer,
        models=models,
        agreement_mode=mode,
    )
