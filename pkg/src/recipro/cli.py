"""Command-line orchestration of the full experiment lifecycle.

Each subcommand is one stage: ingest -> stats/prepare -> train -> eval ->
transfer/agree -> report.  Stages are gated by content digests (inputs +
configs), so re-running with unchanged inputs is a no-op and re-running
after an upstream change refuses to use stale artifacts.  Logs go to
stderr (RECIPRO_LOG sets the level); data only ever goes to files under
the configured output root.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

from recipro import corpus as corpus_mod
from recipro import evaluation as eval_mod
from recipro import features as feat_mod
from recipro import model as model_mod
from recipro import pipeline as pipe_mod
from recipro import report as report_mod
from recipro.config import DatasetConfig, ModelConfig, RunConfig, load_config
from recipro.errors import DataError, ReciproError, UsageError
from recipro.vectorize import EmbeddingVectorizer, HashedVectorizer

log = logging.getLogger("recipro")

MANIFEST_NAME = "manifest.json"


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode("utf-8")).hexdigest()


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_manifest(stage_dir: Path, stage: str, digest: str, outputs: list[Path]) -> None:
    manifest = {
        "stage": stage,
        "digest": digest,
        "outputs": {p.name: _sha256_file(p) for p in sorted(outputs)},
    }
    _write_json(stage_dir / MANIFEST_NAME, manifest)


def _stage_current(stage_dir: Path, digest: str) -> bool:
    path = stage_dir / MANIFEST_NAME
    if not path.exists():
        return False
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError):
        return False
    if manifest.get("digest") != digest:
        return False
    for name, recorded in manifest.get("outputs", {}).items():
        out = stage_dir / name
        if not out.exists() or _sha256_file(out) != recorded:
            return False
    return True


def _require_fresh(stage_dir: Path, stage: str, expected_digest: str) -> None:
    """Refuse to consume a stage whose manifest is missing, whose inputs have
    changed since it ran, or whose outputs were modified on disk."""
    path = stage_dir / MANIFEST_NAME
    if not path.exists():
        raise UsageError(f"stage {stage!r} has not run yet (missing {path}); run it first")
    manifest = json.loads(path.read_text(encoding="utf-8"))
    if manifest.get("digest") != expected_digest:
        raise UsageError(f"stage {stage!r} is stale: its inputs or config changed; re-run it")
    for name, recorded in manifest.get("outputs", {}).items():
        out = stage_dir / name
        if not out.exists() or _sha256_file(out) != recorded:
            raise UsageError(f"stage {stage!r} is stale: output {name} was modified or removed; re-run it")


# ---------------------------------------------------------------------------
# Stage digests (chained, so upstream changes invalidate downstream stages)


def _ingest_digest(ds: DatasetConfig) -> str:
    return _digest(
        {
            "stage": "ingest",
            "dataset": ds.dataset_id,
            "corpus_sha256": _sha256_file(ds.path),
            "label_alphabet": sorted(ds.label_alphabet),
        }
    )


def _stats_digest(ds: DatasetConfig) -> str:
    return _digest(
        {
            "stage": "stats",
            "ingest": _ingest_digest(ds),
            "cleaning": ds.pipeline_dict()["cleaning"],
        }
    )


def _prepare_digest(ds: DatasetConfig) -> str:
    return _digest({"stage": "prepare", "ingest": _ingest_digest(ds), "pipeline": ds.pipeline_dict()})


def _train_digest(cfg: RunConfig, model: ModelConfig, ds: DatasetConfig, seed: int) -> str:
    body = {
        "stage": "train",
        "model": model.model_id,
        "type": model.model_type,
        "train": model.train.to_dict(),
        "seed": seed,
        "prepare": _prepare_digest(ds),
    }
    if model.model_type == "baseline":
        body["featurizer"] = cfg.featurizer.to_dict()
    else:
        emb = model.embeddings.get(ds.dataset_id)
        if emb is None:
            raise UsageError(
                f"probe model {model.model_id!r} has no embedding file for dataset {ds.dataset_id!r}"
            )
        if not emb.exists():
            raise UsageError(f"embedding file for {model.model_id!r}/{ds.dataset_id!r} missing: {emb}")
        body["embeddings_sha256"] = _sha256_file(emb)
    return _digest(body)


def _eval_digest(cfg: RunConfig, model: ModelConfig, ds: DatasetConfig, seed: int) -> str:
    return _digest(
        {
            "stage": "eval",
            "train": _train_digest(cfg, model, ds, seed),
            "prepare": _prepare_digest(ds),
        }
    )


def _transfer_digest(cfg: RunConfig, model: ModelConfig, seed: int) -> str:
    return _digest(
        {
            "stage": "transfer",
            "trains": {ds.dataset_id: _train_digest(cfg, model, ds, seed) for ds in _model_datasets(cfg, model)},
            "prepares": {ds.dataset_id: _prepare_digest(ds) for ds in cfg.datasets},
        }
    )


def _agree_digest(cfg: RunConfig, ds: DatasetConfig, seed: int) -> str:
    return _digest(
        {
            "stage": "agree",
            "mode": cfg.agreement_mode,
            "evals": {m.model_id: _eval_digest(cfg, m, ds, seed) for m in _dataset_models(cfg, ds)},
        }
    )


def _model_datasets(cfg: RunConfig, model: ModelConfig) -> list[DatasetConfig]:
    """Datasets a model trains on: all of them for baselines, the ones with
    embedding files for probes."""
    if model.model_type == "baseline":
        return list(cfg.datasets)
    return [ds for ds in cfg.datasets if ds.dataset_id in model.embeddings]


def _dataset_models(cfg: RunConfig, ds: DatasetConfig) -> list[ModelConfig]:
    return [m for m in cfg.models if ds.dataset_id in {d.dataset_id for d in _model_datasets(cfg, m)}]


# ---------------------------------------------------------------------------
# Directory layout


def _ingest_dir(cfg: RunConfig, ds_id: str) -> Path:
    return cfg.output_root / "ingest" / ds_id


def _stats_dir(cfg: RunConfig, ds_id: str) -> Path:
    return cfg.output_root / "stats" / ds_id


def _prepare_dir(cfg: RunConfig, ds_id: str) -> Path:
    return cfg.output_root / "prepare" / ds_id


def _train_dir(cfg: RunConfig, model_id: str, ds_id: str, seed: int) -> Path:
    return cfg.output_root / "train" / model_id / ds_id / f"seed{seed}"


def _eval_dir(cfg: RunConfig, model_id: str, ds_id: str, seed: int) -> Path:
    return cfg.output_root / "eval" / model_id / ds_id / f"seed{seed}"


def _transfer_dir(cfg: RunConfig, model_id: str, seed: int) -> Path:
    return cfg.output_root / "transfer" / model_id / f"seed{seed}"


def _agree_dir(cfg: RunConfig, ds_id: str, seed: int) -> Path:
    return cfg.output_root / "agree" / ds_id / f"seed{seed}"


# ---------------------------------------------------------------------------
# Stages


def cmd_ingest(cfg: RunConfig, only_dataset: str | None) -> None:
    for ds in cfg.datasets:
        if only_dataset and ds.dataset_id != only_dataset:
            continue
        stage_dir = _ingest_dir(cfg, ds.dataset_id)
        digest = _ingest_digest(ds)
        if _stage_current(stage_dir, digest):
            log.info("ingest %s: up to date", ds.dataset_id)
            continue
        stage_dir.mkdir(parents=True, exist_ok=True)
        result = corpus_mod.ingest(ds.path, ds.dataset_id, set(ds.label_alphabet))
        records_path = stage_dir / "records.jsonl"
        corpus_mod.write_records(records_path, result.records)
        report_path = stage_dir / "ingest_report.json"
        _write_json(report_path, result.report.to_dict())
        _write_manifest(stage_dir, "ingest", digest, [records_path, report_path])
        log.info(
            "ingest %s: %d accepted, %d rejected (%s)",
            ds.dataset_id,
            result.report.accepted,
            result.report.rejected_total,
            ", ".join(f"{k}={v}" for k, v in sorted(result.report.rejected.items())) or "none",
        )


def _read_ingested(cfg: RunConfig, ds: DatasetConfig) -> list:
    stage_dir = _ingest_dir(cfg, ds.dataset_id)
    _require_fresh(stage_dir, f"ingest:{ds.dataset_id}", _ingest_digest(ds))
    result = corpus_mod.ingest(stage_dir / "records.jsonl", ds.dataset_id, set(ds.label_alphabet))
    if result.report.rejected_total:
        raise DataError(
            f"ingested records for {ds.dataset_id!r} no longer parse cleanly; re-run ingest"
        )
    return result.records


def cmd_stats(cfg: RunConfig, only_dataset: str | None) -> None:
    for ds in cfg.datasets:
        if only_dataset and ds.dataset_id != only_dataset:
            continue
        stage_dir = _stats_dir(cfg, ds.dataset_id)
        digest = _stats_digest(ds)
        if _stage_current(stage_dir, digest):
            log.info("stats %s: up to date", ds.dataset_id)
            continue
        records = _read_ingested(cfg, ds)
        cleaned, dropped = corpus_mod.clean_records(records, ds.cleaning)
        stats = corpus_mod.corpus_stats(cleaned)
        rows = stats.to_rows() + [("dropped_empty_after_cleaning", str(dropped))]
        stage_dir.mkdir(parents=True, exist_ok=True)
        csv_path = stage_dir / "stats.csv"
        csv_path.write_text(
            "key,value\n" + "".join(f"{k},{v}\n" for k, v in rows), encoding="utf-8"
        )
        txt_path = stage_dir / "stats.txt"
        width = max(len(k) for k, _ in rows)
        txt_path.write_text(
            f"dataset: {ds.dataset_id}\n"
            + "".join(f"{k.ljust(width)}  {v}\n" for k, v in rows),
            encoding="utf-8",
        )
        _write_manifest(stage_dir, "stats", digest, [csv_path, txt_path])
        log.info("stats %s: %d utterances, %d recipients", ds.dataset_id, stats.utterance_count, stats.recipient_count)


def cmd_prepare(cfg: RunConfig, only_dataset: str | None) -> None:
    for ds in cfg.datasets:
        if only_dataset and ds.dataset_id != only_dataset:
            continue
        stage_dir = _prepare_dir(cfg, ds.dataset_id)
        digest = _prepare_digest(ds)
        if _stage_current(stage_dir, digest):
            log.info("prepare %s: up to date", ds.dataset_id)
            continue
        records = _read_ingested(cfg, ds)
        cleaned, dropped_empty = corpus_mod.clean_records(records, ds.cleaning)
        labeled = corpus_mod.filter_labeled(cleaned)
        dropped_unlabeled = len(cleaned) - len(labeled)
        chunks = pipe_mod.chunk_utterances(labeled, ds.chunking)
        balanced = pipe_mod.balance_classes(chunks, ds.balance)
        assignment, (train_ex, val_ex, test_ex) = pipe_mod.split_by_recipient(balanced, ds.split)
        verify = pipe_mod.verify_split(assignment, balanced)
        if not verify.ok:
            raise DataError(
                f"prepare {ds.dataset_id}: split verification failed: "
                f"overlap={verify.overlap} unassigned={verify.unassigned_recipients}"
            )

        stage_dir.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, examples in (("train", train_ex), ("val", val_ex), ("test", test_ex)):
            p = stage_dir / f"{name}.jsonl"
            pipe_mod.write_examples(p, examples)
            paths.append(p)
        split_manifest = stage_dir / "split_manifest.json"
        _write_json(
            split_manifest,
            {
                "dataset": ds.dataset_id,
                "seed": ds.split.seed,
                "fractions": list(ds.split.fractions),
                "config_digest": digest,
                "recipients": assignment.lists(),
            },
        )
        paths.append(split_manifest)

        labels_sorted = sorted({ex.label for ex in balanced})
        per_label = {
            lab: sum(1 for ex in balanced if ex.label == lab) for lab in labels_sorted
        }
        recipients_per_label = {
            lab: len({ex.recipient_id for ex in balanced if ex.label == lab})
            for lab in labels_sorted
        }
        mean_chars = (
            sum(ex.char_length for ex in chunks) / len(chunks) if chunks else 0.0
        )
        prepare_report = stage_dir / "prepare_report.json"
        _write_json(
            prepare_report,
            {
                "records": len(records),
                "dropped_empty_after_cleaning": dropped_empty,
                "dropped_unlabeled": dropped_unlabeled,
                "chunks": len(chunks),
                "mean_chunk_chars": mean_chars,
                "balanced_examples": len(balanced),
                "examples_per_label": per_label,
                "recipients_per_label": recipients_per_label,
                "split": verify.to_dict(),
            },
        )
        paths.append(prepare_report)
        _write_manifest(stage_dir, "prepare", digest, paths)
        log.info(
            "prepare %s: %d chunks -> %d balanced; recipients %s",
            ds.dataset_id,
            len(chunks),
            len(balanced),
            verify.recipient_counts,
        )


def _seeds(cfg: RunConfig, only_seed: int | None) -> list[int]:
    if only_seed is None:
        return cfg.seeds
    return [only_seed]


def _load_prepared(cfg: RunConfig, ds: DatasetConfig, split: str) -> list:
    stage_dir = _prepare_dir(cfg, ds.dataset_id)
    _require_fresh(stage_dir, f"prepare:{ds.dataset_id}", _prepare_digest(ds))
    return pipe_mod.read_examples(stage_dir / f"{split}.jsonl")


def cmd_train(cfg: RunConfig, only_dataset: str | None, only_model: str | None, only_seed: int | None) -> None:
    for model in cfg.models:
        if only_model and model.model_id != only_model:
            continue
        for ds in _model_datasets(cfg, model):
            if only_dataset and ds.dataset_id != only_dataset:
                continue
            for seed in _seeds(cfg, only_seed):
                stage_dir = _train_dir(cfg, model.model_id, ds.dataset_id, seed)
                digest = _train_digest(cfg, model, ds, seed)
                if _stage_current(stage_dir, digest):
                    log.info("train %s/%s seed %d: up to date", model.model_id, ds.dataset_id, seed)
                    continue
                train_examples = _load_prepared(cfg, ds, "train")
                if not train_examples:
                    raise DataError(f"no training examples for {ds.dataset_id!r}")
                stage_dir.mkdir(parents=True, exist_ok=True)
                train_cfg = model_mod.TrainConfig.from_dict({**model.train.to_dict(), "seed": seed})
                outputs = []
                meta = {"model_id": model.model_id, "train_dataset": ds.dataset_id}
                if model.model_type == "baseline":
                    featurizer = feat_mod.fit(
                        [ex.text for ex in train_examples],
                        cfg.featurizer,
                        fitted_on=_prepare_digest(ds),
                    )
                    feat_path = stage_dir / "featurizer.rpfeat"
                    feat_mod.save_featurizer(featurizer, feat_path)
                    outputs.append(feat_path)
                    vectors = [featurizer.featurize(ex.text) for ex in train_examples]
                    trained = model_mod.train_hashed(
                        vectors,
                        [ex.label for ex in train_examples],
                        train_cfg,
                        cfg.featurizer.digest(),
                        cfg.featurizer.hash_dims,
                    )
                else:
                    table = model_mod.read_embeddings(
                        model.embeddings[ds.dataset_id], source_model=model.model_id
                    )
                    labels = {ex.example_id: ex.label for ex in train_examples}
                    trained = model_mod.train_probe(table, labels, train_cfg)
                trained.train_meta.update(meta)
                model_path = stage_dir / "model.rpmod"
                model_mod.save(trained, model_path)
                outputs.append(model_path)
                _write_manifest(stage_dir, "train", digest, outputs)
                log.info(
                    "train %s/%s seed %d: final loss %.6f",
                    model.model_id,
                    ds.dataset_id,
                    seed,
                    trained.train_meta["loss_history"][-1],
                )


def _load_model(cfg: RunConfig, model: ModelConfig, ds: DatasetConfig, seed: int):
    stage_dir = _train_dir(cfg, model.model_id, ds.dataset_id, seed)
    _require_fresh(
        stage_dir, f"train:{model.model_id}/{ds.dataset_id}/seed{seed}", _train_digest(cfg, model, ds, seed)
    )
    trained = model_mod.load(stage_dir / "model.rpmod")
    if model.model_type == "baseline":
        featurizer = feat_mod.load_featurizer(stage_dir / "featurizer.rpfeat")
        vectorizer = HashedVectorizer(featurizer)
    else:
        tables = {
            ds_id: model_mod.read_embeddings(path, source_model=model.model_id)
            for ds_id, path in model.embeddings.items()
            if path.exists()
        }
        vectorizer = EmbeddingVectorizer(tables)
    return trained, vectorizer


def _predict_trace(trained, vectorizer, model_id, ds_id, examples) -> eval_mod.PredictionTrace:
    predictions = [
        model_mod.predict(trained, vectorizer.vectorize(ex, ds_id)) for ex in examples
    ]
    return eval_mod.trace_from_predictions(model_id, ds_id, examples, predictions)


def cmd_eval(cfg: RunConfig, only_dataset: str | None, only_model: str | None, only_seed: int | None) -> None:
    for model in cfg.models:
        if only_model and model.model_id != only_model:
            continue
        for ds in _model_datasets(cfg, model):
            if only_dataset and ds.dataset_id != only_dataset:
                continue
            for seed in _seeds(cfg, only_seed):
                stage_dir = _eval_dir(cfg, model.model_id, ds.dataset_id, seed)
                digest = _eval_digest(cfg, model, ds, seed)
                if _stage_current(stage_dir, digest):
                    log.info("eval %s/%s seed %d: up to date", model.model_id, ds.dataset_id, seed)
                    continue
                trained, vectorizer = _load_model(cfg, model, ds, seed)
                test_examples = _load_prepared(cfg, ds, "test")
                if not test_examples:
                    raise DataError(f"no test examples for {ds.dataset_id!r}")
                trace = _predict_trace(trained, vectorizer, model.model_id, ds.dataset_id, test_examples)
                report = eval_mod.compute_metrics(trace)
                gap = None
                alphabet = sorted(ds.label_alphabet)
                truths = {e.truth for e in trace.entries}
                if len(alphabet) == 2 and set(alphabet) <= truths:
                    gap = {
                        "class_a": alphabet[0],
                        "class_b": alphabet[1],
                        "gap": eval_mod.per_class_gap(trace, alphabet[0], alphabet[1]),
                    }
                stage_dir.mkdir(parents=True, exist_ok=True)
                trace_path = stage_dir / "trace.jsonl"
                eval_mod.write_trace(trace_path, trace)
                metrics_path = stage_dir / "metrics.json"
                _write_json(metrics_path, {"metrics": report.to_dict(), "per_class_gap": gap})
                _write_manifest(stage_dir, "eval", digest, [trace_path, metrics_path])
                log.info(
                    "eval %s/%s seed %d: balanced accuracy %.4f",
                    model.model_id,
                    ds.dataset_id,
                    seed,
                    report.balanced_accuracy,
                )


def cmd_transfer(cfg: RunConfig, only_model: str | None, only_seed: int | None) -> None:
    for model in cfg.models:
        if only_model and model.model_id != only_model:
            continue
        for seed in _seeds(cfg, only_seed):
            stage_dir = _transfer_dir(cfg, model.model_id, seed)
            digest = _transfer_digest(cfg, model, seed)
            if _stage_current(stage_dir, digest):
                log.info("transfer %s seed %d: up to date", model.model_id, seed)
                continue
            entries = []
            for ds in _model_datasets(cfg, model):
                trained, vectorizer = _load_model(cfg, model, ds, seed)
                entries.append((ds.dataset_id, trained, vectorizer))
            datasets = [(ds.dataset_id, _load_prepared(cfg, ds, "test")) for ds in cfg.datasets]
            matrix = eval_mod.transfer_eval(model.model_id, entries, datasets)
            stage_dir.mkdir(parents=True, exist_ok=True)
            out_path = stage_dir / "transfer.json"
            _write_json(out_path, {"model": model.model_id, "seed": seed, "cells": matrix.to_rows()})
            _write_manifest(stage_dir, "transfer", digest, [out_path])
            log.info("transfer %s seed %d: %d cells", model.model_id, seed, len(matrix.cells))


def cmd_agree(cfg: RunConfig, only_dataset: str | None, only_seed: int | None) -> None:
    for ds in cfg.datasets:
        if only_dataset and ds.dataset_id != only_dataset:
            continue
        models = _dataset_models(cfg, ds)
        if len(models) < 2:
            log.info("agree %s: fewer than two models, skipping", ds.dataset_id)
            continue
        for seed in _seeds(cfg, only_seed):
            stage_dir = _agree_dir(cfg, ds.dataset_id, seed)
            digest = _agree_digest(cfg, ds, seed)
            if _stage_current(stage_dir, digest):
                log.info("agree %s seed %d: up to date", ds.dataset_id, seed)
                continue
            traces = {}
            for model in models:
                eval_dir = _eval_dir(cfg, model.model_id, ds.dataset_id, seed)
                _require_fresh(
                    eval_dir,
                    f"eval:{model.model_id}/{ds.dataset_id}/seed{seed}",
                    _eval_digest(cfg, model, ds, seed),
                )
                traces[model.model_id] = eval_mod.read_trace(eval_dir / "trace.jsonl")
            results = []
            names = sorted(traces)
            for i, a in enumerate(names):
                for b in names[i + 1 :]:
                    results.append(eval_mod.kappa(traces[a], traces[b], cfg.agreement_mode))
            stage_dir.mkdir(parents=True, exist_ok=True)
            out_path = stage_dir / "agreement.json"
            _write_json(
                out_path,
                {"dataset": ds.dataset_id, "seed": seed, "results": [r.to_dict() for r in results]},
            )
            _write_manifest(stage_dir, "agree", digest, [out_path])
            log.info("agree %s seed %d: %d pairs", ds.dataset_id, seed, len(results))


def cmd_report(cfg: RunConfig) -> None:
    artifacts = report_mod.RunArtifacts()
    for model in cfg.models:
        for ds in _model_datasets(cfg, model):
            for seed in cfg.seeds:
                eval_dir = _eval_dir(cfg, model.model_id, ds.dataset_id, seed)
                metrics_path = eval_dir / "metrics.json"
                if not metrics_path.exists():
                    continue
                obj = json.loads(metrics_path.read_text(encoding="utf-8"))
                key = (model.model_id, ds.dataset_id, seed)
                artifacts.metrics[key] = eval_mod.MetricsReport.from_dict(obj["metrics"])
                if obj.get("per_class_gap"):
                    artifacts.gaps[key] = obj["per_class_gap"]
        for seed in cfg.seeds:
            transfer_path = _transfer_dir(cfg, model.model_id, seed) / "transfer.json"
            if not transfer_path.exists():
                continue
            obj = json.loads(transfer_path.read_text(encoding="utf-8"))
            matrix = eval_mod.TransferMatrix(model_id=model.model_id)
            for row in obj["cells"]:
                key2 = (row["train_dataset"], row["eval_dataset"])
                if "metrics" in row:
                    matrix.cells[key2] = eval_mod.MetricsReport.from_dict(row["metrics"])
                else:
                    matrix.cells[key2] = None
                    matrix.unavailable[key2] = row.get("unavailable", "unavailable")
            artifacts.transfer[(model.model_id, seed)] = matrix
    for ds in cfg.datasets:
        for seed in cfg.seeds:
            agree_path = _agree_dir(cfg, ds.dataset_id, seed) / "agreement.json"
            if not agree_path.exists():
                continue
            obj = json.loads(agree_path.read_text(encoding="utf-8"))
            for row in obj["results"]:
                artifacts.agreements.append(
                    (
                        ds.dataset_id,
                        seed,
                        eval_mod.AgreementResult(
                            model_pair=(row["model_i"], row["model_j"]),
                            mode=row["mode"],
                            p_observed=row["p_observed"],
                            r_chance=row["r_chance"],
                            kappa=row["kappa"],
                        ),
                    )
                )
        rows: list[tuple[str, str]] = []
        stats_csv = _stats_dir(cfg, ds.dataset_id) / "stats.csv"
        if stats_csv.exists():
            for line in stats_csv.read_text(encoding="utf-8").splitlines()[1:]:
                key_str, _, value = line.partition(",")
                rows.append((key_str, value))
        prep_path = _prepare_dir(cfg, ds.dataset_id) / "prepare_report.json"
        if prep_path.exists():
            prep = json.loads(prep_path.read_text(encoding="utf-8"))
            rows.append(("chunks", str(prep["chunks"])))
            rows.append(("mean_chunk_chars", f"{prep['mean_chunk_chars']:.2f}"))
            rows.append(("balanced_examples", str(prep["balanced_examples"])))
            for lab, count in sorted(prep["examples_per_label"].items()):
                rows.append((f"balanced_examples[{lab}]", str(count)))
            for lab, count in sorted(prep["recipients_per_label"].items()):
                rows.append((f"balanced_recipients[{lab}]", str(count)))
            for split_name, count in sorted(prep["split"]["recipient_counts"].items()):
                rows.append((f"recipients_{split_name}", str(count)))
            for split_name, count in sorted(prep["split"]["example_counts"].items()):
                rows.append((f"examples_{split_name}", str(count)))
        if rows:
            artifacts.dataset_stats[ds.dataset_id] = rows

    if not artifacts.metrics and not artifacts.dataset_stats:
        raise UsageError("report: nothing to report; run eval/stats stages first")
    report_dir = cfg.output_root / "report"
    report_dir.mkdir(parents=True, exist_ok=True)
    written = report_mod.emit_tables(artifacts, report_dir)
    written += report_mod.emit_charts(artifacts, report_dir)
    written.append(report_mod.emit_summary(artifacts, report_dir))
    digest = _digest({"stage": "report", "outputs": sorted(str(p) for p in written)})
    manifest = {
        "stage": "report",
        "digest": digest,
        "outputs": {str(p.relative_to(report_dir)): _sha256_file(p) for p in sorted(written)},
    }
    _write_json(report_dir / MANIFEST_NAME, manifest)
    log.info("report: wrote %d files under %s", len(written) + 1, report_dir)


# ---------------------------------------------------------------------------
# Entry point


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="recipro",
        description="Recipient-profiling experiment toolchain",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "ingest": "validate corpora into canonical record files",
        "stats": "corpus statistics tables",
        "prepare": "clean, chunk, balance, and split into example sets",
        "train": "train classifiers per model/dataset/seed",
        "eval": "evaluate on held-out test sets, writing traces and metrics",
        "transfer": "cross-dataset evaluation of trained models",
        "agree": "pairwise model agreement (kappa) per dataset",
        "report": "render tables, charts, and the summary",
    }
    for name, help_text in specs.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the run config (JSON)")
        p.add_argument("--out", help="override the configured output root")
        if name in ("ingest", "stats", "prepare", "eval", "agree"):
            p.add_argument("--dataset", help="restrict to one dataset id")
        if name == "train":
            p.add_argument("--dataset", help="restrict to one dataset id")
        if name in ("train", "eval", "transfer"):
            p.add_argument("--model", help="restrict to one model id")
            p.add_argument("--seed", type=int, help="restrict to one seed")
        if name == "agree":
            p.add_argument("--seed", type=int, help="restrict to one seed")
    return parser


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("RECIPRO_LOG", "info").upper()
    logging.basicConfig(
        stream=sys.stderr,
        level=getattr(logging, level, logging.INFO),
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if getattr(args, "out", None):
            cfg.output_root = Path(args.out)
        dataset = getattr(args, "dataset", None)
        model = getattr(args, "model", None)
        seed = getattr(args, "seed", None)
        if dataset:
            cfg.dataset(dataset)  # validate the id early
        if model:
            cfg.model(model)
        if args.command == "ingest":
            cmd_ingest(cfg, dataset)
        elif args.command == "stats":
            cmd_stats(cfg, dataset)
        elif args.command == "prepare":
            cmd_prepare(cfg, dataset)
        elif args.command == "train":
            cmd_train(cfg, dataset, model, seed)
        elif args.command == "eval":
            cmd_eval(cfg, dataset, model, seed)
        elif args.command == "transfer":
            cmd_transfer(cfg, model, seed)
        elif args.command == "agree":
            cmd_agree(cfg, dataset, seed)
        elif args.command == "report":
            cmd_report(cfg)
    except ReciproError as exc:
        log.error("%s", exc)
        return exc.exit_code
    except Exception:  # internal error
        log.exception("internal error")
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
