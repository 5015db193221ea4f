"""Quantitative analyses over prediction traces.

All metric arithmetic is done with exact integer ratios (fractions.Fraction);
floats appear only at the dataclass boundary.  Balanced accuracy is the
unweighted mean of per-class recall over the classes present in the truth
column; macro precision and F1 average over every observed label with the
0/0 cases defined as 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from recipro.errors import DataError


@dataclass(frozen=True)
class TraceEntry:
    example_id: str
    truth: str
    predicted: str
    score: float


@dataclass
class PredictionTrace:
    model_id: str
    dataset_id: str
    entries: list[TraceEntry]

    def __post_init__(self):
        ids = [e.example_id for e in self.entries]
        if len(ids) != len(set(ids)):
            raise DataError(f"trace {self.model_id}/{self.dataset_id} has duplicate example_ids")

    def by_id(self) -> dict[str, TraceEntry]:
        return {e.example_id: e for e in self.entries}


@dataclass
class ConfusionMatrix:
    labels: list[str]
    counts: list[list[int]]  # rows = truth, columns = predicted

    @staticmethod
    def from_trace(trace: PredictionTrace) -> "ConfusionMatrix":
        labels = sorted({e.truth for e in trace.entries} | {e.predicted for e in trace.entries})
        index = {lab: i for i, lab in enumerate(labels)}
        counts = [[0] * len(labels) for _ in labels]
        for e in trace.entries:
            counts[index[e.truth]][index[e.predicted]] += 1
        return ConfusionMatrix(labels=labels, counts=counts)

    def total(self) -> int:
        return sum(sum(row) for row in self.counts)


@dataclass
class MetricsReport:
    balanced_accuracy: float
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    per_class_recall: dict[str, float]
    n_examples: int

    def to_dict(self) -> dict:
        return {
            "balanced_accuracy": self.balanced_accuracy,
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "per_class_recall": dict(sorted(self.per_class_recall.items())),
            "n_examples": self.n_examples,
        }

    @staticmethod
    def from_dict(obj: dict) -> "MetricsReport":
        return MetricsReport(
            balanced_accuracy=obj["balanced_accuracy"],
            accuracy=obj["accuracy"],
            macro_precision=obj["macro_precision"],
            macro_recall=obj["macro_recall"],
            macro_f1=obj["macro_f1"],
            per_class_recall=dict(obj["per_class_recall"]),
            n_examples=obj["n_examples"],
        )


@dataclass
class AgreementResult:
    model_pair: tuple[str, str]
    mode: str  # "correctness" | "labels"
    p_observed: float
    r_chance: float
    kappa: float | None  # None when chance agreement is 1 (degenerate)

    @property
    def degenerate(self) -> bool:
        return self.kappa is None

    def to_dict(self) -> dict:
        return {
            "model_i": self.model_pair[0],
            "model_j": self.model_pair[1],
            "mode": self.mode,
            "p_observed": self.p_observed,
            "r_chance": self.r_chance,
            "kappa": self.kappa,
            "degenerate": self.degenerate,
        }


def compute_metrics(trace: PredictionTrace) -> MetricsReport:
    """Confusion-matrix metrics with exact internal arithmetic."""
    if not trace.entries:
        raise DataError("compute_metrics: empty trace")
    cm = ConfusionMatrix.from_trace(trace)
    labels = cm.labels
    n = cm.total()
    correct = sum(cm.counts[i][i] for i in range(len(labels)))
    accuracy = Fraction(correct, n)

    recalls: dict[str, Fraction] = {}
    precisions: dict[str, Fraction] = {}
    f1s: dict[str, Fraction] = {}
    for i, lab in enumerate(labels):
        tp = cm.counts[i][i]
        truth_total = sum(cm.counts[i])
        pred_total = sum(row[i] for row in cm.counts)
        if truth_total > 0:
            recalls[lab] = Fraction(tp, truth_total)
        precision = Fraction(tp, pred_total) if pred_total > 0 else Fraction(0)
        precisions[lab] = precision
        recall_or_zero = recalls.get(lab, Fraction(0))
        denom = precision + recall_or_zero
        f1s[lab] = (2 * precision * recall_or_zero / denom) if denom > 0 else Fraction(0)

    balanced = sum(recalls.values()) / len(recalls)
    macro_precision = sum(precisions.values()) / len(labels)
    macro_f1 = sum(f1s.values()) / len(labels)
    return MetricsReport(
        balanced_accuracy=float(balanced),
        accuracy=float(accuracy),
        macro_precision=float(macro_precision),
        macro_recall=float(balanced),
        macro_f1=float(macro_f1),
        per_class_recall={lab: float(r) for lab, r in recalls.items()},
        n_examples=n,
    )


def per_class_gap(trace: PredictionTrace, class_a: str, class_b: str) -> float:
    """recall(class_a) - recall(class_b), as a fraction in [-1, 1].

    Reports multiply by 100 to show percentage points.
    """
    truths = {e.truth for e in trace.entries}
    for cls in (class_a, class_b):
        if cls not in truths:
            raise DataError(f"per_class_gap: class {cls!r} absent from trace truths")
    report = compute_metrics(trace)
    return report.per_class_recall[class_a] - report.per_class_recall[class_b]


def kappa(trace_i: PredictionTrace, trace_j: PredictionTrace, mode: str = "correctness") -> AgreementResult:
    """Chance-corrected agreement between two traces: (P - R) / (1 - R).

    mode="correctness" (default) binarizes each trace to correct/incorrect
    and measures agreement of those indicators; mode="labels" measures
    agreement of the predicted labels directly.  Chance agreement R comes
    from each model's marginal rates.  R = 1 yields a degenerate result
    with no kappa value.
    """
    if mode not in ("correctness", "labels"):
        raise DataError(f"unknown kappa mode: {mode!r}")
    ids_i = {e.example_id for e in trace_i.entries}
    ids_j = {e.example_id for e in trace_j.entries}
    if ids_i != ids_j:
        raise DataError(
            f"kappa: traces cover different example sets "
            f"({len(ids_i - ids_j)} only in first, {len(ids_j - ids_i)} only in second)"
        )
    if not ids_i:
        raise DataError("kappa: empty traces")
    by_i = trace_i.by_id()
    by_j = trace_j.by_id()
    ordered = sorted(ids_i)
    if mode == "correctness":
        out_i = [by_i[k].predicted == by_i[k].truth for k in ordered]
        out_j = [by_j[k].predicted == by_j[k].truth for k in ordered]
    else:
        out_i = [by_i[k].predicted for k in ordered]
        out_j = [by_j[k].predicted for k in ordered]

    n = len(ordered)
    p_obs = Fraction(sum(1 for a, b in zip(out_i, out_j) if a == b), n)
    categories = sorted(set(out_i) | set(out_j), key=str)
    r_chance = Fraction(0)
    for cat in categories:
        pi = Fraction(sum(1 for a in out_i if a == cat), n)
        pj = Fraction(sum(1 for b in out_j if b == cat), n)
        r_chance += pi * pj
    if r_chance == 1:
        return AgreementResult(
            model_pair=(trace_i.model_id, trace_j.model_id),
            mode=mode,
            p_observed=float(p_obs),
            r_chance=1.0,
            kappa=None,
        )
    k = (p_obs - r_chance) / (1 - r_chance)
    return AgreementResult(
        model_pair=(trace_i.model_id, trace_j.model_id),
        mode=mode,
        p_observed=float(p_obs),
        r_chance=float(r_chance),
        kappa=float(k),
    )


@dataclass
class TransferMatrix:
    """Metrics for every (train dataset, eval dataset) pair of one model
    family; cells that cannot be computed carry a reason instead."""

    model_id: str
    cells: dict[tuple[str, str], MetricsReport | None] = field(default_factory=dict)
    unavailable: dict[tuple[str, str], str] = field(default_factory=dict)

    def to_rows(self) -> list[dict]:
        rows = []
        for (train_ds, eval_ds), report in sorted(self.cells.items()):
            row = {"train_dataset": train_ds, "eval_dataset": eval_ds}
            if report is None:
                row["unavailable"] = self.unavailable.get((train_ds, eval_ds), "unavailable")
            else:
                row["metrics"] = report.to_dict()
            rows.append(row)
        return rows


def trace_from_predictions(model_id, dataset_id, examples, predictions) -> PredictionTrace:
    entries = [
        TraceEntry(example_id=ex.example_id, truth=ex.label, predicted=lab, score=score)
        for ex, (lab, score) in zip(examples, predictions)
    ]
    return PredictionTrace(model_id=model_id, dataset_id=dataset_id, entries=entries)


def transfer_eval(model_id: str, models: list, datasets: list) -> TransferMatrix:
    """Evaluate trained models on every dataset's test examples, no retraining.

    `models` holds (train_dataset_id, model, vectorizer) triples of one model
    family; `datasets` holds (dataset_id, examples) pairs.  A vectorizer maps
    an example to the model's feature space and reports which datasets it can
    serve (see recipro.vectorize).  Unservable cells are marked, not fatal.
    """
    from recipro import model as model_mod

    matrix = TransferMatrix(model_id=model_id)
    for train_ds, mdl, vectorizer in models:
        for eval_ds, examples in datasets:
            key = (train_ds, eval_ds)
            if not vectorizer.supports(eval_ds):
                matrix.cells[key] = None
                matrix.unavailable[key] = f"no features for dataset {eval_ds!r}"
                continue
            try:
                preds = [
                    model_mod.predict(mdl, vectorizer.vectorize(ex, eval_ds)) for ex in examples
                ]
            except DataError as exc:
                matrix.cells[key] = None
                matrix.unavailable[key] = str(exc)
                continue
            trace = trace_from_predictions(f"{train_ds}->{eval_ds}", eval_ds, examples, preds)
            matrix.cells[key] = compute_metrics(trace)
    return matrix


def aggregate(values: list[float]) -> tuple[float, float]:
    """Mean and sample standard deviation (n-1 denominator; 0.0 when n = 1)."""
    n = len(values)
    if n == 0:
        raise DataError("aggregate: no values")
    mean = sum(values) / n
    if n == 1:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var)


def write_trace(path: str | Path, trace: PredictionTrace) -> None:
    """Line-delimited trace records so analyses replay without models."""
    with open(path, "w", encoding="utf-8") as fh:
        for e in trace.entries:
            fh.write(
                json.dumps(
                    {
                        "model_id": trace.model_id,
                        "dataset_id": trace.dataset_id,
                        "example_id": e.example_id,
                        "truth": e.truth,
                        "predicted": e.predicted,
                        "score": e.score,
                    },
                    sort_keys=True,
                )
            )
            fh.write("\n")


def read_trace(path: str | Path) -> PredictionTrace:
    entries = []
    model_id = dataset_id = None
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                if model_id is None:
                    model_id, dataset_id = obj["model_id"], obj["dataset_id"]
                elif obj["model_id"] != model_id or obj["dataset_id"] != dataset_id:
                    raise DataError(f"{path}:{i}: mixed model/dataset ids in one trace")
                entries.append(
                    TraceEntry(
                        example_id=obj["example_id"],
                        truth=obj["truth"],
                        predicted=obj["predicted"],
                        score=obj["score"],
                    )
                )
            except (json.JSONDecodeError, KeyError) as exc:
                raise DataError(f"{path}:{i}: bad trace record: {exc}") from exc
    if model_id is None:
        raise DataError(f"{path}: empty trace file")
    return PredictionTrace(model_id=model_id, dataset_id=dataset_id, entries=entries)
