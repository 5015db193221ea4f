"""Record-to-example pipeline: concatenation, class balancing, grouped split.

Stage order in the driver is fixed: clean -> chunk -> balance -> split.
Balancing precedes splitting so per-split class mixture is whatever the
recipient assignment produces (it is reported, not enforced).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from recipro.errors import DataError
from recipro.corpus import UtteranceRecord
from recipro.rng import SplitMix64, derive_seed

SPLIT_NAMES = ("train", "val", "test")


@dataclass
class ProfilingExample:
    """A concatenated chunk of utterances for one (conversation, author,
    recipient) group; the classifier's input unit."""

    example_id: str
    dataset_id: str
    recipient_id: str
    label: str
    text: str
    source_turns: list[int]
    char_length: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "example_id": self.example_id,
                "dataset_id": self.dataset_id,
                "recipient_id": self.recipient_id,
                "label": self.label,
                "text": self.text,
                "source_turns": self.source_turns,
                "char_length": self.char_length,
            },
            ensure_ascii=False,
            sort_keys=True,
        )

    @staticmethod
    def from_dict(obj: dict) -> "ProfilingExample":
        return ProfilingExample(
            example_id=obj["example_id"],
            dataset_id=obj["dataset_id"],
            recipient_id=obj["recipient_id"],
            label=obj["label"],
            text=obj["text"],
            source_turns=list(obj["source_turns"]),
            char_length=obj["char_length"],
        )


@dataclass(frozen=True)
class ChunkingConfig:
    char_limit: int = 1000
    separator: str = " "
    keep_short_tail: bool = True

    def __post_init__(self):
        if self.char_limit < 1:
            raise DataError("char_limit must be >= 1")


@dataclass(frozen=True)
class BalanceConfig:
    level: str = "utterance"  # "utterance" (per-example) or "recipient"
    seed: int = 0

    def __post_init__(self):
        if self.level not in ("utterance", "recipient"):
            raise DataError(f"unknown balance level: {self.level!r}")


@dataclass(frozen=True)
class SplitConfig:
    train_fraction: float = 0.80
    val_fraction: float = 0.04
    test_fraction: float = 0.16
    seed: int = 0

    def __post_init__(self):
        fractions = (self.train_fraction, self.val_fraction, self.test_fraction)
        if any(f < 0 for f in fractions):
            raise DataError("split fractions must be non-negative")
        if abs(sum(fractions) - 1.0) > 1e-9:
            raise DataError(f"split fractions must sum to 1, got {sum(fractions)!r}")

    @property
    def fractions(self) -> tuple[float, float, float]:
        return (self.train_fraction, self.val_fraction, self.test_fraction)


@dataclass
class SplitAssignment:
    """Per-split recipient lists; the persisted form of the group split."""

    train: list[str]
    val: list[str]
    test: list[str]

    def lists(self) -> dict[str, list[str]]:
        return {"train": self.train, "val": self.val, "test": self.test}

    def as_map(self) -> dict[str, str]:
        mapping: dict[str, str] = {}
        for name, recipients in self.lists().items():
            for r in recipients:
                mapping[r] = name
        return mapping


@dataclass
class SplitReport:
    overlap: list[str]
    recipient_counts: dict[str, int]
    example_counts: dict[str, int]
    label_mixture: dict[str, dict[str, int]]
    unassigned_recipients: list[str]

    @property
    def ok(self) -> bool:
        return not self.overlap and not self.unassigned_recipients

    def to_dict(self) -> dict:
        return {
            "overlap": self.overlap,
            "recipient_counts": self.recipient_counts,
            "example_counts": self.example_counts,
            "label_mixture": self.label_mixture,
            "unassigned_recipients": self.unassigned_recipients,
            "ok": self.ok,
        }


def chunk_utterances(
    records: list[UtteranceRecord], cfg: ChunkingConfig | None = None
) -> list[ProfilingExample]:
    """Greedy concatenation of a group's utterances into chunks.

    Groups are (dataset, conversation, author, recipient), ordered by first
    appearance; within a group, utterances are taken in turn order and
    appended to the open chunk, which is emitted as soon as its length
    reaches the limit.  An under-limit tail chunk survives only with
    keep_short_tail.  Joining a group's chunks with the separator exactly
    reproduces the separator-joined group text.
    """
    cfg = cfg or ChunkingConfig()
    groups: dict[tuple[str, str, str, str], list[UtteranceRecord]] = {}
    order: list[tuple[str, str, str, str]] = []
    for rec in records:
        if rec.recipient_label is None:
            raise DataError("chunk_utterances requires labeled records")
        key = (rec.dataset_id, rec.conversation_id, rec.author_id, rec.recipient_id)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(rec)

    out: list[ProfilingExample] = []
    for key in order:
        dataset_id, conversation_id, author_id, recipient_id = key
        group = sorted(groups[key], key=lambda r: r.turn_index)
        label = group[0].recipient_label
        seq = 0
        parts: list[str] = []
        turns: list[int] = []
        length = 0

        def emit():
            nonlocal seq, parts, turns, length
            out.append(
                ProfilingExample(
                    example_id=(
                        f"{dataset_id}:{conversation_id}:{author_id}>{recipient_id}:{seq:04d}"
                    ),
                    dataset_id=dataset_id,
                    recipient_id=recipient_id,
                    label=label,
                    text=cfg.separator.join(parts),
                    source_turns=turns,
                    char_length=length,
                )
            )
            seq += 1
            parts, turns, length = [], [], 0

        for rec in group:
            if parts:
                length += len(cfg.separator) + len(rec.text)
            else:
                length = len(rec.text)
            parts.append(rec.text)
            turns.append(rec.turn_index)
            if length >= cfg.char_limit:
                emit()
        if parts and cfg.keep_short_tail:
            emit()
    return out


def balance_classes(
    examples: list[ProfilingExample], cfg: BalanceConfig
) -> list[ProfilingExample]:
    """Subsample over-represented classes down to the smallest class.

    level="utterance" equalizes per-label example counts; level="recipient"
    drops uniformly chosen whole recipients of over-represented labels until
    per-label recipient counts match, keeping all examples of survivors.
    Selection is a pure function of the seed; output preserves input order.
    """
    labels = sorted({ex.label for ex in examples})
    if len(labels) < 2:
        raise DataError("degenerate_class: balancing needs at least two labels with examples")

    keep: set[int]
    if cfg.level == "utterance":
        by_label: dict[str, list[int]] = {lab: [] for lab in labels}
        for i, ex in enumerate(examples):
            by_label[ex.label].append(i)
        target = min(len(v) for v in by_label.values())
        keep = set()
        for lab in labels:
            idxs = list(by_label[lab])
            if len(idxs) > target:
                rng = SplitMix64(derive_seed(cfg.seed, f"balance:{lab}"))
                rng.shuffle(idxs)
                idxs = idxs[:target]
            keep.update(idxs)
    else:
        label_of: dict[str, str] = {}
        for ex in examples:
            prev = label_of.setdefault(ex.recipient_id, ex.label)
            if prev != ex.label:
                raise DataError(
                    f"recipient {ex.recipient_id!r} carries conflicting labels "
                    f"{prev!r} and {ex.label!r}"
                )
        by_label_r: dict[str, list[str]] = {lab: [] for lab in labels}
        for rid in sorted(label_of):
            by_label_r[label_of[rid]].append(rid)
        target = min(len(v) for v in by_label_r.values())
        survivors: set[str] = set()
        for lab in labels:
            rids = list(by_label_r[lab])
            if len(rids) > target:
                rng = SplitMix64(derive_seed(cfg.seed, f"balance:{lab}"))
                rng.shuffle(rids)
                rids = rids[:target]
            survivors.update(rids)
        keep = {i for i, ex in enumerate(examples) if ex.recipient_id in survivors}

    return [ex for i, ex in enumerate(examples) if i in keep]


def split_sizes(n: int, fractions: tuple[float, float, float]) -> tuple[int, int, int]:
    """Largest-remainder split sizes with a one-recipient floor per split.

    Quotas n*f are floored (never below 1); leftover recipients go to the
    largest fractional remainders (ties favor earlier splits); if the floors
    overshoot n, the currently largest split shrinks (ties favor later
    splits).  Requires n >= 3 so every split can be non-empty.
    """
    if n < 3:
        raise DataError("too_few_groups: need at least 3 recipients to split")
    quotas = [n * f for f in fractions]
    sizes = [max(1, int(q)) for q in quotas]
    rest = n - sum(sizes)
    if rest > 0:
        remainders = sorted(
            range(3), key=lambda i: (-(quotas[i] - int(quotas[i])), i)
        )
        j = 0
        while rest > 0:
            sizes[remainders[j % 3]] += 1
            rest -= 1
            j += 1
    while rest < 0:
        largest = max(range(3), key=lambda i: (sizes[i], i))
        sizes[largest] -= 1
        rest += 1
    return sizes[0], sizes[1], sizes[2]


def split_by_recipient(
    examples: list[ProfilingExample], cfg: SplitConfig
) -> tuple[SplitAssignment, tuple[list[ProfilingExample], ...]]:
    """Recipient-grouped split: shuffle the sorted recipient set by seed and
    cut it at the largest-remainder sizes, then route every example to its
    recipient's split.  Depends only on (recipient set, seed, fractions)."""
    recipients = sorted({ex.recipient_id for ex in examples})
    n_train, n_val, n_test = split_sizes(len(recipients), cfg.fractions)
    rng = SplitMix64(derive_seed(cfg.seed, "split"))
    shuffled = list(recipients)
    rng.shuffle(shuffled)
    assignment = SplitAssignment(
        train=sorted(shuffled[:n_train]),
        val=sorted(shuffled[n_train : n_train + n_val]),
        test=sorted(shuffled[n_train + n_val :]),
    )
    where = assignment.as_map()
    buckets: dict[str, list[ProfilingExample]] = {name: [] for name in SPLIT_NAMES}
    for ex in examples:
        buckets[where[ex.recipient_id]].append(ex)
    return assignment, (buckets["train"], buckets["val"], buckets["test"])


def verify_split(
    assignment: SplitAssignment, examples: list[ProfilingExample]
) -> SplitReport:
    """Diagnostics for a split: recipient overlap (must be zero), sizes, and
    per-split label mixture.  Violations are reported, not raised."""
    seen: dict[str, list[str]] = {}
    for name, recipients in assignment.lists().items():
        for r in recipients:
            seen.setdefault(r, []).append(name)
    overlap = sorted(r for r, names in seen.items() if len(names) > 1)

    where = {}
    for name, recipients in assignment.lists().items():
        for r in recipients:
            where.setdefault(r, name)
    example_counts = {name: 0 for name in SPLIT_NAMES}
    label_mixture: dict[str, dict[str, int]] = {name: {} for name in SPLIT_NAMES}
    unassigned: set[str] = set()
    for ex in examples:
        split = where.get(ex.recipient_id)
        if split is None:
            unassigned.add(ex.recipient_id)
            continue
        example_counts[split] += 1
        mix = label_mixture[split]
        mix[ex.label] = mix.get(ex.label, 0) + 1
    return SplitReport(
        overlap=overlap,
        recipient_counts={name: len(lst) for name, lst in assignment.lists().items()},
        example_counts=example_counts,
        label_mixture={k: dict(sorted(v.items())) for k, v in label_mixture.items()},
        unassigned_recipients=sorted(unassigned),
    )


def write_examples(path: str | Path, examples: list[ProfilingExample]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(ex.to_json())
            fh.write("\n")


def read_examples(path: str | Path) -> list[ProfilingExample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(ProfilingExample.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError) as exc:
                raise DataError(f"{path}:{i}: bad example record: {exc}") from exc
    return out
