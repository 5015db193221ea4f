"""Conversation-corpus ingestion, cleaning, and statistics.

The canonical ingestion format is one JSON object per line (UTF-8) with the
keys of :class:`UtteranceRecord`; optional fields are omitted rather than
null.  Converters from the original corpus layouts to this format are
distribution scripts, not part of the toolkit.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from recipro.errors import DataError

# Default annotation-token patterns: brace-, angle-, and bracket-delimited
# tags as found in dialog-act transcripts.  Fully configurable because tag
# inventories differ per corpus.
DEFAULT_STRIP_PATTERNS = (
    r"\{[^{}]*\}",
    r"<[^<>]*>",
    r"\[[^\[\]]*\]",
)

_REQUIRED_FIELDS = ("conversation_id", "turn_index", "author_id", "recipient_id", "text")


@dataclass
class UtteranceRecord:
    """One directed message: author -> recipient, with optional labels."""

    dataset_id: str
    conversation_id: str
    turn_index: int
    author_id: str
    recipient_id: str
    text: str
    recipient_label: str | None = None
    author_label: str | None = None

    def to_json(self) -> str:
        obj = {
            "conversation_id": self.conversation_id,
            "turn_index": self.turn_index,
            "author_id": self.author_id,
            "recipient_id": self.recipient_id,
            "text": self.text,
        }
        if self.recipient_label is not None:
            obj["recipient_label"] = self.recipient_label
        if self.author_label is not None:
            obj["author_label"] = self.author_label
        return json.dumps(obj, ensure_ascii=False, sort_keys=True)


@dataclass(frozen=True)
class CleaningConfig:
    """Text cleaning: ordered regex deletions, whitespace collapse, casing.

    Patterns use Python regular-expression syntax and are applied in order,
    repeatedly, until the text stops changing; this makes cleaning idempotent
    even for nested annotation tokens.
    """

    strip_patterns: tuple[str, ...] = DEFAULT_STRIP_PATTERNS
    collapse_whitespace: bool = True
    lowercase: bool = False

    def compiled(self) -> list[re.Pattern]:
        try:
            return [re.compile(p) for p in self.strip_patterns]
        except re.error as exc:
            raise DataError(f"invalid strip pattern: {exc}") from exc


@dataclass
class IngestReport:
    """Line-level accounting for one ingestion pass."""

    total_lines: int = 0
    accepted: int = 0
    rejected: dict[str, int] = field(default_factory=dict)

    def reject(self, reason: str) -> None:
        self.rejected[reason] = self.rejected.get(reason, 0) + 1

    @property
    def rejected_total(self) -> int:
        return sum(self.rejected.values())

    def to_dict(self) -> dict:
        return {
            "total_lines": self.total_lines,
            "accepted": self.accepted,
            "rejected_total": self.rejected_total,
            "rejected": dict(sorted(self.rejected.items())),
        }


@dataclass
class IngestResult:
    records: list[UtteranceRecord]
    report: IngestReport


@dataclass
class CorpusStats:
    utterance_count: int
    recipient_count: int
    recipients_per_label: dict[str, int]
    utterances_per_label: dict[str, int]
    mean_chars_per_utterance: float

    def to_rows(self) -> list[tuple[str, str]]:
        """Flat key/value rows for the CSV and human-readable emitters."""
        rows = [
            ("utterances", str(self.utterance_count)),
            ("recipients", str(self.recipient_count)),
        ]
        for label in sorted(self.recipients_per_label):
            rows.append((f"recipients[{label}]", str(self.recipients_per_label[label])))
        for label in sorted(self.utterances_per_label):
            rows.append((f"utterances[{label}]", str(self.utterances_per_label[label])))
        rows.append(("mean_chars_per_utterance", f"{self.mean_chars_per_utterance:.2f}"))
        return rows


def _parse_line(line: str, dataset_id: str, label_alphabet: set[str]) -> UtteranceRecord | str:
    """Returns a record, or a rejection reason string."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError:
        return "malformed_json"
    if not isinstance(obj, dict):
        return "malformed_json"
    for name in _REQUIRED_FIELDS:
        if name not in obj:
            return f"missing_field:{name}"
    if not isinstance(obj["turn_index"], int) or isinstance(obj["turn_index"], bool):
        return "invalid_field:turn_index"
    if obj["turn_index"] < 0:
        return "invalid_field:turn_index"
    for name in ("conversation_id", "author_id", "recipient_id", "text"):
        if not isinstance(obj[name], str):
            return f"invalid_field:{name}"
    recipient_label = obj.get("recipient_label")
    if recipient_label is not None:
        if not isinstance(recipient_label, str):
            return "invalid_field:recipient_label"
        if recipient_label not in label_alphabet:
            return "label_out_of_alphabet"
    author_label = obj.get("author_label")
    if author_label is not None and not isinstance(author_label, str):
        return "invalid_field:author_label"
    return UtteranceRecord(
        dataset_id=dataset_id,
        conversation_id=obj["conversation_id"],
        turn_index=obj["turn_index"],
        author_id=obj["author_id"],
        recipient_id=obj["recipient_id"],
        text=obj["text"],
        recipient_label=recipient_label,
        author_label=author_label,
    )


def ingest(path: str | Path, dataset_id: str, label_alphabet: set[str]) -> IngestResult:
    """Parse a canonical-format corpus file into validated records.

    Malformed lines are counted per reason, never silently dropped; input
    order is preserved.  Raises DataError if the file cannot be read or the
    label alphabet is empty.
    """
    if not label_alphabet:
        raise DataError("label_alphabet must be non-empty")
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read corpus file {path}: {exc}") from exc

    report = IngestReport()
    records: list[UtteranceRecord] = []
    seen_turns: set[tuple[str, int]] = set()
    for line in text.splitlines():
        report.total_lines += 1
        if not line.strip():
            report.reject("blank_line")
            continue
        parsed = _parse_line(line, dataset_id, set(label_alphabet))
        if isinstance(parsed, str):
            report.reject(parsed)
            continue
        key = (parsed.conversation_id, parsed.turn_index)
        if key in seen_turns:
            report.reject("duplicate_turn_index")
            continue
        seen_turns.add(key)
        records.append(parsed)
        report.accepted += 1
    return IngestResult(records=records, report=report)


def clean_text(text: str, cfg: CleaningConfig | None = None) -> str:
    """Apply the cleaning pipeline: strip patterns, collapse whitespace, case.

    Pattern deletion repeats until a fixpoint so that nested annotation
    tokens are fully removed and the function is idempotent.
    """
    cfg = cfg or CleaningConfig()
    patterns = cfg.compiled()
    while True:
        new = text
        for pat in patterns:
            new = pat.sub("", new)
        if new == text:
            break
        text = new
    if cfg.collapse_whitespace:
        text = " ".join(text.split())
    else:
        text = text.strip()
    if cfg.lowercase:
        text = text.lower()
    return text


def clean_records(
    records: list[UtteranceRecord], cfg: CleaningConfig | None = None
) -> tuple[list[UtteranceRecord], int]:
    """Clean every record's text, dropping records that become empty.

    Returns (cleaned records, dropped-empty count).
    """
    cfg = cfg or CleaningConfig()
    out: list[UtteranceRecord] = []
    dropped = 0
    for rec in records:
        cleaned = clean_text(rec.text, cfg)
        if not cleaned:
            dropped += 1
            continue
        out.append(
            UtteranceRecord(
                dataset_id=rec.dataset_id,
                conversation_id=rec.conversation_id,
                turn_index=rec.turn_index,
                author_id=rec.author_id,
                recipient_id=rec.recipient_id,
                text=cleaned,
                recipient_label=rec.recipient_label,
                author_label=rec.author_label,
            )
        )
    return out, dropped


def filter_labeled(records: list[UtteranceRecord]) -> list[UtteranceRecord]:
    """Keep exactly the records whose recipient_label is present, in order."""
    return [r for r in records if r.recipient_label is not None]


def corpus_stats(records: list[UtteranceRecord]) -> CorpusStats:
    """Counts and mean text length; empty input yields all-zero stats."""
    recipients: set[str] = set()
    recipients_per_label: dict[str, set[str]] = {}
    utterances_per_label: dict[str, int] = {}
    total_chars = 0
    for rec in records:
        recipients.add(rec.recipient_id)
        total_chars += len(rec.text)
        if rec.recipient_label is not None:
            recipients_per_label.setdefault(rec.recipient_label, set()).add(rec.recipient_id)
            utterances_per_label[rec.recipient_label] = (
                utterances_per_label.get(rec.recipient_label, 0) + 1
            )
    n = len(records)
    return CorpusStats(
        utterance_count=n,
        recipient_count=len(recipients),
        recipients_per_label={k: len(v) for k, v in recipients_per_label.items()},
        utterances_per_label=utterances_per_label,
        mean_chars_per_utterance=(total_chars / n) if n else 0.0,
    )


def write_records(path: str | Path, records: list[UtteranceRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec.to_json())
            fh.write("\n")
