"""Synthetic fixture corpus with a planted class signal.

A marker token is planted in a fixed fraction of one class's utterances;
everything else is neutral filler, so the achievable (Bayes) accuracy of
any classifier is computable by enumerating the generator's outcomes.
Running this module as a script regenerates fixtures/planted/corpus.jsonl;
tests assert the committed file matches byte for byte.
"""

from __future__ import annotations

import json
from pathlib import Path

from recipro.rng import SplitMix64

GENERATOR_SEED = 988776
MARKER = "glimmerquartz"
MARKER_CLASS = "F"
MARKER_RATE_PCT = 70  # percent of marker-class utterances carrying the marker
N_RECIPIENTS = 20  # alternating F/M
UTTERANCES_PER_RECIPIENT = 10
WORDS_PER_UTTERANCE = 12
TAG_RATE_PCT = 15  # percent of utterances carrying a strippable annotation tag

VOCAB = [
    "about", "again", "along", "answer", "around", "because", "before", "better",
    "between", "change", "coffee", "could", "dinner", "early", "enough", "evening",
    "every", "garden", "headed", "little", "maybe", "mention", "minute", "morning",
    "nearly", "nothing", "often", "outside", "people", "perhaps", "plan", "pretty",
    "question", "rather", "really", "reason", "second", "should", "something",
    "sometimes", "station", "still", "thing", "though", "together", "weather",
    "weekend", "window",
]

TAGS = ["{cough}", "<breath>", "[noise]"]


def generate_records() -> list[dict]:
    """Deterministic record stream for the fixture corpus."""
    rng = SplitMix64(GENERATOR_SEED)
    records = []
    for r in range(N_RECIPIENTS):
        recipient = f"r{r:02d}"
        label = "F" if r % 2 == 0 else "M"
        conversation = f"c{r:02d}"
        author = f"a{r:02d}"
        for turn in range(UTTERANCES_PER_RECIPIENT):
            words = [VOCAB[rng.randbelow(len(VOCAB))] for _ in range(WORDS_PER_UTTERANCE)]
            if label == MARKER_CLASS and rng.randbelow(100) < MARKER_RATE_PCT:
                words.insert(rng.randbelow(len(words) + 1), MARKER)
            if rng.randbelow(100) < TAG_RATE_PCT:
                words.insert(rng.randbelow(len(words) + 1), TAGS[rng.randbelow(len(TAGS))])
            records.append(
                {
                    "conversation_id": conversation,
                    "turn_index": turn,
                    "author_id": author,
                    "recipient_id": recipient,
                    "text": " ".join(words),
                    "recipient_label": label,
                }
            )
    # A couple of unlabeled bystander records exercise the label filter.
    for i in range(2):
        words = [VOCAB[rng.randbelow(len(VOCAB))] for _ in range(WORDS_PER_UTTERANCE)]
        records.append(
            {
                "conversation_id": "c_obs",
                "turn_index": i,
                "author_id": "a_obs",
                "recipient_id": "r_obs",
                "text": " ".join(words),
            }
        )
    return records


def corpus_text() -> str:
    lines = [json.dumps(rec, ensure_ascii=False, sort_keys=True) for rec in generate_records()]
    return "\n".join(lines) + "\n"


def marker_chunk_correct_probability(n_utterances: int) -> float:
    """Brute-force enumeration of marker patterns in a marker-class chunk.

    Enumerates all 2^k presence patterns with their generator probabilities
    and applies the Bayes-optimal rule (equal class priors): any marker means
    the marker class, no marker means the other class.  Returns the chance
    the chunk is classified correctly.
    """
    p = MARKER_RATE_PCT / 100.0
    correct = 0.0
    for pattern in range(1 << n_utterances):
        prob = 1.0
        any_marker = False
        for bit in range(n_utterances):
            if pattern & (1 << bit):
                prob *= p
                any_marker = True
            else:
                prob *= 1.0 - p
        if any_marker:
            correct += prob
    return correct


def bayes_balanced_accuracy(marker_chunk_sizes: list[int]) -> float:
    """Balanced Bayes rate given the realized marker-class chunk sizes.

    The non-marker class never produces the token, so its recall under the
    optimal rule is 1; the marker class's recall is the mean per-chunk
    correct probability.
    """
    recalls = [marker_chunk_correct_probability(k) for k in marker_chunk_sizes]
    marker_recall = sum(recalls) / len(recalls)
    return (marker_recall + 1.0) / 2.0


if __name__ == "__main__":
    out = Path(__file__).resolve().parent.parent / "fixtures" / "planted" / "corpus.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(corpus_text(), encoding="utf-8")
    print(f"wrote {out}")
