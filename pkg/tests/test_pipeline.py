from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from recipro.corpus import UtteranceRecord
from recipro.errors import DataError
from recipro.pipeline import (
    BalanceConfig,
    ChunkingConfig,
    SplitAssignment,
    SplitConfig,
    balance_classes,
    chunk_utterances,
    split_by_recipient,
    split_sizes,
    verify_split,
)


def _group(lengths, recipient="r1", label="F", conversation="c1", author="a1", start_turn=0):
    return [
        UtteranceRecord(
            dataset_id="ds",
            conversation_id=conversation,
            turn_index=start_turn + i,
            author_id=author,
            recipient_id=recipient,
            text="x" * n,
            recipient_label=label,
        )
        for i, n in enumerate(lengths)
    ]


class TestChunking:
    def test_greedy_emission_at_limit(self):
        # cumulative lengths with separator: 400, 801, 1102 -> one chunk
        chunks = chunk_utterances(_group([400, 400, 300]), ChunkingConfig(char_limit=1000))
        assert len(chunks) == 1
        assert chunks[0].char_length == 1102
        assert chunks[0].source_turns == [0, 1, 2]

    def test_single_over_limit_utterance(self):
        chunks = chunk_utterances(_group([1200]), ChunkingConfig(char_limit=1000))
        assert len(chunks) == 1
        assert chunks[0].char_length == 1200

    def test_tail_dropped_without_keep_short_tail(self):
        cfg = ChunkingConfig(char_limit=100, keep_short_tail=False)
        chunks = chunk_utterances(_group([60, 60, 20]), cfg)
        assert len(chunks) == 1  # 60+1+60 = 121 emitted; 20-char tail dropped
        assert all(c.char_length >= 100 for c in chunks)

    def test_partition_is_lossless(self):
        records = _group([30, 40, 10, 80, 5])
        cfg = ChunkingConfig(char_limit=60)
        chunks = chunk_utterances(records, cfg)
        rebuilt = cfg.separator.join(c.text for c in chunks)
        assert rebuilt == cfg.separator.join(r.text for r in records)

    def test_char_length_matches_text(self):
        for chunk in chunk_utterances(_group([10, 25, 40, 7]), ChunkingConfig(char_limit=30)):
            assert chunk.char_length == len(chunk.text)
            assert chunk.source_turns == sorted(chunk.source_turns)

    def test_groups_do_not_mix(self):
        records = _group([50], recipient="r1") + _group([50], recipient="r2", start_turn=1)
        chunks = chunk_utterances(records, ChunkingConfig(char_limit=40))
        assert {c.recipient_id for c in chunks} == {"r1", "r2"}
        assert len({c.example_id for c in chunks}) == len(chunks)

    def test_out_of_order_turns_are_sorted(self):
        records = list(reversed(_group([10, 20, 30])))
        chunks = chunk_utterances(records, ChunkingConfig(char_limit=1000))
        assert chunks[0].source_turns == [0, 1, 2]

    def test_unlabeled_record_fatal(self):
        rec = _group([10])[0]
        rec.recipient_label = None
        with pytest.raises(DataError):
            chunk_utterances([rec], ChunkingConfig())

    @settings(max_examples=150, deadline=None)
    @given(
        st.lists(st.integers(min_value=1, max_value=120), min_size=1, max_size=12),
        st.integers(min_value=1, max_value=150),
        st.booleans(),
    )
    def test_chunk_invariants_random_groups(self, lengths, limit, keep_tail):
        cfg = ChunkingConfig(char_limit=limit, keep_short_tail=keep_tail)
        records = _group(lengths)
        chunks = chunk_utterances(records, cfg)
        # every chunk except possibly the last of the group meets the limit
        for c in chunks[:-1]:
            assert c.char_length >= limit
        if not keep_tail:
            assert all(c.char_length >= limit for c in chunks)
        if keep_tail:
            rebuilt = cfg.separator.join(c.text for c in chunks)
            assert rebuilt == cfg.separator.join(r.text for r in records)


def _examples(label_counts: dict[str, int], per_recipient: int = 1):
    from recipro.pipeline import ProfilingExample

    out = []
    for label, count in sorted(label_counts.items()):
        for i in range(count):
            rid = f"{label}_r{i // per_recipient}"
            out.append(
                ProfilingExample(
                    example_id=f"{label}{i}",
                    dataset_id="ds",
                    recipient_id=rid,
                    label=label,
                    text="t",
                    source_turns=[i],
                    char_length=1,
                )
            )
    return out


class TestBalance:
    def test_already_balanced_unchanged(self):
        examples = _examples({"F": 10, "M": 10})
        assert balance_classes(examples, BalanceConfig(seed=1)) == examples

    def test_utterance_level_counts_equal_and_deterministic(self):
        examples = _examples({"F": 10, "M": 4})
        out1 = balance_classes(examples, BalanceConfig(seed=7))
        out2 = balance_classes(examples, BalanceConfig(seed=7))
        counts = {}
        for ex in out1:
            counts[ex.label] = counts.get(ex.label, 0) + 1
        assert counts == {"F": 4, "M": 4}
        assert [ex.example_id for ex in out1] == [ex.example_id for ex in out2]

    def test_different_seed_changes_selection(self):
        examples = _examples({"F": 30, "M": 5})
        ids = lambda out: [ex.example_id for ex in out]
        assert ids(balance_classes(examples, BalanceConfig(seed=1))) != ids(
            balance_classes(examples, BalanceConfig(seed=2))
        )

    def test_survivors_preserve_input_order(self):
        examples = _examples({"F": 9, "M": 3})
        out = balance_classes(examples, BalanceConfig(seed=3))
        positions = {ex.example_id: i for i, ex in enumerate(examples)}
        assert [positions[ex.example_id] for ex in out] == sorted(
            positions[ex.example_id] for ex in out
        )

    def test_recipient_level_balances_recipients(self):
        examples = _examples({"F": 12, "M": 4}, per_recipient=2)  # 6 F vs 2 M recipients
        out = balance_classes(examples, BalanceConfig(level="recipient", seed=5))
        recipients = {}
        for ex in out:
            recipients.setdefault(ex.label, set()).add(ex.recipient_id)
        assert len(recipients["F"]) == len(recipients["M"]) == 2
        # whole recipients survive with all their examples
        assert len(out) == 8

    def test_single_label_fatal(self):
        with pytest.raises(DataError, match="degenerate_class"):
            balance_classes(_examples({"F": 5}), BalanceConfig(seed=1))

    def test_multiclass_subsamples_to_minimum(self):
        examples = _examples({"A": 7, "B": 3, "C": 5})
        out = balance_classes(examples, BalanceConfig(seed=11))
        counts = {}
        for ex in out:
            counts[ex.label] = counts.get(ex.label, 0) + 1
        assert counts == {"A": 3, "B": 3, "C": 3}


def _oracle_split_sizes(n, fractions):
    # Independent restatement of the documented rounding rule.
    quotas = [n * f for f in fractions]
    sizes = [max(1, int(q // 1)) for q in quotas]
    leftover = n - sum(sizes)
    order = sorted(range(3), key=lambda i: (-(quotas[i] - int(quotas[i] // 1)), i))
    j = 0
    while leftover > 0:
        sizes[order[j % 3]] += 1
        leftover -= 1
        j += 1
    while leftover < 0:
        big = max(range(3), key=lambda i: (sizes[i], i))
        sizes[big] -= 1
        leftover += 1
    return tuple(sizes)


class TestSplit:
    def test_sizes_ten_recipients_default_fractions(self):
        assert split_sizes(10, (0.8, 0.04, 0.16)) == (8, 1, 1)

    def test_sizes_match_known_corpus_counts(self):
        assert split_sizes(2951, (0.8, 0.04, 0.16)) == (2361, 118, 472)
        assert split_sizes(440, (0.8, 0.04, 0.16)) == (352, 18, 70)

    def test_too_few_recipients_fatal(self):
        with pytest.raises(DataError, match="too_few_groups"):
            split_sizes(2, (0.8, 0.04, 0.16))

    def test_disjoint_splits_any_seed(self):
        examples = _examples({"F": 12, "M": 12}, per_recipient=2)
        for seed in range(5):
            assignment, _ = split_by_recipient(examples, SplitConfig(seed=seed))
            train, val, test = (
                set(assignment.train),
                set(assignment.val),
                set(assignment.test),
            )
            assert not (train & val) and not (train & test) and not (val & test)
            assert train and val and test

    def test_assignment_independent_of_example_order(self):
        examples = _examples({"F": 10, "M": 10}, per_recipient=2)
        cfg = SplitConfig(seed=42)
        a1, _ = split_by_recipient(examples, cfg)
        a2, _ = split_by_recipient(list(reversed(examples)), cfg)
        assert a1 == a2

    def test_examples_follow_their_recipient(self):
        examples = _examples({"F": 12, "M": 12}, per_recipient=3)
        assignment, (train, val, test) = split_by_recipient(examples, SplitConfig(seed=3))
        where = assignment.as_map()
        for name, bucket in (("train", train), ("val", val), ("test", test)):
            for ex in bucket:
                assert where[ex.recipient_id] == name
        assert len(train) + len(val) + len(test) == len(examples)

    @settings(max_examples=80, deadline=None)
    @given(st.integers(min_value=3, max_value=400), st.integers(min_value=0, max_value=2**32))
    def test_sizes_match_oracle_and_floor(self, n, seed):
        fractions = (0.8, 0.04, 0.16)
        sizes = split_sizes(n, fractions)
        assert sizes == _oracle_split_sizes(n, fractions)
        assert sum(sizes) == n
        assert all(s >= 1 for s in sizes)


class TestVerifySplit:
    def test_well_formed_split_ok(self):
        examples = _examples({"F": 8, "M": 8}, per_recipient=2)
        assignment, _ = split_by_recipient(examples, SplitConfig(seed=1))
        report = verify_split(assignment, examples)
        assert report.overlap == []
        assert report.ok

    def test_adversarial_overlap_reported(self):
        examples = _examples({"F": 4, "M": 4}, per_recipient=2)
        assignment = SplitAssignment(
            train=["F_r0", "F_r1", "M_r0"], val=["M_r1"], test=["F_r0"]
        )
        report = verify_split(assignment, examples)
        assert report.overlap == ["F_r0"]
        assert not report.ok

    def test_label_mixture_counts(self):
        examples = _examples({"F": 4, "M": 2}, per_recipient=2)
        assignment = SplitAssignment(train=["F_r0", "M_r0"], val=["F_r1"], test=[])
        report = verify_split(assignment, examples)
        assert report.label_mixture["train"] == {"F": 2, "M": 2}
        assert report.label_mixture["val"] == {"F": 2}
        assert report.example_counts == {"train": 4, "val": 2, "test": 0}
