from __future__ import annotations

import math

import numpy as np
import pytest

from recipro import _pykernels as pk
from recipro import kernels
from recipro.errors import DataError
from recipro.features import SparseVector
from recipro.model import (
    EmbeddingTable,
    FeatureSpace,
    LinearModel,
    TrainConfig,
    load,
    predict,
    read_embeddings,
    save,
    train,
    train_hashed,
    train_probe,
    write_embeddings,
)


def _sv(pairs) -> SparseVector:
    pairs = sorted(pairs)
    return SparseVector(
        indices=np.array([i for i, _ in pairs], dtype=np.int64),
        weights=np.array([w for _, w in pairs], dtype=np.float64),
    )


def _space(dim: int) -> FeatureSpace:
    return FeatureSpace(kind="hashed", dim=dim, config_digest="test")


class TestTrain:
    def test_separable_two_points(self):
        features = [(_sv([(0, 1.0)]), "F"), (_sv([(1, 1.0)]), "M")]
        cfg = TrainConfig(learning_rate=1.0, epochs=200, l2_lambda=0.0, batch_size=2, seed=1)
        m = train(features, cfg, _space(2))
        assert predict(m, features[0][0])[0] == "F"
        assert predict(m, features[1][0])[0] == "M"

    def test_same_seed_identical_weights(self):
        rng = np.random.default_rng(0)
        features = [
            (_sv([(i % 8, float(rng.normal()))]), "F" if i % 2 else "M") for i in range(40)
        ]
        cfg = TrainConfig(seed=5)
        m1 = train(features, cfg, _space(8))
        m2 = train(features, cfg, _space(8))
        assert np.array_equal(m1.weights, m2.weights)
        assert m1.bias == m2.bias

    def test_model_bytes_pure_function_of_inputs(self, tmp_path):
        features = [(_sv([(0, 0.5), (3, 1.0)]), "F"), (_sv([(1, 1.0)]), "M")] * 10
        cfg = TrainConfig(seed=9)
        p1, p2 = tmp_path / "a.rpmod", tmp_path / "b.rpmod"
        save(train(features, cfg, _space(4)), p1)
        save(train(features, cfg, _space(4)), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_single_label_fatal(self):
        with pytest.raises(DataError, match="degenerate_class"):
            train([(_sv([(0, 1.0)]), "F")], TrainConfig(), _space(1))

    def test_three_labels_rejected(self):
        features = [(_sv([(0, 1.0)]), lab) for lab in ("A", "B", "C")]
        with pytest.raises(DataError):
            train(features, TrainConfig(), _space(1))

    def test_non_finite_feature_fatal(self):
        features = [(_sv([(0, float("nan"))]), "F"), (_sv([(0, 1.0)]), "M")]
        with pytest.raises(DataError):
            train(features, TrainConfig(), _space(1))

    def test_loss_history_non_increasing_default_config(self):
        # documented small-learning-rate regime: default sparse baseline
        rng = np.random.default_rng(3)
        features = []
        for i in range(120):
            label = "F" if i % 2 else "M"
            shift = 0 if label == "F" else 4
            idxs = rng.choice(4, size=2, replace=False) + shift
            features.append((_sv([(int(j), 1.0) for j in idxs]), label))
        cfg = TrainConfig(epochs=8)  # default lr/l2/batch
        m = train(features, cfg, _space(8))
        history = m.train_meta["loss_history"]
        assert all(b <= a + 1e-12 for a, b in zip(history, history[1:]))

    def test_loss_history_non_increasing_on_fixture_corpus(self, fixtures_dir):
        from recipro.corpus import clean_records, filter_labeled, ingest
        from recipro.features import FeaturizerConfig, fit
        from recipro.pipeline import ChunkingConfig, chunk_utterances

        result = ingest(fixtures_dir / "planted" / "corpus.jsonl", "planted", {"F", "M"})
        cleaned, _ = clean_records(result.records)
        chunks = chunk_utterances(filter_labeled(cleaned), ChunkingConfig(char_limit=300))
        fcfg = FeaturizerConfig(hash_dims=1 << 14)
        featurizer = fit([c.text for c in chunks], fcfg)
        vectors = [featurizer.featurize(c.text) for c in chunks]
        m = train_hashed(
            vectors,
            [c.label for c in chunks],
            TrainConfig(epochs=6),  # default lr/l2/batch
            fcfg.digest(),
            fcfg.hash_dims,
        )
        history = m.train_meta["loss_history"]
        assert all(b <= a + 1e-12 for a, b in zip(history, history[1:]))

    def test_adam_mode_trains(self):
        features = [(_sv([(0, 1.0)]), "F"), (_sv([(1, 1.0)]), "M")] * 20
        cfg = TrainConfig(learning_rate=0.05, epochs=30, l2_lambda=0.0, optimizer="adam", seed=2)
        m = train(features, cfg, _space(2))
        assert predict(m, _sv([(0, 1.0)]))[0] == "F"
        assert predict(m, _sv([(1, 1.0)]))[0] == "M"

    def test_gaussian_accuracy_near_bayes_oracle(self):
        # two unit-variance Gaussians at +/- mu: Bayes rule is sign(x0)
        mu = 1.0
        rng = np.random.default_rng(42)

        def draw(n):
            y = rng.integers(0, 2, size=n)
            x = rng.normal(size=(n, 2))
            x[:, 0] += np.where(y == 1, mu, -mu)
            return x, y

        # Monte-Carlo oracle for the Bayes accuracy, 10^6 draws
        xo, yo = draw(1_000_000)
        bayes_acc = float(np.mean((xo[:, 0] > 0).astype(int) == yo))
        assert bayes_acc == pytest.approx(0.8413, abs=0.002)

        xtr, ytr = draw(500)
        features = [
            (_sv([(0, float(a)), (1, float(b))]), "M" if lab else "F")
            for (a, b), lab in zip(xtr, ytr)
        ]
        cfg = TrainConfig(learning_rate=0.5, epochs=20, l2_lambda=0.0, batch_size=32, seed=1)
        m = train(features, cfg, _space(2))

        xte, yte = draw(4000)
        correct = 0
        for (a, b), lab in zip(xte, yte):
            pred, _ = predict(m, _sv([(0, float(a)), (1, float(b))]))
            correct += int(pred == ("M" if lab else "F"))
        model_acc = correct / len(yte)
        assert abs(model_acc - bayes_acc) < 0.03


class TestGradient:
    def test_analytic_gradient_matches_central_differences(self):
        rng = np.random.default_rng(11)
        rel_errors = []
        for _ in range(100):
            d = int(rng.integers(2, 10))
            w = rng.normal(size=d)
            x = rng.normal(size=d)
            y = float(rng.integers(0, 2))
            l2 = float(rng.choice([0.0, 1e-3, 0.1]))
            indptr = np.array([0, d], dtype=np.int64)
            indices = np.arange(d, dtype=np.int64)
            yv = np.array([y])
            _, grad, grad_b = kernels.logistic_loss_grad(w, 0.1, indptr, indices, x, yv, l2)

            def loss_at(wv, bias=0.1):
                loss, _, _ = kernels.logistic_loss_grad(wv, bias, indptr, indices, x, yv, l2)
                return loss

            h = 1e-6
            fd = np.empty(d)
            for j in range(d):
                wp, wm = w.copy(), w.copy()
                wp[j] += h
                wm[j] -= h
                fd[j] = (loss_at(wp) - loss_at(wm)) / (2 * h)
            fd_b = (loss_at(w, 0.1 + h) - loss_at(w, 0.1 - h)) / (2 * h)
            denom = max(np.linalg.norm(grad), 1e-12)
            rel_errors.append(np.linalg.norm(fd - grad) / denom)
            rel_errors.append(abs(fd_b - grad_b) / max(abs(grad_b), 1e-12))
        assert max(rel_errors) < 1e-5


class TestPredict:
    def test_zero_model_scores_half_and_predicts_positive(self):
        m = LinearModel(["F", "M"], np.zeros(4), 0.0, _space(4))
        label, score = predict(m, _sv([(0, 3.0), (2, -1.0)]))
        assert score == 0.5
        assert label == "M"  # positive label wins the tie at exactly 0.5

    def test_sigmoid_closed_form(self):
        m = LinearModel(["F", "M"], np.array([math.log(3.0)]), 0.0, _space(1))
        _, score = predict(m, _sv([(0, 1.0)]))
        assert score == pytest.approx(0.75, abs=1e-12)

    def test_scores_strictly_inside_unit_interval(self):
        m = LinearModel(["F", "M"], np.array([800.0, -800.0]), 0.0, _space(2))
        _, hi = predict(m, _sv([(0, 5.0)]))
        _, lo = predict(m, _sv([(1, 5.0)]))
        assert 0.0 < lo < hi < 1.0

    def test_dimension_mismatch_fatal(self):
        m = LinearModel(["F", "M"], np.zeros(2), 0.0, FeatureSpace(kind="dense", dim=2))
        with pytest.raises(DataError):
            predict(m, np.zeros(3))
        sparse_m = LinearModel(["F", "M"], np.zeros(2), 0.0, _space(2))
        with pytest.raises(DataError):
            predict(sparse_m, _sv([(5, 1.0)]))

    def test_dense_and_sparse_margins_agree(self):
        w = np.array([0.5, -1.0, 0.25])
        m_dense = LinearModel(["F", "M"], w, 0.1, FeatureSpace(kind="dense", dim=3))
        m_sparse = LinearModel(["F", "M"], w, 0.1, _space(3))
        x = np.array([1.0, 2.0, -0.5])
        s1 = predict(m_dense, x)[1]
        s2 = predict(m_sparse, _sv([(0, 1.0), (1, 2.0), (2, -0.5)]))[1]
        assert s1 == s2


class TestPersistence:
    def _model(self):
        features = [(_sv([(0, 1.0), (7, 0.5)]), "F"), (_sv([(3, 1.0)]), "M")] * 5
        return train(features, TrainConfig(epochs=2, seed=3), _space(8))

    def test_round_trip_bit_exact(self, tmp_path):
        m = self._model()
        path = tmp_path / "m.rpmod"
        save(m, path)
        m2 = load(path)
        assert np.array_equal(m.weights, m2.weights)
        assert m.bias == m2.bias
        assert m.label_order == m2.label_order
        assert m.feature_space == m2.feature_space
        assert m.train_meta == m2.train_meta

    def test_round_trip_predictions_identical(self, tmp_path):
        m = self._model()
        path = tmp_path / "m.rpmod"
        save(m, path)
        m2 = load(path)
        rng = np.random.default_rng(0)
        for _ in range(1000):
            k = int(rng.integers(1, 5))
            idxs = sorted(int(i) for i in rng.choice(8, size=k, replace=False))
            vec = _sv([(i, float(rng.normal())) for i in idxs])
            assert predict(m, vec) == predict(m2, vec)

    def test_truncated_file_is_corrupt(self, tmp_path):
        m = self._model()
        path = tmp_path / "m.rpmod"
        save(m, path)
        path.write_bytes(path.read_bytes()[:-10])
        with pytest.raises(DataError, match="corrupt_model"):
            load(path)

    def test_bad_magic_is_corrupt(self, tmp_path):
        path = tmp_path / "m.rpmod"
        path.write_bytes(b"WRONGMAGIC!" * 4)
        with pytest.raises(DataError, match="corrupt_model"):
            load(path)

    def test_committed_byte_fixture_loads_exactly(self, fixtures_dir):
        m = load(fixtures_dir / "models" / "tiny.rpmod")
        assert m.label_order == ["F", "M"]
        assert np.array_equal(m.weights, np.array([0.5, -0.25, 3.0]))
        assert m.bias == 0.125
        assert m.feature_space == FeatureSpace(kind="dense", dim=3)


class TestProbe:
    def _table(self, n=120, dim=8, sep=2.0, seed=0):
        rng = np.random.default_rng(seed)
        vectors, labels = {}, {}
        for i in range(n):
            label = "F" if i % 2 else "M"
            center = sep if label == "F" else -sep
            vec = rng.normal(size=dim).astype(np.float32)
            vec[0] += center
            ex_id = f"ex{i:03d}"
            vectors[ex_id] = vec
            labels[ex_id] = label
        return EmbeddingTable(dim=dim, source_model="synthetic", vectors=vectors), labels

    def test_separable_embeddings_reach_full_training_accuracy(self):
        table, labels = self._table(n=40, sep=4.0)
        cfg = TrainConfig(learning_rate=0.5, epochs=40, l2_lambda=0.0, batch_size=8, seed=1)
        m = train_probe(table, labels, cfg)
        correct = sum(
            predict(m, table.vectors[i].astype(np.float64))[0] == labels[i] for i in labels
        )
        assert correct == len(labels)
        assert m.train_meta["source_model"] == "synthetic"

    def test_missing_embedding_fatal_and_lists_ids(self):
        table, labels = self._table(n=10)
        labels["ghost"] = "F"
        with pytest.raises(DataError, match="ghost"):
            train_probe(table, labels, TrainConfig())

    def test_shuffled_label_control_is_chance_level(self):
        # permuting training labels must kill held-out accuracy: 0.5 +/- 0.05
        table, labels = self._table(n=400, sep=1.5, seed=7)
        ids = sorted(labels)
        train_ids, test_ids = ids[: len(ids) // 2], ids[len(ids) // 2 :]
        cfg_base = dict(learning_rate=0.5, epochs=10, l2_lambda=0.0, batch_size=16)
        accs = []
        for seed in range(10):
            rng = np.random.default_rng(seed)
            shuffled = [labels[i] for i in train_ids]
            rng.shuffle(shuffled)
            train_labels = dict(zip(train_ids, shuffled))
            m = train_probe(table, train_labels, TrainConfig(seed=seed, **cfg_base))
            per_class = {"F": [0, 0], "M": [0, 0]}
            for i in test_ids:
                pred = predict(m, table.vectors[i].astype(np.float64))[0]
                per_class[labels[i]][0] += int(pred == labels[i])
                per_class[labels[i]][1] += 1
            bal = sum(c / t for c, t in per_class.values()) / 2
            accs.append(bal)
        assert abs(sum(accs) / len(accs) - 0.5) < 0.05


class TestEmbeddingIO:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        vectors = {f"id{i}": rng.normal(size=16).astype(np.float32) for i in range(7)}
        table = EmbeddingTable(dim=16, source_model="m", vectors=vectors)
        path = tmp_path / "t.rpemb"
        write_embeddings(table, path)
        table2 = read_embeddings(path, source_model="m")
        assert table2.dim == 16
        assert set(table2.vectors) == set(vectors)
        for k, v in vectors.items():
            assert np.array_equal(table2.vectors[k], v)

    def test_committed_byte_fixture_reads_exactly(self, fixtures_dir):
        table = read_embeddings(fixtures_dir / "embeddings" / "tiny.rpemb")
        assert table.dim == 8
        assert sorted(table.vectors) == ["ex1", "ex2", "ex3"]
        assert np.array_equal(
            table.vectors["ex1"],
            np.array([0.5, -1.25, 2.0, 0.0, 1.0, -0.5, 0.75, 4.0], dtype=np.float32),
        )

    def test_truncated_fatal(self, tmp_path):
        path = tmp_path / "t.rpemb"
        table = EmbeddingTable(
            dim=4, source_model="m", vectors={"a": np.zeros(4, dtype=np.float32)}
        )
        write_embeddings(table, path)
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(DataError):
            read_embeddings(path)

    def test_non_finite_rejected(self):
        with pytest.raises(DataError):
            EmbeddingTable(
                dim=2,
                source_model="m",
                vectors={"a": np.array([1.0, float("inf")], dtype=np.float32)},
            )


class TestBackendParity:
    def test_training_identical_on_python_backend(self, monkeypatch, tmp_path):
        pytest.importorskip("recipro._ckernels")
        features = [
            (_sv([(i % 16, 0.5 + (i % 3) * 0.25)]), "F" if i % 2 else "M") for i in range(60)
        ]
        cfg = TrainConfig(seed=4, epochs=3)
        m_cy = train(features, cfg, _space(16))
        for name in ("sgd_epoch", "logistic_loss_grad", "csr_margins", "sigmoid_vec"):
            monkeypatch.setattr(kernels, name, getattr(pk, name))
        m_py = train(features, cfg, _space(16))
        assert np.array_equal(m_cy.weights, m_py.weights)
        assert m_cy.bias == m_py.bias
        assert m_cy.train_meta["loss_history"] == m_py.train_meta["loss_history"]
