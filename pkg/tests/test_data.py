import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from codistill.data import (Dataset, batch_stream, gen_classification, ingest_text,
                            interleave, make_shards, split_train_val, take, unigram)


class TestGenClassification:
    def test_deterministic(self):
        a = gen_classification(5, 200, 4, 3, 0.3)
        b = gen_classification(5, 200, 4, 3, 0.3)
        assert np.array_equal(a.inputs, b.inputs)
        assert np.array_equal(a.labels, b.labels)

    def test_zero_difficulty_nearest_centroid_is_perfect(self):
        ds = gen_classification(2, 300, 6, 5, 0.0)
        # recover centroids from class means, then 1-nearest-centroid
        centroids = np.stack([ds.inputs[ds.labels == k].mean(axis=0) for k in range(5)])
        d = np.linalg.norm(ds.inputs[:, None, :] - centroids[None], axis=2)
        assert (d.argmin(axis=1) == ds.labels).all()

    def test_balanced_counts(self):
        ds = gen_classification(1, 1000, 8, 10, 0.5)
        counts = np.bincount(ds.labels, minlength=10)
        assert counts.min() >= 90 and counts.max() <= 110
        assert (counts == 100).all()  # generator balances exactly

    def test_every_class_appears(self):
        ds = gen_classification(3, 11, 3, 10, 1.0)
        assert len(np.unique(ds.labels)) == 10

    def test_invalid_dims(self):
        with pytest.raises(ValueError):
            gen_classification(0, 5, 3, 10, 0.1)
        with pytest.raises(ValueError):
            gen_classification(0, 10, 0, 2, 0.1)


class TestIngestText:
    def test_sliding_windows(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("abcd", encoding="utf-8")
        ds = ingest_text(path, 2)
        assert ds.vocab == "abcd"
        assert ds.n == 2
        # ("ab" -> c), ("bc" -> d)
        assert ds.inputs.tolist() == [[0, 1], [1, 2]]
        assert ds.labels.tolist() == [2, 3]

    def test_empty_corpus(self, tmp_path):
        path = tmp_path / "e.txt"
        path.write_text("", encoding="utf-8")
        with pytest.raises(ValueError, match="empty"):
            ingest_text(path, 2)

    def test_too_short(self, tmp_path):
        path = tmp_path / "s.txt"
        path.write_text("ab", encoding="utf-8")
        with pytest.raises(ValueError, match="shorter"):
            ingest_text(path, 2)

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(OSError):
            ingest_text(tmp_path / "missing.txt", 2)

    def test_constant_corpus(self, tmp_path):
        path = tmp_path / "a.txt"
        path.write_text("aaaa", encoding="utf-8")
        ds = ingest_text(path, 1)
        assert (ds.labels == 0).all()
        assert ds.n_classes == 1
        # a constant predictor over the single-token vocabulary is lossless
        from codistill.losses import hard_ce
        loss, _ = hard_ce(ds.labels, np.zeros((ds.n, 1)))
        assert loss == 0.0


class TestShards:
    def test_disjoint_partition(self):
        ds = gen_classification(1, 10, 2, 2, 0.1)
        plan = make_shards(ds, "disjoint", 2, 0)
        a, b = plan.assignment
        assert len(a) == 5 and len(b) == 5
        assert set(a) | set(b) == set(range(10))
        assert set(a) & set(b) == set()

    def test_shared_mode(self):
        ds = gen_classification(1, 10, 2, 2, 0.1)
        plan = make_shards(ds, "shared", 2, 0)
        for idx in plan.assignment:
            assert np.array_equal(np.sort(idx), np.arange(10))

    def test_deterministic(self):
        ds = gen_classification(1, 50, 2, 2, 0.1)
        a = make_shards(ds, "disjoint", 3, 7)
        b = make_shards(ds, "disjoint", 3, 7)
        for x, y in zip(a.assignment, b.assignment):
            assert np.array_equal(x, y)

    def test_too_many_shards(self):
        ds = gen_classification(1, 4, 2, 2, 0.1)
        with pytest.raises(ValueError):
            make_shards(ds, "disjoint", 5, 0)

    @given(st.integers(2, 40), st.integers(1, 8), st.integers(0, 1000))
    @settings(max_examples=40, deadline=None)
    def test_disjoint_partition_property(self, n, shards, seed):
        n = max(n, shards)
        ds = Dataset(np.zeros((n, 1)), np.zeros(n, dtype=int), "classification", 1)
        plan = make_shards(ds, "disjoint", shards, seed)
        sizes = [len(a) for a in plan.assignment]
        assert max(sizes) - min(sizes) <= 1
        merged = np.concatenate(plan.assignment)
        assert len(merged) == n
        assert set(merged) == set(range(n))


class TestBatchStream:
    def test_deterministic(self):
        ds = gen_classification(1, 30, 3, 2, 0.1)
        s1, s2 = batch_stream(ds, 8, 5), batch_stream(ds, 8, 5)
        for _ in range(10):
            a, b = next(s1), next(s2)
            assert np.array_equal(a.inputs, b.inputs)
            assert np.array_equal(a.labels, b.labels)

    def test_full_batch_is_whole_shard(self):
        ds = gen_classification(1, 12, 3, 2, 0.1)
        batch = next(batch_stream(ds, 12, 0))
        order = np.lexsort(batch.inputs.T)
        ref = np.lexsort(ds.inputs.T)
        assert np.array_equal(batch.inputs[order], ds.inputs[ref])

    def test_batch_too_large(self):
        ds = gen_classification(1, 4, 2, 2, 0.1)
        with pytest.raises(ValueError):
            next(batch_stream(ds, 5, 0))

    def test_interleave_unions_member_batches(self):
        ds = gen_classification(1, 40, 3, 2, 0.1)
        members = [batch_stream(ds, 2, seed) for seed in (1, 2)]
        ref = [batch_stream(ds, 2, seed) for seed in (1, 2)]
        merged = interleave(members)
        for _ in range(5):
            big = next(merged)
            parts = [next(r) for r in ref]
            assert big.size == 4
            assert np.array_equal(big.inputs, np.concatenate([p.inputs for p in parts]))
            assert np.array_equal(big.labels, np.concatenate([p.labels for p in parts]))


class TestSplit:
    def test_sizes_and_disjointness(self):
        ds = gen_classification(1, 100, 3, 2, 0.1)
        train, val = split_train_val(ds, 0.1, 9)
        assert train.n == 90 and val.n == 10
        assert train.n + val.n == ds.n

    def test_deterministic(self):
        ds = gen_classification(1, 100, 3, 2, 0.1)
        a = split_train_val(ds, 0.2, 9)[1]
        b = split_train_val(ds, 0.2, 9)[1]
        assert np.array_equal(a.inputs, b.inputs)


class TestUnigram:
    def test_counting(self):
        ds = Dataset(np.zeros((3, 1)), np.array([0, 0, 1]), "classification", 2)
        assert np.abs(unigram(ds) - [2 / 3, 1 / 3]).max() < 1e-15

    def test_single_class(self):
        ds = Dataset(np.zeros((4, 1)), np.zeros(4, dtype=int), "classification", 1)
        assert np.array_equal(unigram(ds), [1.0])

    def test_uniform(self):
        labels = np.repeat(np.arange(4), 100)
        ds = Dataset(np.zeros((400, 1)), labels, "classification", 4)
        assert np.array_equal(unigram(ds), np.full(4, 0.25))

    def test_sums_to_one(self):
        ds = gen_classification(1, 997, 3, 7, 0.5)
        u = unigram(ds)
        assert abs(u.sum() - 1.0) < 1e-12
        assert u.min() >= 0.0


class TestTake:
    def test_subset_copies(self):
        ds = gen_classification(1, 20, 3, 2, 0.1)
        sub = take(ds, np.array([3, 1, 4]))
        assert sub.n == 3
        sub.inputs[0, 0] = 999.0
        assert ds.inputs[3, 0] != 999.0
