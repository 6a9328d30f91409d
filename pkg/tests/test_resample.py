import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from litiscope.errors import TrainingError
from litiscope.featset import FeatureMatrix
from litiscope.resample import SmoteConfig, smote

RNG = np.random.default_rng(42)


def matrix_of(n_min, n_maj, width=3, seed=0):
    rng = np.random.default_rng(seed)
    values = np.vstack([
        rng.normal(0.0, 1.0, size=(n_min, width)),
        rng.normal(4.0, 1.0, size=(n_maj, width)),
    ])
    labels = np.array([True] * n_min + [False] * n_maj)
    ids = tuple(f"R{i}" for i in range(n_min + n_maj))
    return FeatureMatrix(values, ids), labels


def class_counts(labels):
    labels = np.asarray(labels)
    return int(labels.sum()), int((~labels).sum())


class TestCounts:
    def test_paper_worked_example(self):
        matrix, labels = matrix_of(140, 6500, width=2)
        out, out_labels = smote(matrix, labels, SmoteConfig(5, 1, seed=0))
        n_min, n_maj = class_counts(out_labels)
        assert n_min == 840
        assert n_maj == 7200
        assert out.values.shape[0] == len(out.ids) == 8040

    @given(
        m=st.integers(6, 15),
        big_m=st.integers(15, 40),
        s=st.integers(0, 4),
        j=st.integers(0, 3),
    )
    @settings(max_examples=60, deadline=None)
    def test_closed_form_counts(self, m, big_m, s, j):
        matrix, labels = matrix_of(m, big_m)
        out, out_labels = smote(matrix, labels, SmoteConfig(s, j, seed=1))
        n_true, n_false = class_counts(out_labels)
        if s == 0:
            assert (n_true, n_false) == (m, big_m)
        else:
            assert n_true == m * (1 + s)
            assert n_false == big_m + m * s * j

    def test_noop_when_s_zero(self):
        matrix, labels = matrix_of(8, 20)
        out, out_labels = smote(matrix, labels, SmoteConfig(0, 0, seed=3))
        assert out.values.tobytes() == matrix.values.tobytes()
        assert out.ids == matrix.ids
        assert np.array_equal(out_labels, labels)

    def test_minority_tie_prefers_true(self):
        matrix, labels = matrix_of(6, 6)
        out, out_labels = smote(matrix, labels, SmoteConfig(2, 0, k_neighbors=3, seed=0))
        n_true, n_false = class_counts(out_labels)
        assert n_true == 18 and n_false == 6

    def test_flipped_classes(self):
        # True is the majority here; False rows must get oversampled.
        matrix, labels = matrix_of(20, 7)
        out, out_labels = smote(matrix, labels, SmoteConfig(3, 1, k_neighbors=4, seed=2))
        n_true, n_false = class_counts(out_labels)
        assert n_false == 7 * 4
        assert n_true == 20 + 7 * 3

    def test_insufficient_minority_rows(self):
        matrix, labels = matrix_of(4, 30)
        with pytest.raises(TrainingError, match="minority"):
            smote(matrix, labels, SmoteConfig(5, 1, k_neighbors=5, seed=0))


class TestGeometry:
    def _parents_of(self, out, matrix, labels):
        """Map each synthetic id to (seed row, candidate neighbor rows)."""
        min_rows = matrix.values[labels]
        by_id = dict(zip(matrix.ids, matrix.values))
        parents = {}
        for rid, row in zip(out.ids, out.values):
            if "~s" in rid:
                seed_id = rid.split("~s")[0]
                parents[rid] = (by_id[seed_id], min_rows, row)
        return parents

    def test_synthetics_are_convex_combinations(self):
        matrix, labels = matrix_of(10, 40, width=4, seed=7)
        out, _ = smote(matrix, labels, SmoteConfig(4, 0, seed=5))
        checked = 0
        for seed_row, min_rows, row in self._parents_of(out, matrix, labels).values():
            ok = False
            for nb in min_rows:
                diff = nb - seed_row
                denom = float(diff @ diff)
                if denom == 0:
                    continue
                u = float((row - seed_row) @ diff / denom)
                if -1e-9 <= u <= 1 + 1e-9 and np.abs(seed_row + u * diff - row).max() < 1e-9:
                    ok = True
                    break
            assert ok, "synthetic row is not on a seed-to-neighbor segment"
            checked += 1
        assert checked == 40

    def test_duplicated_majority_rows_are_copies(self):
        matrix, labels = matrix_of(8, 25, seed=3)
        out, out_labels = smote(matrix, labels, SmoteConfig(2, 2, k_neighbors=3, seed=8))
        by_id = dict(zip(matrix.ids, matrix.values))
        n_dups = 0
        for rid, row, lab in zip(out.ids, out.values, out_labels):
            if "~d" in rid:
                assert lab == False  # noqa: E712
                assert np.array_equal(row, by_id[rid.split("~d")[0]])
                n_dups += 1
        assert n_dups == 8 * 2 * 2

    def test_one_hot_blocks_snap_to_a_parent(self):
        rng = np.random.default_rng(9)
        n_min, n_maj = 8, 12
        cont = rng.normal(size=(n_min + n_maj, 2))
        hot = np.zeros((n_min + n_maj, 3))
        hot[np.arange(n_min + n_maj), rng.integers(0, 3, n_min + n_maj)] = 1.0
        values = np.hstack([cont, hot])
        labels = np.array([True] * n_min + [False] * n_maj)
        matrix = FeatureMatrix(values, tuple(f"R{i}" for i in range(n_min + n_maj)))
        out, _ = smote(matrix, labels, SmoteConfig(3, 0, k_neighbors=3, seed=4), groups=[[2, 3, 4]])
        min_blocks = {tuple(v) for v in values[labels][:, 2:]}
        for rid, row in zip(out.ids, out.values):
            if "~s" in rid:
                block = row[2:]
                assert block.sum() == 1.0
                assert set(np.unique(block)) <= {0.0, 1.0}
                assert tuple(block) in min_blocks


class TestDeterminism:
    def test_same_seed_same_bytes(self):
        matrix, labels = matrix_of(9, 30, seed=1)
        a, la = smote(matrix, labels, SmoteConfig(3, 1, k_neighbors=4, seed=11))
        b, lb = smote(matrix, labels, SmoteConfig(3, 1, k_neighbors=4, seed=11))
        assert a.values.tobytes() == b.values.tobytes()
        assert a.ids == b.ids
        assert np.array_equal(la, lb)

    def test_different_seed_differs(self):
        matrix, labels = matrix_of(9, 30, seed=1)
        a, _ = smote(matrix, labels, SmoteConfig(3, 1, k_neighbors=4, seed=11))
        b, _ = smote(matrix, labels, SmoteConfig(3, 1, k_neighbors=4, seed=12))
        assert a.values.tobytes() != b.values.tobytes()


class TestUndersampling:
    def test_counts_mirror_append_mode(self):
        matrix, labels = matrix_of(10, 80)
        cfg = SmoteConfig(3, 2, k_neighbors=4, seed=6, undersample_majority=True)
        out, out_labels = smote(matrix, labels, cfg)
        n_min, n_maj = class_counts(out_labels)
        assert n_min == 10 * 4
        assert n_maj == 80 - 10 * 3 * 2

    def test_removal_beyond_majority_fails(self):
        matrix, labels = matrix_of(10, 20)
        cfg = SmoteConfig(5, 1, k_neighbors=4, seed=6, undersample_majority=True)
        with pytest.raises(TrainingError, match="undersampling"):
            smote(matrix, labels, cfg)

    def test_no_duplicate_ids_in_undersample_mode(self):
        matrix, labels = matrix_of(10, 80)
        cfg = SmoteConfig(2, 1, k_neighbors=3, seed=0, undersample_majority=True)
        out, _ = smote(matrix, labels, cfg)
        assert len(set(out.ids)) == len(out.ids)
