import logging

import numpy as np
import pytest

from litiscope.errors import TrainingError
from litiscope.featset import FeatureMatrix
from litiscope.litmodel import LitTrainConfig
from litiscope.resample import SmoteConfig
from litiscope.ttlmodel import (
    GROUP_ORDER,
    NestedHulls,
    NodePrediction,
    YearGroup,
    assign_year_groups,
    classify_nested,
    classify_nested_batch,
    hierarchy_adjust,
    node_group,
    predict_adjusted,
    predict_nodes,
    train_nested_hulls,
    train_per_node,
    year_group,
)

from oracles import polygon_distance_2d


class TestYearGroup:
    @pytest.mark.parametrize(
        "years,expected",
        [
            (0.0, YearGroup.G1),
            (0.5, YearGroup.G1),
            (1.0, YearGroup.G4),
            (3.999, YearGroup.G4),
            (4.0, YearGroup.G7),
            (5.2, YearGroup.G7),
            (7.0, YearGroup.G14),
            (13.999, YearGroup.G14),
        ],
    )
    def test_boundaries(self, years, expected):
        assert year_group(years) is expected

    @pytest.mark.parametrize("years", [14.0, 20.0])
    def test_out_of_range(self, years):
        with pytest.raises(ValueError, match="modeled range"):
            year_group(years)

    def test_negative_rejected(self):
        with pytest.raises(ValueError, match="nonnegative"):
            year_group(-0.1)

    def test_assign_drops_late_cases_with_warning(self, caplog):
        with caplog.at_level(logging.WARNING, logger="litiscope.ttlmodel"):
            groups, keep = assign_year_groups([0.5, 14.0, 6.0, 30.0])
        assert groups == [YearGroup.G1, YearGroup.G7]
        assert keep.tolist() == [True, False, True, False]
        assert "2 litigated case(s)" in caplog.text

    def test_assign_quiet_when_nothing_dropped(self, caplog):
        with caplog.at_level(logging.WARNING, logger="litiscope.ttlmodel"):
            groups, keep = assign_year_groups([0.5, 8.0])
        assert groups == [YearGroup.G1, YearGroup.G14]
        assert keep.all()
        assert caplog.text == ""


class TestHierarchyAdjust:
    def test_inner_positive_propagates_outward(self):
        adj = hierarchy_adjust(NodePrediction(by_1=True, by_4=False, by_7=False))
        assert adj == NodePrediction(True, True, True, True)

    def test_middle_positive(self):
        adj = hierarchy_adjust(NodePrediction(by_1=False, by_4=True, by_7=False))
        assert adj == NodePrediction(False, True, True, True)

    def test_root_always_true(self):
        adj = hierarchy_adjust(NodePrediction(by_1=False, by_4=False, by_7=False))
        assert adj == NodePrediction(False, False, False, True)

    def test_random_predictions_upward_closed(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            bits = rng.integers(0, 2, size=3).astype(bool)
            adj = hierarchy_adjust(NodePrediction(*bits))
            chain = (adj.by_1, adj.by_4, adj.by_7, adj.by_14)
            assert all(not a or b for a, b in zip(chain, chain[1:]))
            assert adj.by_14

    def test_node_group_reads_innermost(self):
        assert node_group(NodePrediction(True, True, True, True)) is YearGroup.G1
        assert node_group(NodePrediction(False, True, True, True)) is YearGroup.G4
        assert node_group(NodePrediction(False, False, True, True)) is YearGroup.G7
        assert node_group(NodePrediction(False, False, False, True)) is YearGroup.G14


def group_blobs(n_per=18, seed=0):
    """Four well-separated 2-D blobs, one per year group."""
    rng = np.random.default_rng(seed)
    centers = {
        YearGroup.G1: (8.0, 8.0),
        YearGroup.G4: (-8.0, 8.0),
        YearGroup.G7: (8.0, -8.0),
        YearGroup.G14: (-8.0, -8.0),
    }
    rows, groups = [], []
    for group in GROUP_ORDER:
        rows.append(rng.normal(centers[group], 0.8, size=(n_per, 2)))
        groups.extend([group] * n_per)
    X = np.vstack(rows)
    return FeatureMatrix(X, tuple(f"R{i}" for i in range(len(X)))), groups


def node_config(seed=0):
    return LitTrainConfig(
        clusters_per_class=2,
        smote=SmoteConfig(2, 1, k_neighbors=3),
        n_trees=15,
        gamma=0.2,
        svm_C=1.0,
        seed=seed,
    )


class TestPerNode:
    def test_learns_separable_groups(self):
        matrix, groups = group_blobs()
        models = train_per_node(matrix, groups, node_config())
        adjusted = predict_adjusted(models, matrix)
        predicted = [node_group(p) for p in adjusted]
        accuracy = np.mean([p is g for p, g in zip(predicted, groups)])
        assert accuracy >= 0.9

    def test_deterministic(self):
        matrix, groups = group_blobs(seed=3)
        a = predict_nodes(train_per_node(matrix, groups, node_config(7)), matrix)
        b = predict_nodes(train_per_node(matrix, groups, node_config(7)), matrix)
        assert a == b

    def test_all_one_group_rejected(self):
        matrix, _ = group_blobs()
        groups = [YearGroup.G1] * len(matrix.ids)
        with pytest.raises(TrainingError, match="by_1"):
            train_per_node(matrix, groups, node_config())

    def test_missing_inner_group_rejected(self):
        matrix, groups = group_blobs()
        groups = [YearGroup.G7 if g is YearGroup.G1 else g for g in groups]
        with pytest.raises(TrainingError, match="by_1"):
            train_per_node(matrix, groups, node_config())

    def test_pure_mode_skips_hull_stage(self):
        matrix, groups = group_blobs(seed=5)
        cluster = train_per_node(matrix, groups, node_config())
        pure = train_per_node(matrix, groups, node_config(), pure=True)
        assert pure.pure and not cluster.pure
        # Pure predictions come straight from the ensembles.
        from litiscope.litmodel import score_pure_batch

        votes = predict_nodes(pure, matrix)
        direct = score_pure_batch(pure.by_1.ensemble, matrix.values)
        assert [p.by_1 for p in votes] == list(direct)

    def test_group_length_mismatch(self):
        matrix, groups = group_blobs()
        with pytest.raises(ValueError, match="align"):
            train_per_node(matrix, groups[:-1], node_config())


class TestNestedHulls:
    def test_layers_nested_and_counts_cumulative(self):
        matrix, groups = group_blobs(seed=2)
        nested = train_nested_hulls(matrix, groups, k=2, seed=0)
        assert nested.k == 2
        counts = np.array([sum(g is gr for g in groups) for gr in GROUP_ORDER])
        for s in range(4):
            total = sum(nested.layers[c][s].shape[0] for c in range(2))
            assert total == counts[: s + 1].sum()
        for c in range(2):
            for s in range(3):
                inner = {tuple(p) for p in nested.layers[c][s]}
                outer = {tuple(p) for p in nested.layers[c][s + 1]}
                assert inner <= outer

    def test_single_cluster_sizes_monotone(self):
        matrix, groups = group_blobs(seed=4)
        nested = train_nested_hulls(matrix, groups, k=1, seed=0)
        sizes = [nested.layers[0][s].shape[0] for s in range(4)]
        assert sizes == sorted(sizes)

    def test_equidistant_row_joins_lowest_cluster(self):
        X = np.array([[-1.0, 0.0], [1.0, 0.0], [0.0, 0.0]])
        groups = [YearGroup.G1, YearGroup.G1, YearGroup.G4]
        matrix = FeatureMatrix(X, ("a", "b", "c"))
        nested = train_nested_hulls(matrix, groups, k=2, seed=0)
        sizes4 = tuple(nested.layers[c][1].shape[0] for c in range(2))
        assert sizes4 == (2, 1)

    def test_expansion_matches_hull_distance_oracle(self):
        # Two far-apart inner blobs; every later row must join the cluster
        # whose stage-start hull the 2-D oracle says is nearer.
        rng = np.random.default_rng(6)
        inner = np.vstack([
            rng.normal((-10.0, 0.0), 0.5, size=(6, 2)),
            rng.normal((10.0, 0.0), 0.5, size=(6, 2)),
        ])
        mid = rng.uniform(-14, 14, size=(20, 2))
        X = np.vstack([inner, mid])
        groups = [YearGroup.G1] * 12 + [YearGroup.G4] * 20
        matrix = FeatureMatrix(X, tuple(f"R{i}" for i in range(32)))
        nested = train_nested_hulls(matrix, groups, k=2, seed=1)
        layer1 = [nested.layers[c][0] for c in range(2)]
        for row in mid:
            d = [polygon_distance_2d(layer1[c], row) for c in range(2)]
            if abs(d[0] - d[1]) < 1e-9:
                continue
            expect = int(np.argmin(d))
            member = [
                any(np.allclose(row, p) for p in nested.layers[c][1]) for c in range(2)
            ]
            assert member[expect] and not member[1 - expect]

    def test_empty_inner_group_rejected(self):
        matrix, groups = group_blobs()
        groups = [YearGroup.G4 if g is YearGroup.G1 else g for g in groups]
        with pytest.raises(TrainingError, match="within a year"):
            train_nested_hulls(matrix, groups, k=2, seed=0)

    def test_too_few_inner_rows_rejected(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
        groups = [YearGroup.G1, YearGroup.G4, YearGroup.G7]
        with pytest.raises(TrainingError, match="clusters"):
            train_nested_hulls(FeatureMatrix(X, ("a", "b", "c")), groups, k=3, seed=0)

    def test_deterministic(self):
        matrix, groups = group_blobs(seed=8)
        a = train_nested_hulls(matrix, groups, k=3, seed=5)
        b = train_nested_hulls(matrix, groups, k=3, seed=5)
        for c in range(3):
            for s in range(4):
                assert np.array_equal(a.layers[c][s], b.layers[c][s])


def square(half):
    return np.array([[-half, -half], [-half, half], [half, half], [half, -half]])


@pytest.fixture(scope="module")
def squares():
    layers = tuple(square(h) for h in (1.0, 2.0, 3.0, 4.0))
    return NestedHulls(layers=(layers,), k=1)


class TestClassifyNested:

    @pytest.mark.parametrize(
        "point,expected",
        [
            ((0.0, 0.0), YearGroup.G1),
            ((0.99, 0.0), YearGroup.G1),
            ((1.5, 0.0), YearGroup.G4),
            ((2.5, 2.0), YearGroup.G7),
            ((3.5, 0.0), YearGroup.G14),
            ((9.0, 9.0), YearGroup.G14),
        ],
    )
    def test_innermost_containing_square(self, squares, point, expected):
        assert classify_nested(squares, np.array(point)) is expected

    def test_outside_all_layers_is_outermost_group(self, squares):
        assert classify_nested(squares, np.array([100.0, -40.0])) is YearGroup.G14

    def test_batch_matches_scalar(self, squares):
        rng = np.random.default_rng(9)
        pts = rng.uniform(-5, 5, size=(40, 2))
        batch = classify_nested_batch(squares, pts)
        assert batch == [classify_nested(squares, p) for p in pts]

    def test_training_rows_classify_at_or_inside_own_group(self):
        matrix, groups = group_blobs(seed=10)
        nested = train_nested_hulls(matrix, groups, k=2, seed=0)
        predicted = classify_nested_batch(nested, matrix)
        for pred, actual in zip(predicted, groups):
            assert pred.value <= actual.value

    def test_multiple_containing_clusters_same_layer(self):
        # Overlapping layer-1 squares from two clusters still yield G1.
        layers = ((square(1.0),) * 4, (square(1.5),) * 4)
        nested = NestedHulls(layers=layers, k=2)
        assert classify_nested(nested, np.array([0.2, 0.2])) is YearGroup.G1
