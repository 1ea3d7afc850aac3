import numpy as np
import pytest
from hypothesis import given, strategies as st

from ufitree.data import (
    CATEGORICAL, CONTINUOUS, ORDINAL,
    DataError, Dataset, FeatureKind, dummy_encode, fold_importances,
    inject_random_feature, load_csv, parse_schema,
)


def _write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestFeatureKind:
    def test_categorical_needs_cardinality(self):
        with pytest.raises(DataError):
            FeatureKind(CATEGORICAL, 1)
        with pytest.raises(DataError):
            FeatureKind("bogus")

    def test_binary_is_not_dummy_encoded(self):
        assert not FeatureKind("binary").is_categorical


class TestLoadCsv:
    def test_three_row_binary_target(self, tmp_path):
        path = _write(tmp_path, "x,label\n1.0,a\n2.0,b\n3.5,a\n")
        d = load_csv(path, target="label", task="classification")
        assert (d.n, d.p, d.n_classes) == (3, 1, 2)
        assert d.y.tolist() == [0, 1, 0]
        assert d.class_labels == ["a", "b"]

    def test_missing_value_reported_with_position(self, tmp_path):
        path = _write(tmp_path, "x,y\n1.0,0\n,1\n")
        with pytest.raises(DataError, match="missing value at row 2, column 'x'"):
            load_csv(path, target="y", task="classification")

    def test_parse_failure_reported_with_position(self, tmp_path):
        path = _write(tmp_path, "x,y\n1.0,0\noops,1\n")
        with pytest.raises(DataError, match="row 2, column 'x'"):
            load_csv(path, target="y", task="classification")

    def test_boston_shaped_file(self, tmp_path):
        # 14 columns, continuous target in the last column
        rng = np.random.default_rng(0)
        cols = [f"c{i}" for i in range(13)] + ["medv"]
        lines = [",".join(cols)]
        for _ in range(20):
            lines.append(",".join(f"{v:.3f}" for v in rng.standard_normal(14)))
        path = _write(tmp_path, "\n".join(lines) + "\n")
        d = load_csv(path, target="medv", task="regression")
        assert d.p == 13
        assert d.task == "regression"

    def test_categorical_levels_first_appearance_order(self, tmp_path):
        path = _write(tmp_path, "c,y\nred,0\nblue,1\nred,0\ngreen,1\n")
        d = load_csv(path, target="y", task="classification",
                     kinds={"c": FeatureKind(CATEGORICAL, 2)})
        assert d.level_maps["c"] == ["red", "blue", "green"]
        assert d.kinds[0].cardinality == 3
        assert d.X[:, 0].tolist() == [0.0, 1.0, 0.0, 2.0]

    def test_ragged_row_rejected(self, tmp_path):
        path = _write(tmp_path, "x,y\n1.0,0\n2.0\n")
        with pytest.raises(DataError, match="row 2"):
            load_csv(path, target="y", task="classification")


class TestParseSchema:
    def test_kinds_and_target(self):
        target, task, kinds = parse_schema({
            "target": "y",
            "task": "classification",
            "kinds": {"a": "continuous", "b": {"categorical": 4}, "c": "ordinal"},
        })
        assert target == "y" and task == "classification"
        assert kinds["b"] == FeatureKind(CATEGORICAL, 4)
        assert kinds["c"].kind == ORDINAL

    def test_target_required(self):
        with pytest.raises(DataError):
            parse_schema({"kinds": {}})


def _mixed_dataset(n=8, seed=0):
    rng = np.random.default_rng(seed)
    X = np.column_stack([
        rng.standard_normal(n),
        rng.integers(0, 4, size=n).astype(float),
    ])
    return Dataset(
        X=X, y=rng.integers(0, 2, size=n),
        feature_names=["cont", "cat"],
        kinds=[FeatureKind(CONTINUOUS), FeatureKind(CATEGORICAL, 4)],
        task="classification", n_classes=2,
    )


class TestDummyEncode:
    def test_one_hot_partition(self):
        d = _mixed_dataset()
        enc, gmap = dummy_encode(d)
        assert enc.p == 5
        block = enc.X[:, gmap.groups["cat"]]
        assert np.array_equal(block.sum(axis=1), np.ones(d.n))
        assert set(block.ravel()) <= {0.0, 1.0}

    def test_all_continuous_identity(self):
        rng = np.random.default_rng(1)
        d = Dataset(rng.standard_normal((5, 2)), rng.standard_normal(5),
                    ["a", "b"], [FeatureKind(CONTINUOUS)] * 2, "regression")
        enc, gmap = dummy_encode(d)
        assert np.array_equal(enc.X, d.X)
        assert gmap.groups == {}

    def test_paper_mixed_design_column_count(self):
        rng = np.random.default_rng(2)
        n = 30
        cards = [2, 4, 10, 20]
        cols = [rng.standard_normal(n)]
        kinds = [FeatureKind(CONTINUOUS)]
        names = ["x1"]
        for i, c in enumerate(cards):
            cols.append(rng.integers(0, c, size=n).astype(float))
            kinds.append(FeatureKind(CATEGORICAL, c))
            names.append(f"x{i + 2}")
        d = Dataset(np.column_stack(cols), rng.integers(0, 2, n), names, kinds,
                    "classification", 2)
        enc, _ = dummy_encode(d)
        assert enc.p == 1 + 2 + 4 + 10 + 20

    def test_encoded_matrix_is_finite(self):
        enc, _ = dummy_encode(_mixed_dataset())
        assert np.all(np.isfinite(enc.X))


class TestFoldImportances:
    def test_hand_sum(self):
        d = _mixed_dataset()
        _, gmap = dummy_encode(d)
        scores = np.array([0.1, 0.2, 0.3, 0.1, 0.05])
        names, folded = fold_importances(scores, gmap)
        assert names == ["cont", "cat"]
        assert folded[0] == pytest.approx(0.1)
        assert folded[1] == pytest.approx(0.65)

    def test_zero_scores_fold_to_zero(self):
        _, gmap = dummy_encode(_mixed_dataset())
        _, folded = fold_importances(np.zeros(5), gmap)
        assert np.array_equal(folded, np.zeros(2))

    def test_wrong_length_rejected(self):
        _, gmap = dummy_encode(_mixed_dataset())
        with pytest.raises(DataError):
            fold_importances(np.zeros(3), gmap)

    @given(st.lists(st.floats(-1e6, 1e6), min_size=5, max_size=5))
    def test_fold_preserves_total_sum(self, raw):
        _, gmap = dummy_encode(_mixed_dataset())
        scores = np.array(raw)
        _, folded = fold_importances(scores, gmap)
        assert folded.sum() == pytest.approx(scores.sum(), rel=1e-9, abs=1e-9)


class TestInjectRandomFeature:
    def test_reproducible_and_one_column(self):
        d = _mixed_dataset()
        d1 = inject_random_feature(d, seed=5)
        d2 = inject_random_feature(d, seed=5)
        assert d1.p == d.p + 1
        assert d1.feature_names[-1] == "random"
        assert np.array_equal(d1.X[:, -1], d2.X[:, -1])
        assert np.all(np.isfinite(d1.X[:, -1]))

    def test_independent_of_target(self):
        rng = np.random.default_rng(8)
        n = 10000
        d = Dataset(rng.standard_normal((n, 1)), rng.standard_normal(n),
                    ["x"], [FeatureKind(CONTINUOUS)], "regression")
        d2 = inject_random_feature(d, seed=17)
        corr = np.corrcoef(d2.X[:, -1], d2.y)[0, 1]
        assert abs(corr) < 0.03
