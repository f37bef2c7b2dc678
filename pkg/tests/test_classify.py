import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from floodscope.classify import (
    CentroidModel,
    ConfusionMatrix,
    DecisionTree,
    ForestModel,
    LabeledDataset,
    best_split,
    classification_metrics,
    classify_raster,
    compare_classifiers,
    confusion_matrix,
    deserialize_model,
    fit_tree,
    format_samples_csv,
    parse_samples_csv,
    predict_labels,
    serialize_model,
    stratified_split,
    train_gaussian_nb,
    train_linear_svm,
    train_min_distance,
    train_random_forest,
)
from floodscope.errors import (
    ClassAbsent,
    DimensionMismatch,
    EmptyDataset,
    EmptyMatrix,
    InvalidFeature,
    LabelOutOfRange,
    LengthMismatch,
    ModelFormatError,
    ParseError,
    SingleSample,
)
from floodscope.raster import Band, GeoTransform, Mask, RasterGrid
from floodscope.synth import checkerboard_label, generate_checkerboard_dataset

import oracles


def ds_of(X, y, n_classes=None):
    y = np.asarray(y)
    n_classes = n_classes or int(y.max()) + 1
    return LabeledDataset(np.asarray(X, dtype=float), y, [f"c{k}" for k in range(n_classes)], ())


def blobs(seed=0, n=200):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(0, 0.5, (n // 2, 2)), rng.normal(5, 0.5, (n // 2, 2))])
    return ds_of(X, [0] * (n // 2) + [1] * (n // 2))


@pytest.fixture(scope="module")
def board():
    return generate_checkerboard_dataset(4, 2000, 0.0, seed=7)


class TestDataset:
    def test_rejects_nan_and_bad_labels(self):
        with pytest.raises(ValueError):
            ds_of([[np.nan]], [0])
        with pytest.raises(LabelOutOfRange):
            LabeledDataset([[0.0]], [3], ["a", "b"], ())
        with pytest.raises(EmptyDataset):
            LabeledDataset(np.empty((0, 2)), [], ["a"], ())

    def test_csv_round_trip(self, rng):
        ds = LabeledDataset(rng.random((20, 3)), rng.integers(0, 3, 20), ("rice", "maize", "cotton"), ("b", "g", "r"))
        back = parse_samples_csv(format_samples_csv(ds), class_names=ds.class_names)
        assert np.array_equal(back.features, ds.features) and np.array_equal(back.labels, ds.labels)
        assert back.feature_names == ("b", "g", "r")

    def test_csv_integer_labels(self):
        ds = parse_samples_csv("label,x\n0,1.5\n2,3\n")
        assert ds.class_names == ("class_0", "class_1", "class_2")
        assert ds.labels.tolist() == [0, 2]

    def test_csv_errors_carry_line(self):
        with pytest.raises(ParseError, match="s.csv:3"):
            parse_samples_csv("label,x\n0,1\n1,abc\n", source="s.csv")
        with pytest.raises(EmptyDataset):
            parse_samples_csv("label,x\n")

    def test_stratified_split_80_20(self, board):
        train, val = stratified_split(board, 0.2, seed=7)
        assert train.n_samples == 1600 and val.n_samples == 400
        assert val.class_counts().tolist() == [200, 200]
        again = stratified_split(board, 0.2, seed=7)[1]
        assert np.array_equal(val.features, again.features)


class TestGiniSplit:
    @settings(max_examples=100)
    @given(st.data())
    def test_matches_exhaustive_scan(self, data):
        n = data.draw(st.integers(2, 50))
        d = data.draw(st.integers(1, 4))
        C = data.draw(st.integers(2, 4))
        X = data.draw(st.lists(st.lists(st.integers(0, 6).map(float), min_size=d, max_size=d), min_size=n, max_size=n))
        y = data.draw(st.lists(st.integers(0, C - 1), min_size=n, max_size=n))
        got = best_split(np.array(X), np.array(y), C, range(d))
        want = oracles.exhaustive_best_split(X, y, C, range(d))
        if want is None:
            assert got is None
        else:
            assert got[:2] == want[:2]
            assert 1 - got[2] / n == pytest.approx(float(want[2]), abs=1e-12)

    def test_tie_goes_to_lowest_feature(self):
        X = np.array([[0, 0], [1, 1]], dtype=float)
        assert best_split(X, np.array([0, 1]), 2, [1, 0])[:2] == (0, 0.5)

    def test_constant_feature_has_no_split(self):
        assert best_split(np.ones((4, 1)), np.array([0, 1, 0, 1]), 2, [0]) is None

    def test_root_of_full_feature_tree_matches_oracle(self, rng):
        X = rng.integers(0, 5, (30, 3)).astype(float)
        y = rng.integers(0, 3, 30)
        tree = fit_tree(X, y, 3, np.random.default_rng(0), n_features_per_split=3)
        f, thr, _ = oracles.exhaustive_best_split(X.tolist(), y.tolist(), 3, range(3))
        assert (tree.feature[0], tree.threshold[0]) == (f, thr)


class TestForest:
    def test_single_class_everywhere(self, rng):
        ds = LabeledDataset(rng.random((10, 2)), np.zeros(10, int), ["only"], ())
        model = train_random_forest(ds, n_trees=5)
        assert (predict_labels(model, rng.random((7, 2))) == 0).all()

    def test_errors(self):
        with pytest.raises(SingleSample):
            train_random_forest(LabeledDataset([[0.0]], [0], ["a", "b"], ()))
        with pytest.raises(ValueError):
            train_random_forest(blobs(), n_trees=0)

    def test_checkerboard_held_out(self, board):
        train, val = stratified_split(board, 0.2, seed=7)
        model = train_random_forest(train, n_trees=50, seed=7)
        held_out = (predict_labels(model, val.features) == val.labels).mean()
        training = (predict_labels(model, train.features) == train.labels).mean()
        assert held_out >= 0.90 and training >= held_out

    def test_deterministic_across_runs_and_threads(self):
        ds = blobs(3)
        a = serialize_model(train_random_forest(ds, n_trees=12, seed=5, n_jobs=1))
        b = serialize_model(train_random_forest(ds, n_trees=12, seed=5, n_jobs=1))
        c = serialize_model(train_random_forest(ds, n_trees=12, seed=5, n_jobs=4))
        assert a == b == c

    def test_constant_depth_zero_tree(self):
        tree = DecisionTree([-1], [0.0], [-1], [-1], [[0, 0, 10]])
        model = ForestModel((tree,), 1, 0, ("a", "b", "c"), ("x",), 0, 1)
        assert predict_labels(model, np.zeros((4, 1))).tolist() == [2, 2, 2, 2]

    def test_vote_tie_goes_to_lowest_class(self):
        t0 = DecisionTree([-1], [0.0], [-1], [-1], [[0, 5]])
        t1 = DecisionTree([-1], [0.0], [-1], [-1], [[5, 0]])
        model = ForestModel((t0, t1), 1, 0, ("a", "b"), ("x",), 0, 1)
        assert predict_labels(model, [[0.0]]).tolist() == [0]


class TestOtherModels:
    def test_svm_separable_blobs(self):
        ds = blobs()
        model = train_linear_svm(ds, seed=1)
        assert (predict_labels(model, ds.features) == ds.labels).mean() >= 0.99

    def test_svm_lambda_must_be_positive(self):
        with pytest.raises(ValueError):
            train_linear_svm(blobs(), lam=0.0)

    def test_nb_hand_computed(self):
        model = train_gaussian_nb(ds_of([[-1], [0], [1], [9], [10], [11]], [0, 0, 0, 1, 1, 1]))
        # equal variances, means 0 and 10: the likelihoods tie exactly at x = 5
        assert predict_labels(model, [[5.0], [5.5], [6.0], [4.0]]).tolist() == [0, 1, 1, 0]

    def test_nb_identical_classes_tie_low(self):
        model = train_gaussian_nb(ds_of([[0], [1], [0], [1]], [0, 0, 1, 1]))
        assert predict_labels(model, [[0.3], [7.0]]).tolist() == [0, 0]

    def test_nb_priors_and_smoothing(self):
        model = train_gaussian_nb(ds_of([[1, 2], [1, 3], [1, 9]], [0, 0, 1]))
        assert model.priors.sum() == pytest.approx(1.0, abs=1e-9)
        assert (model.variances > 0).all()
        assert np.isfinite(model.log_joint(np.array([[1.0, 4.0]]))).all()

    def test_nb_and_centroid_need_every_class(self):
        ds = LabeledDataset([[0.0], [1.0]], [0, 0], ["a", "b"], ())
        with pytest.raises(ClassAbsent):
            train_gaussian_nb(ds)
        with pytest.raises(ClassAbsent):
            train_min_distance(ds)

    def test_centroid_examples(self):
        model = train_min_distance(ds_of([[0, 0], [4, 0]], [0, 1]))
        assert predict_labels(model, [[1, 0], [2, 0], [3.5, 0]]).tolist() == [0, 0, 1]

    def test_prediction_contract(self):
        model = CentroidModel([[0.0, 0.0]], ("a",), ("x", "y"))
        with pytest.raises(DimensionMismatch):
            predict_labels(model, [[0.0]])
        with pytest.raises(InvalidFeature):
            predict_labels(model, [[np.nan, 0.0]])

    def test_forest_beats_centroid_on_checkerboard(self, board):
        _, rows = compare_classifiers(board, ("forest", "min_distance"), seed=7, params={"forest": {"n_trees": 30}})
        forest, centroid = rows
        assert forest.validation_accuracy > centroid.validation_accuracy
        assert centroid.validation_accuracy <= 0.7


class TestSerialization:
    @pytest.mark.parametrize("kind", ["forest", "svm", "naive_bayes", "min_distance"])
    def test_round_trip(self, kind):
        ds = blobs(2, 60)
        models, _ = compare_classifiers(ds, (kind,), seed=3, params={"forest": {"n_trees": 4}, "svm": {"epochs": 3}})
        model = models[kind]
        data = serialize_model(model)
        back = deserialize_model(data)
        assert serialize_model(back) == data
        assert np.array_equal(predict_labels(back, ds.features), predict_labels(model, ds.features))

    def test_rejects_garbage(self):
        data = serialize_model(train_min_distance(blobs()))
        with pytest.raises(ModelFormatError):
            deserialize_model(b"XXXX" + data[4:])
        with pytest.raises(ModelFormatError):
            deserialize_model(data + b"\0")
        with pytest.raises(ModelFormatError):
            deserialize_model(data[:-3])


class TestMetrics:
    def test_confusion_examples(self):
        assert np.array_equal(confusion_matrix([0, 1, 2], [0, 1, 2], 3).counts, np.eye(3))
        assert confusion_matrix([0, 0, 1, 1], [0, 1, 1, 1], 2).counts.tolist() == [[1, 1], [0, 2]]
        with pytest.raises(LengthMismatch):
            confusion_matrix([0], [0, 1], 2)
        with pytest.raises(LabelOutOfRange):
            confusion_matrix([0], [2], 2)

    @pytest.mark.parametrize(
        "cm",
        [
            [[2, 0], [0, 2]],
            [[1, 1], [1, 1]],
            [[5, 1, 0], [2, 3, 1], [0, 0, 4]],
            [[3, 0], [3, 0]],
            [[0, 4, 1], [1, 0, 0], [2, 2, 7]],
            [[10, 0, 0, 0], [0, 0, 0, 0], [1, 2, 3, 4], [0, 0, 5, 5]],
        ],
    )
    def test_hand_computed(self, cm):
        got = classification_metrics(ConfusionMatrix(cm))
        for g, w in zip((got.accuracy, got.precision, got.recall, got.f1), oracles.scores(cm)):
            assert g == pytest.approx(float(w), abs=1e-12)

    def test_all_halves(self):
        s = classification_metrics(ConfusionMatrix([[1, 1], [1, 1]]))
        assert (s.accuracy, s.precision, s.recall, s.f1) == (0.5, 0.5, 0.5, 0.5)

    @given(st.lists(st.integers(0, 50), min_size=9, max_size=9).filter(any), st.sampled_from([2, 10, 1000]))
    def test_scale_invariance(self, flat, k):
        cm = np.array(flat).reshape(3, 3)
        a = classification_metrics(ConfusionMatrix(cm))
        b = classification_metrics(ConfusionMatrix(cm * k))
        for x, y in zip((a.accuracy, a.precision, a.recall, a.f1), (b.accuracy, b.precision, b.recall, b.f1)):
            assert x == pytest.approx(y, abs=1e-12)

    def test_weighted_average(self):
        s = classification_metrics(ConfusionMatrix([[3, 0], [3, 0]]), average="weighted")
        assert s.recall == 0.5 and s.precision == pytest.approx(0.25)

    def test_empty(self):
        with pytest.raises(EmptyMatrix):
            classification_metrics(ConfusionMatrix([[0, 0], [0, 0]]))


class TestClassifyRaster:
    GT = GeoTransform(0.0, 0.0, 30.0, 30.0)

    def grid(self, rng, size=8):
        return RasterGrid(self.GT, [Band("x", rng.random((size, size))), Band("y", rng.random((size, size)))])

    def test_equals_flattened_prediction(self, rng):
        g = self.grid(rng)
        model = train_min_distance(ds_of(rng.random((40, 2)), np.arange(40) % 3))
        out = classify_raster(model, g, ["x", "y"])
        flat = np.column_stack([g["x"].ravel(), g["y"].ravel()])
        assert np.array_equal(out["class"].ravel(), predict_labels(model, flat))

    def test_validity_and_nan(self, rng):
        g = self.grid(rng, 4)
        model = CentroidModel([[0.0, 0.0]], ("a",), ("x", "y"))
        assert (classify_raster(model, g, ["x", "y"])["class"] == 0).all()
        empty = Mask(np.zeros((4, 4), bool), self.GT)
        assert np.isnan(classify_raster(model, g, ["x", "y"], empty)["class"]).all()

    def test_dimension_mismatch(self, rng):
        model = CentroidModel([[0.0]], ("a",), ("x",))
        with pytest.raises(DimensionMismatch):
            classify_raster(model, self.grid(rng), ["x", "y"])


class TestCheckerboard:
    def test_clean_labels_match_analytic_parity(self, board):
        X = board.features.astype(np.float64)
        assert np.array_equal(checkerboard_label(X[:, 0], X[:, 1], 4), board.labels)

    def test_single_cell(self):
        ds = generate_checkerboard_dataset(1, 10)
        assert ds.n_classes == 1 and (ds.labels == 0).all()

    def test_deterministic(self):
        a = generate_checkerboard_dataset(4, 100, 0.05, seed=7)
        b = generate_checkerboard_dataset(4, 100, 0.05, seed=7)
        assert np.array_equal(a.features, b.features)
