import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import case_study_tree
from shsthreat import dcm
from shsthreat.data import Dataset, SensorSchema
from shsthreat.dcm.logistic import lr_loss
from shsthreat.dcm.neural import loss_and_grad
from shsthreat.errors import DimensionMismatch, DivergenceDetected, EmptyDataset, UnsupportedActivation


def two_blobs(n=60, seed=0, n_s=2):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(-3, 0.5, size=(n, n_s)), rng.normal(3, 0.5, size=(n, n_s))])
    return Dataset(SensorSchema(tuple(f"s{i}" for i in range(n_s)), ("a", "b")), X, np.repeat([0, 1], n))


# ---- decision tree

def test_case_study_tree_example():
    P = np.full(8, 50.0)
    P[5], P[3], P[2] = 25, 120, 130
    assert case_study_tree().predict(P) == 1
    assert case_study_tree().depth == 5 and case_study_tree().n_leaves == 8


def test_tree_batch_matches_scalar(synthetic, dt_model):
    X = synthetic.X[:500]
    assert dt_model.predict_batch(X).tolist() == [dt_model.predict(x) for x in X]


def test_stump_picks_brute_force_gini_split():
    rng = np.random.default_rng(5)
    X = rng.integers(0, 10, size=(80, 3)).astype(float)
    y = (X[:, 1] + rng.integers(0, 3, 80) > 6).astype(int)
    ds = Dataset(SensorSchema(("a", "b", "c"), ("n", "p")), X, y)
    stump = dcm.train_dt(ds, max_depth=1, min_leaf_size=1).root
    best = None
    for a in range(3):
        vals = np.unique(X[:, a])
        for lo, hi in zip(vals[:-1], vals[1:]):
            t = (lo + hi) / 2
            g = 0.0
            for part in (y[X[:, a] <= t], y[X[:, a] > t]):
                p = np.bincount(part, minlength=2) / len(part)
                g += len(part) / len(y) * (1 - np.sum(p * p))
            if best is None or g < best[0] - 1e-12:
                best = (g, a, t)
    assert (stump.attr, stump.threshold) == (best[1], best[2])


def test_unbounded_tree_fits_distinct_points():
    ds = two_blobs(30)
    tree = dcm.train_dt(ds, max_depth=None, min_leaf_size=1)
    assert np.array_equal(tree.predict_batch(ds.X), ds.y)


def test_pure_data_gives_single_leaf():
    ds = Dataset(SensorSchema(("a", "b"), ("x", "y")), [[1, 2], [3, 4]], [1, 1])
    assert dcm.train_dt(ds).root.label == 1


def test_tree_accuracy(split, dt_model):
    assert dcm.evaluate(dt_model, split[1]).accuracy >= 0.9


def test_dimension_mismatch(dt_model, lr_model, nn_model):
    for m in (dt_model, lr_model, nn_model):
        with pytest.raises(DimensionMismatch):
            m.predict([1.0, 2.0])


# ---- logistic regression

def test_lr_without_training_predicts_lowest_label():
    m = dcm.train_lr(two_blobs(), iterations=0)
    assert set(m.predict_batch(two_blobs().X).tolist()) == {0}


def test_lr_separates_on_one_informative_sensor():
    rng = np.random.default_rng(2)
    x = np.concatenate([np.linspace(0, 1, 20), np.linspace(2, 3, 20)])
    X = np.column_stack([x, rng.normal(size=40)])
    ds = Dataset(SensorSchema(("x", "noise"), ("lo", "hi")), X, np.repeat([0, 1], 20))
    m = dcm.train_lr(ds, iterations=3000)
    assert np.array_equal(m.predict_batch(X), ds.y)


def test_lr_loss_decreases(split):
    tr = split[0]
    before = lr_loss(dcm.train_lr(tr, iterations=0), tr)
    after = lr_loss(dcm.train_lr(tr, iterations=50), tr)
    assert after <= before


def test_lr_raw_coefficients_reproduce_standardised_logits(lr_model, synthetic):
    Z = lr_model.scaler.transform(synthetic.X[:50])
    std_logits = Z @ lr_model.theta.T + lr_model.intercept
    np.testing.assert_allclose(lr_model.logits(synthetic.X[:50]), std_logits, rtol=1e-9, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.floats(-50, 50), st.integers(0, 99))
def test_lr_argmax_invariant_to_common_shift(c, row):
    rng = np.random.default_rng(row)
    theta, b = rng.normal(size=(4, 3)), rng.normal(size=4)
    m = dcm.LogisticRegressionModel(theta, b, dcm.Scaler(np.zeros(3), np.ones(3)))
    shifted = dcm.LogisticRegressionModel(theta, b + c, dcm.Scaler(np.zeros(3), np.ones(3)))
    X = rng.normal(size=(20, 3))
    assert np.array_equal(m.predict_batch(X), shifted.predict_batch(X))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_lr_divergence_detected():
    with pytest.raises(DivergenceDetected):
        dcm.train_lr(two_blobs(), step_size=float("nan"))


# ---- neural network

def test_nn_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    params = [rng.normal(size=(3, 3)), rng.normal(size=3), rng.normal(size=(2, 3)), rng.normal(size=2)]
    Z, y = rng.normal(size=(7, 3)), rng.integers(0, 2, 7)
    _, grads = loss_and_grad(params, Z, y)
    h = 1e-6
    for p, g in zip(params, grads):
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            up, _ = loss_and_grad(params, Z, y)
            p[idx] = old - h
            down, _ = loss_and_grad(params, Z, y)
            p[idx] = old
            assert abs((up - down) / (2 * h) - g[idx]) < 1e-4


def test_nn_learns_two_blobs():
    ds = two_blobs()
    m = dcm.train_nn(ds, hidden=(4,), epochs=50, step_size=1e-2)
    assert dcm.evaluate(m, ds).accuracy == 1.0


def test_nn_hand_forward_pass():
    W0 = np.array([[1.0, -1.0], [0.5, 0.5]])
    W1 = np.array([[1.0, 0.0], [0.0, 2.0]])
    m = dcm.NeuralNetworkModel((W0, W1), (np.array([0.0, -1.0]), np.array([0.0, 0.0])),
                               dcm.Scaler(np.array([1.0, 1.0]), np.array([2.0, 2.0])))
    # standardised input (1, 0); hidden relu(1, -0.5) = (1, 0); logits (1, 0)
    np.testing.assert_allclose(m.logits(np.array([[3.0, 1.0]])), [[1.0, 0.0]])
    assert m.predict([3.0, 1.0]) == 0
    assert m.predict([1.0, 9.0]) == 1  # hidden (0, 3.5) -> logits (0, 7)


def test_nn_rejects_other_activations():
    with pytest.raises(UnsupportedActivation):
        dcm.NeuralNetworkModel((np.eye(2),), (np.zeros(2),), dcm.Scaler(np.zeros(2), np.ones(2)), "tanh")


def test_nn_raw_layers_match_logits(nn_model, synthetic):
    h = synthetic.X[:40]
    for m, (W, b) in enumerate(nn_model.raw_layers()):
        h = h @ W.T + b
        if m < len(nn_model.weights) - 1:
            h = np.maximum(h, 0)
    np.testing.assert_allclose(h, nn_model.logits(synthetic.X[:40]))
    assert nn_model.layer_sizes == [8, *dcm.DEFAULT_HIDDEN, 6]


# ---- shared

def test_metrics_from_hand_confusion():
    cm = np.array([[5, 1, 0], [2, 3, 0], [0, 0, 0]])
    m = dcm.metrics_from_confusion(cm)
    assert m.accuracy == pytest.approx(8 / 11)
    assert m.precision == pytest.approx((5 / 7 + 3 / 4) / 2)
    assert m.recall == pytest.approx((5 / 6 + 3 / 5) / 2)
    f = [2 * p * r / (p + r) for p, r in ((5 / 7, 5 / 6), (3 / 4, 3 / 5))]
    assert m.f1 == pytest.approx(sum(f) / 2)
    with pytest.raises(EmptyDataset):
        dcm.metrics_from_confusion(np.zeros((2, 2)))


def test_evaluate_matches_sklearn(split, lr_model):
    from sklearn.metrics import accuracy_score, f1_score, precision_score, recall_score
    te = split[1]
    pred = lr_model.predict_batch(te.X)
    m = dcm.evaluate(lr_model, te)
    assert m.accuracy == pytest.approx(accuracy_score(te.y, pred))
    assert m.precision == pytest.approx(precision_score(te.y, pred, average="macro", zero_division=0))
    assert m.recall == pytest.approx(recall_score(te.y, pred, average="macro", zero_division=0))
    assert m.f1 == pytest.approx(f1_score(te.y, pred, average="macro", zero_division=0))


@pytest.mark.parametrize("name", ["dt_model", "lr_model", "nn_model"])
def test_model_round_trip(name, request, tmp_path, synthetic):
    m = request.getfixturevalue(name)
    dcm.save_model(m, tmp_path / "m.json", extra={"seed": 7})
    assert json.loads((tmp_path / "m.json").read_text())["provenance"] == {"seed": 7}
    back = dcm.load_model(tmp_path / "m.json")
    assert np.array_equal(back.predict_batch(synthetic.X[:300]), m.predict_batch(synthetic.X[:300]))


def test_unknown_kind_and_version():
    with pytest.raises(ValueError):
        dcm.model_from_dict({"version": 1, "kind": "svm"})
    with pytest.raises(ValueError):
        dcm.model_from_dict({"version": 99, "kind": "dt"})
    with pytest.raises(ValueError):
        dcm.train("svm", two_blobs())
