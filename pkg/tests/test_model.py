import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kfair.exceptions import InputError
from kfair.model import (DenseLayer, Network, NetworkClassifier, favorable_margin, forward,
                         forward_all, load_network, predict_label, save_network, score,
                         sigmoid)

from conftest import random_network


def test_forward_matches_manual_computation():
    W1, b1 = np.array([[1.0, -1.0], [2.0, 0.5]]), np.array([0.0, -1.0])
    W2, b2 = np.array([[1.0, 1.0]]), np.array([0.25])
    net = Network((DenseLayer(W1, b1), DenseLayer(W2, b2, "identity")))
    x = np.array([0.5, 1.0])
    h = np.maximum(W1 @ x + b1, 0)
    assert forward(net, x) == pytest.approx(W2 @ h + b2)
    assert score(net, x) == pytest.approx(1 / (1 + np.exp(-(W2 @ h + b2)[0])))


def test_two_output_score_is_softmax_entry_and_sigmoid_of_margin():
    rng = np.random.default_rng(0)
    net = random_network(rng, [3, 4, 2])
    net = Network(net.layers, favorable_output_index=1)
    X = rng.normal(size=(10, 3))
    logits = forward(net, X)
    p = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
    assert np.allclose(score(net, X), p[:, 1])
    assert np.allclose(score(net, X), sigmoid(favorable_margin(net, logits)))


def test_predict_label_ties_go_to_lowest_index():
    net = Network((DenseLayer(np.zeros((2, 2)), np.zeros(2), "identity"),))
    assert predict_label(net, np.zeros(2)) == 0


def test_single_output_label_threshold():
    net = Network((DenseLayer(np.array([[1.0]]), np.array([0.0]), "identity"),))
    assert predict_label(net, np.array([0.0])) == 0
    assert predict_label(net, np.array([1e-3])) == 1


def test_forward_all_last_entry_is_logits():
    rng = np.random.default_rng(3)
    net = random_network(rng, [4, 5, 3, 1])
    X = rng.normal(size=(6, 4))
    assert np.allclose(forward_all(net, X)[-1], forward(net, X))


@pytest.mark.parametrize("bad", [
    dict(weights=[[1.0, 2.0]], bias=[0.0, 1.0]),
    dict(weights=[[np.nan]], bias=[0.0]),
    dict(weights=[[1.0]], bias=[0.0], activation="tanh"),
])
def test_dense_layer_rejects_bad_parameters(bad):
    with pytest.raises(InputError):
        DenseLayer(**bad)


def test_network_checks_shapes_and_activations():
    with pytest.raises(InputError):
        Network((DenseLayer(np.ones((2, 3)), np.zeros(2)),
                 DenseLayer(np.ones((1, 3)), np.zeros(1), "identity")))
    with pytest.raises(InputError):
        Network((DenseLayer(np.ones((1, 3)), np.zeros(1), "relu"),))
    with pytest.raises(InputError):
        Network((DenseLayer(np.ones((1, 3)), np.zeros(1), "identity"),),
                favorable_output_index=1)


def test_wrong_input_width_is_rejected():
    net = random_network(np.random.default_rng(0), [3, 2, 1])
    with pytest.raises(InputError):
        forward(net, np.zeros(4))


def test_json_round_trip(tmp_path):
    net = random_network(np.random.default_rng(1), [3, 4, 2])
    path = tmp_path / "m.json"
    save_network(net, path)
    back = load_network(path)
    assert all(np.array_equal(a.weights, b.weights) for a, b in zip(net.layers, back.layers))
    assert back.favorable_output_index == net.favorable_output_index


def test_load_errors_name_the_problem(tmp_path):
    with pytest.raises(InputError, match="not found"):
        load_network(tmp_path / "missing.json")
    doc = random_network(np.random.default_rng(1), [3, 2, 1]).to_dict()
    doc["layers"][1]["weights"] = [[1.0, 2.0, 3.0]]
    (tmp_path / "bad.json").write_text(json.dumps(doc))
    with pytest.raises(InputError, match="layer 1"):
        load_network(tmp_path / "bad.json")


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=20))
def test_sigmoid_is_bounded_and_monotone(ts):
    t = np.sort(np.array(ts))
    s = sigmoid(t)
    assert np.all((s >= 0) & (s <= 1))
    assert np.all(np.diff(s) >= 0)


def test_network_classifier_probabilities():
    rng = np.random.default_rng(2)
    net = random_network(rng, [3, 4, 1])
    X = rng.normal(size=(8, 3))
    clf = NetworkClassifier(net).fit(X)
    proba = clf.predict_proba(X)
    assert proba.shape == (8, 2)
    assert np.allclose(proba.sum(axis=1), 1.0)
    assert np.array_equal(clf.predict(X), predict_label(net, X))
