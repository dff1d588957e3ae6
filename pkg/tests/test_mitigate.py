import math

import numpy as np
import pytest

from kfair.cluster import DiscriminationRecord
from kfair.data import Dataset
from kfair.exceptions import DivergenceError, InputError, SchemaError
from kfair.explain import CategoricalAtom, ExplanationPredicate, NumericAtom
from kfair.mitigate import (DEBIASED, ORIGINAL, ORIGINAL_DT, FineTuneConfig, GuardedModel,
                            accuracy, augment_dataset, evaluate_mitigation, fine_tune,
                            fine_tune_history, guard_score, loss_and_gradients)
from kfair.model import DenseLayer, Network, predict_label
from kfair.search import SearchConfig

from conftest import gradient_errors, random_network

PLANT_GUARD = ExplanationPredicate((NumericAtom("age", 29, 50, True),
                                    NumericAtom("hours_per_week", 39, 60, True),
                                    CategoricalAtom("workclass", ("Private", "Self-emp-inc"))))


@pytest.mark.parametrize("outputs", [1, 2])
def test_gradient_check(outputs):
    rng = np.random.default_rng(outputs)
    net = random_network(rng, [4, 6, 5, outputs])
    X, y = rng.normal(size=(9, 4)), rng.integers(0, 2, 9)
    assert gradient_errors(net, X, y, loss_and_gradients).max() <= 1e-5


def _labelled(schema, net, n=200, seed=0):
    rng = np.random.default_rng(seed)
    rows = [schema.random_instance(rng) for _ in range(n)]
    ds = Dataset(schema, rows)
    return Dataset(schema, rows, predict_label(net, ds.X))


def test_zero_epochs_is_identity(small_schema):
    net = random_network(np.random.default_rng(0), [small_schema.input_width, 5, 1])
    ds = _labelled(small_schema, net)
    tuned = fine_tune(net, ds, FineTuneConfig(epochs=0))
    for a, b in zip(net.layers, tuned.layers):
        assert np.array_equal(a.weights, b.weights) and np.array_equal(a.bias, b.bias)


def test_loss_decreases(small_schema):
    rng = np.random.default_rng(1)
    net = random_network(rng, [small_schema.input_width, 6, 1])
    ds = _labelled(small_schema, net)
    ds = Dataset(small_schema, ds.rows, rng.integers(0, 2, len(ds)))
    start = loss_and_gradients(net, ds.X, ds.labels)[0]
    _, hist = fine_tune_history(net, ds, FineTuneConfig(epochs=8, learning_rate=0.05,
                                                        batch_size=len(ds)))
    assert hist[-1] < start
    assert all(b <= a + 1e-12 for a, b in zip(hist, hist[1:]))


def test_divergence_names_epoch(small_schema):
    net = random_network(np.random.default_rng(2), [small_schema.input_width, 6, 1], scale=5)
    ds = _labelled(small_schema, net)
    ds = Dataset(small_schema, ds.rows, 1 - ds.labels)
    with pytest.raises(DivergenceError, match="epoch 1"):
        fine_tune(net, ds, FineTuneConfig(epochs=3, learning_rate=1e300))


def test_fine_tune_config_validation():
    with pytest.raises(InputError):
        FineTuneConfig(batch_size=0)


def _one_hot_net(schema, feature, weight, bias):
    w = np.zeros(schema.input_width)
    w[schema.layout[feature].start] = weight
    return Network((DenseLayer(w[None, :], np.array([bias]), "identity"),))


@pytest.mark.parametrize("feature,weight,bias,expected", [
    ("race", -10.0, 1.0, 1),   # race x -> 0, y and z -> 1: four of six favorable
    ("race", 10.0, -1.0, 0),   # race x -> 1, others -> 0: four of six unfavorable
    ("sex", -10.0, 1.0, 1),    # three against three: ties go to favorable
])
def test_majority_label(small_schema, feature, weight, bias, expected):
    net = _one_hot_net(small_schema, feature, weight, bias)
    inst = {"age": 30, "income": 1.0, "job": "a", "sex": "F", "race": "y"}
    base = Dataset(small_schema, [dict(inst, age=40)], np.array([0]))
    rec = DiscriminationRecord(inst, [0.0] * 6, [0] * 6, 2)
    aug = augment_dataset(base, [rec], small_schema, net)
    assert len(aug) == 7
    assert aug.labels[1:].tolist() == [expected] * 6


def test_augmentation_skips_existing_rows(small_schema):
    net = _one_hot_net(small_schema, "race", -10.0, 1.0)
    inst = {"age": 30, "income": 1.0, "job": "a", "sex": "F", "race": "y"}
    base = Dataset(small_schema, [inst], np.array([0]))
    rec = DiscriminationRecord(inst, [0.0] * 6, [0] * 6, 2)
    assert len(augment_dataset(base, [rec], small_schema, net)) == 6


def test_guards_reject_protected_atoms(planted12):
    schema, _, net, _ = planted12
    bad = ExplanationPredicate((CategoricalAtom("sex", ("Male",)),))
    with pytest.raises(SchemaError):
        GuardedModel(net, schema, [bad])


def test_unfired_guard_is_transparent(planted12):
    schema, _, net, ds = planted12
    never = ExplanationPredicate((NumericAtom("age", 1000, None, True),))
    g = GuardedModel(net, schema, [never])
    assert np.array_equal(g.predict_batch(ds.X), predict_label(net, ds.X))
    assert accuracy(g, ds) == (accuracy(net, ds)[0], 0.0)


def test_guard_abstains_inside(planted12):
    schema, plant, net, ds = planted12
    g = GuardedModel(net, schema, [PLANT_GUARD])
    inside = [r for r in ds.rows if PLANT_GUARD.holds(r)]
    out = guard_score(g, inside[0])
    assert out.guarded and math.isnan(out.score)
    fixed = GuardedModel(net, schema, [PLANT_GUARD], policy=0.3)
    assert guard_score(fixed, inside[0]).score == 0.3
    acc, abstain = accuracy(g, ds)
    assert abstain == pytest.approx(100.0 * len(inside) / len(ds))


def test_guard_reduces_success_rate(planted12):
    schema, _, net, ds = planted12
    cfg = SearchConfig(max_iterations=150, solver_timeout=30, rng_seed=0)
    rep = evaluate_mitigation(net, None, [PLANT_GUARD], schema, ds, ds, cfg)
    before = rep.row(ORIGINAL).search.success_rate
    after = rep.row(ORIGINAL_DT).search.success_rate
    assert before > 0 and after <= 0.5 * before
    assert rep.accuracy_delta is None
    assert [v.variant for v in rep.variants] == [ORIGINAL, ORIGINAL_DT]


def test_retrained_variant_rows(planted12):
    schema, _, net, ds = planted12
    tuned = fine_tune(net, ds, FineTuneConfig(epochs=1))
    cfg = SearchConfig(max_iterations=20, solver_timeout=30)
    rep = evaluate_mitigation(net, tuned, [PLANT_GUARD], schema, ds, ds, cfg)
    assert len(rep.variants) == 4
    assert rep.accuracy_delta == rep.row(DEBIASED).accuracy - rep.row(ORIGINAL).accuracy
