import numpy as np
import pytest

from kfair._rng import make_rng
from kfair.data import PLANTED_BOX
from kfair.exceptions import DegenerateKError, InputError, SchemaError
from kfair.explain import (HIGH_K, LOW_K, CategoricalAtom, DiscriminationExplainer,
                           ExplainConfig, ExplanationPredicate, GiniTreeClassifier,
                           NumericAtom, build_decision_tree, coverage_count, coverage_volume,
                           explain, extract_paths, k_values, label_high_low,
                           local_perturbation, robustness, validate_path)
from kfair.model import DenseLayer, Network


def planted_seeds(schema, plant, n=20, seed=0):
    rng = make_rng(seed, "test")
    out = []
    while len(out) < n:
        r = schema.random_instance(rng)
        if plant.regions[0].contains(r):
            out.append(r)
    return out


def test_config_validation():
    with pytest.raises(InputError):
        ExplainConfig(high_k_percentile=1.0)
    with pytest.raises(InputError):
        ExplainConfig(delta=0)


def test_label_high_low_percentile():
    high, kappa = label_high_low(np.arange(1, 101))
    assert kappa == 95 and high.sum() == 5 and high[-5:].all()


def test_label_high_low_ties_at_top():
    high, kappa = label_high_low([1] * 90 + [3] * 10)
    assert kappa == 3 and high.sum() == 10


def test_label_high_low_degenerate():
    with pytest.raises(DegenerateKError):
        label_high_low([4] * 50)


def test_depth_one_tree():
    X = np.linspace(0, 1, 200)[:, None]
    y = X[:, 0] > 0.5
    tree = GiniTreeClassifier(max_depth=3, min_samples_leaf=5).fit(X, y)
    assert tree.depth_ == 1
    assert tree.tree_.threshold == pytest.approx(0.5, abs=0.01)
    assert np.array_equal(tree.predict(X), y)


def test_tree_needs_both_classes():
    with pytest.raises(DegenerateKError):
        GiniTreeClassifier().fit(np.zeros((10, 1)), np.ones(10, bool))


def test_categorical_split(small_schema):
    rng = np.random.default_rng(0)
    rows = [small_schema.random_instance(rng) for _ in range(300)]
    y = np.array([r["job"] == "b" for r in rows])
    tree = build_decision_tree(small_schema, rows, y, ExplainConfig(tree_min_leaf=5))
    paths = extract_paths(tree, small_schema)
    high = [p for p in paths if p.leaf_class == HIGH_K]
    assert [p.text() for p in high] == ["job IN {b}"]


def test_paths_partition_the_space(small_schema):
    rng = np.random.default_rng(1)
    rows = [small_schema.random_instance(rng) for _ in range(400)]
    y = np.array([r["age"] > 40 and r["income"] <= 2.0 for r in rows])
    tree = build_decision_tree(small_schema, rows, y, ExplainConfig(tree_min_leaf=5))
    paths = extract_paths(tree, small_schema)
    for r in (small_schema.random_instance(rng) for _ in range(300)):
        assert sum(p.holds(r) for p in paths) == 1
    for p in paths:
        feats = [a.feature for a in p.atoms]
        assert len(feats) == len(set(feats))


def test_numeric_atom_semantics():
    a = NumericAtom("age", 39.0, 60.0, True)
    assert not a.holds(39) and a.holds(40) and a.holds(60) and not a.holds(61)
    assert a.text() == "39 < age <= 60"
    assert NumericAtom("x", None, 2.5).text() == "x <= 2.5"


def test_coverage_product_rule(small_schema):
    pred = ExplanationPredicate((NumericAtom("age", 29, 50, True), NumericAtom("income", None, 2.5),
                                 CategoricalAtom("job", ("a",))))
    assert coverage_volume(pred, small_schema) == pytest.approx(21 / 43 * 0.5 / 3)
    assert coverage_count(pred, small_schema) is None
    assert pred.text() == "29 < age <= 50 AND income <= 2.5 AND job IN {a}"


def test_coverage_count_on_discrete_schema(planted12):
    schema, *_ = planted12
    from kfair.schema import FeatureSchema
    discrete = FeatureSchema([f for f in schema.features if f.name != "capital_gain"])
    pred = ExplanationPredicate((NumericAtom("age", 29, 50, True),))
    total = 1
    for f in discrete.nonprotected:
        total *= len(f.values) if f.is_categorical else int(f.span) + 1
    count = coverage_count(pred, discrete)
    assert count == total // (int(discrete["age"].span) + 1) * 21


def test_predicate_round_trip(planted12):
    schema, *_ = planted12
    pred = ExplanationPredicate((NumericAtom("age", 29, 50, True),
                                 CategoricalAtom("workclass", ("Private",))))
    back = ExplanationPredicate.from_dict(pred.to_dict(), schema)
    assert back.text() == pred.text()
    doc = pred.to_dict()
    doc["atoms"].append({"feature": "sex", "kind": "categorical", "allowed": ["Male"]})
    with pytest.raises(SchemaError):
        ExplanationPredicate.from_dict(doc, schema)


def test_perturbation_keeps_protected(planted12):
    schema, plant, _, _ = planted12
    seeds = planted_seeds(schema, plant, 3)
    out = local_perturbation(seeds, schema, ExplainConfig(n_samples=200))
    prot = {(s["sex"], s["race"]) for s in seeds}
    assert len(out) == 200
    assert all((r["sex"], r["race"]) in prot for r in out)


def test_whole_space_predicate_is_rejected(planted12):
    schema, _, net, _ = planted12
    rows = [schema.random_instance(np.random.default_rng(0))]
    verdict = validate_path(net, schema, ExplanationPredicate(()), rows, [1],
                            ExplainConfig(cex_samples=10))
    assert not verdict.accepted and "negation" in verdict.reason


def test_constant_network_has_no_high_k(small_schema):
    net = Network((DenseLayer(np.zeros((1, small_schema.input_width)), np.zeros(1),
                              "identity"),))
    seed = small_schema.random_instance(np.random.default_rng(0))
    with pytest.raises(DegenerateKError):
        explain(net, small_schema, [seed], ExplainConfig(n_samples=200))


def test_robustness_diff(planted12):
    schema, plant, net, _ = planted12
    witness = planted_seeds(schema, plant, 1)[0]
    pred = ExplanationPredicate((NumericAtom("age", 29, 50, True),
                                 NumericAtom("hours_per_week", 39, 60, True)))
    k_w, pert, diff = robustness(net, schema, pred, witness)
    expected = 12 if plant.regions[0].contains(witness) else 1
    assert k_w == expected
    assert pert == 1.0 and diff == k_w - 1


def test_explain_recovers_planted_box(planted12):
    schema, plant, net, _ = planted12
    e = explain(net, schema, planted_seeds(schema, plant), ExplainConfig())
    assert e.predicates
    rng = make_rng(9, "holdout")
    test = [schema.random_instance(rng) for _ in range(3000)]
    truth = np.array([plant.regions[0].contains(r) for r in test])
    pred = np.zeros(len(test), bool)
    for p in e.predicates:
        pred |= p.holds_many(test)
        assert p.robustness_diff >= 12 - 2
    assert (pred & truth).sum() / pred.sum() >= 0.9
    assert (pred & truth).sum() / truth.sum() >= 0.9


def test_estimator_facade(planted12):
    schema, plant, net, ds = planted12
    est = DiscriminationExplainer(net, schema, n_samples=1000)
    est.fit(planted_seeds(schema, plant, 10))
    flags = est.predict(ds)
    assert flags.shape == (len(ds),)
    assert est.get_params()["n_samples"] == 1000


def test_k_values_workers_agree(planted12):
    schema, _, net, ds = planted12
    assert np.array_equal(k_values(net, schema, ds.rows[:40]),
                          k_values(net, schema, ds.rows[:40], workers=3))
