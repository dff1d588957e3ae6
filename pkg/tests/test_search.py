import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kfair.cluster import k_discrimination
from kfair.data import Dataset
from kfair.exceptions import InputError
from kfair.model import DenseLayer, Network
from conftest import make_small_schema
from kfair.search import (RW, SA, SA_KNN, SearchConfig, SearchReport, accept_metropolis,
                          build_knn_index, pick_candidate_source, propose_neighbor,
                          run_search)


def test_config_validation():
    with pytest.raises(InputError):
        SearchConfig(strategy="GA")
    with pytest.raises(InputError):
        SearchConfig(p_exploit=0.5)
    with pytest.raises(InputError):
        SearchConfig(temperature_decay=1.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_neighbor_changes_one_nonprotected_feature(seed):
    schema = make_small_schema()
    rng = np.random.default_rng(seed)
    cur = schema.random_instance(rng)
    cand = propose_neighbor(cur, schema, rng)
    changed = [k for k in cur if cur[k] != cand[k]]
    assert len(changed) <= 1
    assert not set(changed) & {"sex", "race"}
    schema.validate(cand)


def test_neighbor_clamps_at_bound(small_schema):
    cur = {"age": 60, "income": 5.0, "job": "a", "sex": "F", "race": "x"}
    rng = np.random.default_rng(0)
    for _ in range(200):
        cand = propose_neighbor(cur, small_schema, rng)
        assert cand["age"] <= 60 and cand["income"] <= 5.0


def test_neighbor_feature_choice_is_uniform(small_schema):
    from scipy.stats import chisquare
    rng = np.random.default_rng(1)
    cur = {"age": 30, "income": 2.0, "job": "a", "sex": "F", "race": "x"}
    counts = dict.fromkeys(("age", "income", "job"), 0)
    for _ in range(10_000):
        cand = propose_neighbor(cur, small_schema, rng)
        for k in counts:
            if cand[k] != cur[k]:
                counts[k] += 1
    assert chisquare(list(counts.values())).pvalue > 1e-3


def test_metropolis_rates():
    rng = np.random.default_rng(0)
    assert all(accept_metropolis(3, 3, 0.5, rng) for _ in range(100))
    rate = np.mean([accept_metropolis(3, 2, 1.0, rng) for _ in range(10_000)])
    assert abs(rate - np.exp(-1)) < 0.02
    assert not any(accept_metropolis(3, 2, 1e-9, rng) for _ in range(1000))
    with pytest.raises(InputError):
        accept_metropolis(1, 1, 0.0, rng)


def test_candidate_sources(small_schema):
    rng = np.random.default_rng(0)
    rows = [small_schema.random_instance(rng) for _ in range(30)]
    ds = Dataset(small_schema, rows)
    cur = rows[0]
    for _ in range(50):
        c = pick_candidate_source(SA, cur, ds, None, 1.0, rng, small_schema)
        assert sum(c[k] != cur[k] for k in cur) <= 1
    knn = build_knn_index(ds)
    for _ in range(20):
        c = pick_candidate_source(SA_KNN, cur, ds, knn, 1.0, rng, small_schema,
                                  knn_neighbors=1)
        assert c == cur


def test_exploit_ratio(small_schema):
    rng = np.random.default_rng(2)
    rows = [dict(small_schema.random_instance(rng), age=18) for _ in range(5)]
    ds = Dataset(small_schema, rows)
    cur = {"age": 40, "income": 2.5, "job": "a", "sex": "F", "race": "x"}
    n = 100_000
    explore = sum(pick_candidate_source(SA, cur, ds, None, 0.9, rng, small_schema)["age"] == 18
                  for _ in range(n))
    assert abs(explore / n - 0.1) < 0.01


def test_constant_network(small_schema):
    net = Network((DenseLayer(np.zeros((1, small_schema.input_width)), np.zeros(1),
                              "identity"),))
    rep = run_search(net, small_schema, None, SearchConfig(max_iterations=30, rng_seed=0))
    assert (rep.max_k, rep.num_id, rep.success_rate) == (1, 0, 0.0)
    assert rep.degraded


@pytest.mark.parametrize("strategy", [RW, SA, SA_KNN])
def test_planted_search_invariants(planted12, strategy):
    schema, _, net, ds = planted12
    rep = run_search(net, schema, ds, SearchConfig(strategy=strategy, max_iterations=150,
                                                   solver_timeout=30, rng_seed=3))
    assert rep.max_k <= schema.K and rep.num_id_max_k <= rep.num_id
    assert 0 <= rep.success_rate <= 100
    for r in rep.ids:
        assert k_discrimination(net, schema, r.instance).k_value == r.k_value >= 2
    assert all(r.k_value == rep.max_k for r in rep.best_instances)
    if rep.t_first_id_seconds is not None:
        assert rep.t_first_id_seconds <= rep.t_max_k_seconds <= rep.wall_time


def test_search_is_deterministic(planted12):
    schema, _, net, ds = planted12
    cfg = SearchConfig(max_iterations=120, solver_timeout=60, rng_seed=5)
    a = run_search(net, schema, ds, cfg).to_dict(timing=False)
    b = run_search(net, schema, ds, cfg).to_dict(timing=False)
    assert a == b


def test_report_round_trip(planted12):
    schema, _, net, ds = planted12
    rep = run_search(net, schema, ds, SearchConfig(max_iterations=40, solver_timeout=30))
    back = SearchReport.from_dict(rep.to_dict())
    assert back.to_dict() == rep.to_dict()
