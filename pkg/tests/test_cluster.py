import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kfair.cluster import (ABSTAIN_BUCKET, DiscriminationRecord, bucketize, count_k,
                           is_2_discriminant, k_discrimination, n_buckets)
from kfair.exceptions import InputError


def test_bucket_edges():
    assert n_buckets(0.05) == 20
    assert bucketize(0.0) == 0
    assert bucketize(0.15) == 3
    assert bucketize(0.1499999) == 2
    assert bucketize(1.0) == 19
    assert bucketize(float("nan")) == ABSTAIN_BUCKET


def test_bucketize_rejects_bad_input():
    with pytest.raises(InputError):
        bucketize(1.2)
    with pytest.raises(InputError):
        bucketize(0.5, epsilon=0.0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=30), st.sampled_from([0.05, 0.1, 0.2]))
def test_k_bounds(scores, eps):
    k = count_k(scores, eps)
    assert 1 <= k <= min(len(scores), n_buckets(eps))
    spread = max(scores) - min(scores)
    # k buckets occupied means a spread of more than (k - 2) eps
    assert spread >= (k - 2) * eps - 1e-9


def test_two_discriminant():
    assert is_2_discriminant(0.1, 0.16)
    assert not is_2_discriminant(0.1, 0.15)


def test_record_round_trip_keeps_nan():
    rec = DiscriminationRecord({"a": 1}, [0.2, float("nan")], [4, -1], 2)
    back = DiscriminationRecord.from_dict(rec.to_dict())
    assert back.k_value == 2 and math.isnan(back.counterfactual_scores[1])
    assert rec.to_dict()["counterfactual_scores"][1] is None


def test_k_of_planted_instance(planted12):
    schema, plant, net, _ = planted12
    inside = {"age": 40, "hours_per_week": 50, "education_num": 5, "capital_gain": 1.0,
              "workclass": "Private", "sex": "Male", "race": "White"}
    outside = dict(inside, age=70)
    assert k_discrimination(net, schema, inside).k_value == 12
    assert k_discrimination(net, schema, outside).k_value == 1
