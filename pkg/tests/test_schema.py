import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kfair.exceptions import SchemaError
from kfair.schema import (ConsistencyRule, FeatureSchema, FeatureSpec, SchemaEncoder,
                          load_schema, save_schema)


def test_layout_and_combinations(small_schema):
    s = small_schema
    assert s.input_width == 1 + 1 + 3 + 2 + 3
    assert s.K == 6
    assert s.combinations[0] == {"sex": "F", "race": "x"}
    assert s.combinations[-1] == {"sex": "M", "race": "z"}


def test_encode_decode_round_trip(small_schema):
    inst = {"age": 30, "income": 2.5, "job": "b", "sex": "M", "race": "y"}
    vec = small_schema.encode(inst)
    assert vec[0] == pytest.approx(12 / 42)
    assert vec[1] == pytest.approx(0.5)
    assert small_schema.decode(vec) == inst


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_random_instances_round_trip(seed):
    s = FeatureSchema([
        FeatureSpec("a", "numeric", -3, 7, integral=True),
        FeatureSpec("b", "numeric", 0.0, 1.0),
        FeatureSpec("c", "categorical", values=("u", "v")),
        FeatureSpec("p", "categorical", values=("0", "1", "2"), protected=True),
    ])
    inst = s.random_instance(np.random.default_rng(seed))
    back = s.decode(s.encode(inst))
    assert back["a"] == inst["a"] and back["c"] == inst["c"] and back["p"] == inst["p"]
    assert back["b"] == pytest.approx(inst["b"])


def test_counterfactuals_vary_only_protected(small_schema):
    inst = {"age": 30, "income": 1.0, "job": "a", "sex": "F", "race": "x"}
    cfs = small_schema.enumerate_counterfactuals(inst)
    assert len(cfs) == 6
    assert all(cf["age"] == 30 and cf["job"] == "a" for cf in cfs)
    X = small_schema.counterfactual_batch(small_schema.encode(inst))
    assert np.allclose(X, small_schema.encode_many(cfs))


def test_pure_rule_removes_combinations():
    s = FeatureSchema([
        FeatureSpec("x", "numeric", 0, 3, integral=True),
        FeatureSpec("sex", "categorical", values=("F", "M"), protected=True),
        FeatureSpec("preg", "categorical", values=("no", "yes"), protected=True),
    ], consistency_rules=[(("sex", "M"), ("preg", "yes"))])
    assert s.K == 3
    assert {"sex": "M", "preg": "yes"} not in s.combinations


def test_mixed_rule_masks_per_instance():
    s = FeatureSchema([
        FeatureSpec("job", "categorical", values=("a", "b")),
        FeatureSpec("sex", "categorical", values=("F", "M"), protected=True),
    ], consistency_rules=[ConsistencyRule((("job", "b"), ("sex", "M")))])
    assert len(s.enumerate_counterfactuals({"job": "a", "sex": "F"})) == 2
    assert s.enumerate_counterfactuals({"job": "b", "sex": "F"}) == [{"job": "b", "sex": "F"}]
    assert s.counterfactual_batch(s.encode({"job": "b", "sex": "F"})).shape[0] == 1


@pytest.mark.parametrize("bad", [
    {"age": 17, "income": 1.0, "job": "a", "sex": "F", "race": "x"},
    {"age": 20, "income": 1.0, "job": "q", "sex": "F", "race": "x"},
    {"age": 20, "income": 1.0, "job": "a", "sex": "F"},
    {"age": 20, "income": 1.0, "job": "a", "sex": "F", "race": "x", "extra": 1},
])
def test_validate_rejects(small_schema, bad):
    with pytest.raises(SchemaError):
        small_schema.validate(bad)


def test_spec_errors():
    with pytest.raises(SchemaError):
        FeatureSpec("a", "numeric", 1, 1)
    with pytest.raises(SchemaError):
        FeatureSpec("a", "categorical", values=("x",))
    with pytest.raises(SchemaError):
        FeatureSpec("a", "numeric", 0.0, 1.0, protected=True)
    with pytest.raises(SchemaError):
        FeatureSchema([FeatureSpec("a", "numeric", 0, 1)])


def test_schema_file_round_trip(small_schema, tmp_path):
    save_schema(small_schema, tmp_path / "s.json")
    back = load_schema(tmp_path / "s.json")
    assert back.names == small_schema.names and back.K == small_schema.K
    with pytest.raises(SchemaError, match="not found"):
        load_schema(tmp_path / "nope.json")


def test_encoder_transformer(small_schema):
    rows = [small_schema.random_instance(np.random.default_rng(i)) for i in range(4)]
    enc = SchemaEncoder(small_schema).fit()
    X = enc.transform(rows)
    assert X.shape == (4, small_schema.input_width)
    assert enc.get_params()["schema"] is small_schema
    assert [r["job"] for r in enc.inverse_transform(X)] == [r["job"] for r in rows]
