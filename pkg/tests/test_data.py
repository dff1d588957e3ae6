import numpy as np
import pytest

from kfair.cluster import k_discrimination
from kfair.data import (PLANTED_BOX, Dataset, PlantRegion, PlantSpec, graded_offsets,
                        load_csv, make_planted_network, planted_fixture, planted_k,
                        planted_max_k, region_volume, ring_levels, sample_dataset, save_csv,
                        train_test_split)
from kfair.exceptions import InputError, SchemaError


def test_csv_round_trip(small_schema, tmp_path):
    rows = [small_schema.random_instance(np.random.default_rng(i)) for i in range(5)]
    ds = Dataset(small_schema, rows, np.array([0, 1, 1, 0, 1]))
    save_csv(ds, tmp_path / "d.csv")
    back = load_csv(tmp_path / "d.csv", small_schema)
    assert back.labels.tolist() == [0, 1, 1, 0, 1]
    assert np.allclose(back.X, ds.X)


def test_csv_errors_name_line(small_schema, tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("age,income,job,sex,race\n30,1.0,a,F,x\n300,1.0,a,F,x\n")
    with pytest.raises(InputError, match=r"bad.csv:3"):
        load_csv(p, small_schema)
    p.write_text("age,income,job,sex\n30,1.0,a,F\n")
    with pytest.raises(InputError, match="missing column"):
        load_csv(p, small_schema)


def test_split_is_disjoint_and_seeded(small_schema):
    rows = [small_schema.random_instance(np.random.default_rng(i)) for i in range(20)]
    ds = Dataset(small_schema, rows)
    a, b = train_test_split(ds, 0.75, 3)
    assert len(a) == 15 and len(b) == 5
    a2, _ = train_test_split(ds, 0.75, 3)
    assert a.rows == a2.rows


def test_graded_offsets_give_exact_k():
    for k in (1, 2, 5, 12, 20):
        offs = graded_offsets(20, k, 0.5)
        from kfair.cluster import count_k
        assert count_k(0.5 + np.array(offs)) == k
    with pytest.raises(SchemaError):
        graded_offsets(20, 21, 0.5)


@pytest.mark.parametrize("k", [5, 12, 20])
def test_planted_network_reproduces_plant(k):
    schema, plant = planted_fixture(k)
    net = make_planted_network(schema, plant)
    rng = np.random.default_rng(k)
    for _ in range(200):
        inst = schema.random_instance(rng)
        if rng.random() < 0.5:
            inst.update(age=int(rng.integers(30, 51)), hours_per_week=int(rng.integers(40, 61)),
                        workclass="Private")
        assert k_discrimination(net, schema, inst).k_value == planted_k(plant, inst)
    assert planted_max_k(plant) == k


@pytest.mark.parametrize("k", [5, 12, 20])
def test_graded_rings(k):
    schema, plant = planted_fixture(k, graded=True)
    net = make_planted_network(schema, plant)
    levels = ring_levels(k)
    assert levels[-1] == k and len(plant.regions) == len(levels)
    rng = np.random.default_rng(0)
    for _ in range(300):
        inst = schema.random_instance(rng)
        assert k_discrimination(net, schema, inst).k_value == planted_k(plant, inst)


def test_region_volume_counts_lattice_points():
    schema, _ = planted_fixture(5)
    assert region_volume(schema, PLANTED_BOX) == pytest.approx(21 / 73 * 21 / 99 * 0.5)


def test_plant_validation():
    schema, plant = planted_fixture(5)
    bad = PlantSpec((PlantRegion({"sex": frozenset({"Male"})}, plant.regions[0].offsets),))
    with pytest.raises(SchemaError):
        make_planted_network(schema, bad)
    with pytest.raises(SchemaError):
        make_planted_network(schema, PlantSpec((PlantRegion(PLANTED_BOX, (0.0,)),)))


def test_sample_dataset_labels_follow_network(planted12):
    schema, _, net, ds = planted12
    from kfair.model import predict_label
    assert np.array_equal(ds.labels, predict_label(net, ds.X))
    assert sample_dataset(schema, 10, 0).labels is None
