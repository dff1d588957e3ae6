import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kfair.bounds import Box, affine_bounds, propagate
from kfair.exceptions import InputError
from kfair.model import forward_all

from conftest import random_network


def test_affine_bounds_exact_for_single_neuron():
    lo, hi = affine_bounds(np.array([[2.0, -1.0]]), np.array([0.5]),
                           np.array([0.0, 0.0]), np.array([1.0, 1.0]))
    assert lo[0] == pytest.approx(-0.5) and hi[0] == pytest.approx(2.5)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_bounds_contain_sampled_activations(seed):
    rng = np.random.default_rng(seed)
    net = random_network(rng, [4, 6, 5, 2])
    lo = rng.uniform(-1, 0, 4)
    box = Box(lo, lo + rng.uniform(0, 2, 4))
    lb = propagate(net, box)
    X = rng.uniform(box.lower, box.upper, size=(500, 4))
    for li, pre in enumerate(forward_all(net, X)):
        assert np.all(pre >= lb.pre[li].lower - 1e-9)
        assert np.all(pre <= lb.pre[li].upper + 1e-9)


def test_stability_flags():
    net = random_network(np.random.default_rng(0), [2, 8, 1])
    lb = propagate(net, Box.unit(2))
    flags = (lb.stable_active(0).astype(int) + lb.stable_inactive(0).astype(int)
             + lb.unstable(0).astype(int))
    assert np.all(flags == 1)


def test_box_checks():
    with pytest.raises(InputError):
        Box(np.ones(2), np.zeros(2))
    with pytest.raises(InputError):
        propagate(random_network(np.random.default_rng(0), [3, 2, 1]), Box.unit(2))
    assert Box.unit(2).contains([0.5, 1.0]) and not Box.unit(2).contains([1.5, 0.0])
