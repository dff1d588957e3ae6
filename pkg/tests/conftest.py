import itertools

import numpy as np
import pytest

from kfair.data import make_planted_network, planted_fixture, sample_dataset
from kfair.model import DenseLayer, Network, favorable_margin, forward
from kfair.schema import FeatureSchema, FeatureSpec


def random_network(rng, widths, scale=1.0):
    layers = []
    for i in range(len(widths) - 1):
        act = "relu" if i < len(widths) - 2 else "identity"
        layers.append(DenseLayer(rng.normal(scale=scale, size=(widths[i + 1], widths[i])),
                                 rng.normal(scale=0.5 * scale, size=widths[i + 1]), act))
    return Network(tuple(layers))


def random_discrete_case(rng):
    """Small schema (input width <= 6, <= 4 levels per input) and a random network."""
    n_prot = int(rng.integers(2, 4))
    feats = [FeatureSpec("g", "categorical", values=("a", "b", "c")[:n_prot], protected=True)]
    for i in range(int(rng.integers(2, 4))):
        feats.append(FeatureSpec(f"n{i}", "numeric", 0, int(rng.integers(1, 4)), integral=True))
    schema = FeatureSchema(feats)
    widths = ([schema.input_width] + [int(rng.integers(3, 7))
                                      for _ in range(int(rng.integers(1, 3)))]
              + [int(rng.integers(1, 3))])
    return schema, random_network(rng, widths)


def brute_force_gap(schema, network):
    """Largest favorable-margin gap over every discrete input and combination pair."""
    names = [f.name for f in schema.nonprotected]
    best = 0.0
    for vals in itertools.product(*(f.domain() for f in schema.nonprotected)):
        inst = dict(zip(names, vals))
        for f in schema.protected:
            inst[f.name] = f.domain()[0]
        X = schema.counterfactual_batch(schema.encode(inst))
        m = favorable_margin(network, forward(network, X))
        best = max(best, float(m.max() - m.min()))
    return best


def make_small_schema():
    return FeatureSchema([
        FeatureSpec("age", "numeric", 18, 60, integral=True),
        FeatureSpec("income", "numeric", 0.0, 5.0),
        FeatureSpec("job", "categorical", values=("a", "b", "c")),
        FeatureSpec("sex", "categorical", values=("F", "M"), protected=True),
        FeatureSpec("race", "categorical", values=("x", "y", "z"), protected=True),
    ])


def bfs_optimum(c, A, b):
    """Minimum of c x over {A x = b, x >= 0} by enumerating basic feasible solutions."""
    m, n = A.shape
    best = None
    for cols in itertools.combinations(range(n), m):
        B = A[:, cols]
        if abs(np.linalg.det(B)) < 1e-10:
            continue
        xb = np.linalg.solve(B, b)
        if np.all(xb >= -1e-10):
            val = float(c[list(cols)] @ xb)
            best = val if best is None else min(best, val)
    return best


def random_standard_lp(rng):
    m = int(rng.integers(1, 5))
    n = int(rng.integers(m + 1, 21))
    A = rng.normal(size=(m, n))
    A[0] = np.abs(A[0]) + 0.1  # positive row keeps the region bounded
    b = A @ rng.uniform(0, 1, n) if rng.random() < 0.8 else rng.normal(size=m)
    return rng.normal(size=n), A, b


def gradient_errors(network, X, y, loss_and_gradients, h=1e-6):
    """Relative errors of analytic against central-difference gradients."""
    _, grads = loss_and_gradients(network, X, y)
    params = [(np.array(l.weights), np.array(l.bias)) for l in network.layers]
    errs = []
    for (W, b), (gW, gb) in zip(params, grads):
        for A, G in ((W, gW), (b, gb)):
            for idx in np.ndindex(A.shape):
                old = A[idx]
                A[idx] = old + h
                up = loss_and_gradients(network, X, y, params)[0]
                A[idx] = old - h
                down = loss_and_gradients(network, X, y, params)[0]
                A[idx] = old
                fd = (up - down) / (2 * h)
                errs.append(abs(fd - G[idx]) / max(1.0, abs(fd)))
    return np.array(errs)


@pytest.fixture
def small_schema():
    return make_small_schema()


@pytest.fixture(scope="session")
def planted12():
    schema, plant = planted_fixture(12)
    net = make_planted_network(schema, plant)
    return schema, plant, net, sample_dataset(schema, 500, 0, net)


# -- acceptance summary -------------------------------------------------------

ACCEPTANCE = []


def record_criterion(name, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
