"""Two-copy MILP encoding of the pairwise fairness query.

Both network copies read the same non-protected inputs; each copy picks its
own protected combination through ``K`` selector binaries.  Hidden ReLU
neurons are split into a positive part ``x`` and a negative part ``s``
with ``pre = x - s``; an unstable neuron gets an indicator ``z`` (1 means
inactive) and the big-M rows ``x <= U (1 - z)`` and ``s <= -L z``.  Neurons
whose interval bounds fix their phase get no indicator.

The objective maximizes ``F = |F1 - F2|`` where ``F_v`` is the favorable
logit (one output) or the favorable-minus-other logit margin (two outputs).
The absolute value is linearized with two side selectors ``f1 + f2 = 1``.

Variable names::

    u{j}            shared continuous input coordinate j
    u{j}.b{i}       bit i of an integral coordinate
    o{j}            shared one-hot coordinate j (binary)
    sel{v}_{c}      copy v uses protected combination c
    x{v}_{l}_{j}    positive part of neuron j in hidden layer l
    s{v}_{l}_{j}    negative part
    z{v}_{l}_{j}    inactive indicator (unstable neurons only)
    F, f1, f2       objective auxiliaries
"""

from __future__ import annotations

import math

import numpy as np

from ..bounds import BIG_M_SLACK, Box, affine_bounds, propagate
from ..exceptions import SchemaError, UnsupportedNetworkError
from ..model import favorable_margin, forward, forward_all
from .problem import BINARY, EQ, GE, LE, LinearExpr, MilpProblem

DEFAULT_RADIUS = 0.2
LOGIT_FACTOR = 4.0


def logit_threshold(epsilon):
    """Margin gap that guarantees a score gap of at most ``epsilon``.

    The logistic function is 1/4-Lipschitz, so ``|a - b| <= 4 eps`` implies
    ``|sigmoid(a) - sigmoid(b)| <= eps``.
    """
    return LOGIT_FACTOR * epsilon


def input_box(schema, near=None, radius=DEFAULT_RADIUS):
    """Encoded input box; with ``near`` numeric coordinates are clipped to a radius."""
    lo = np.zeros(schema.input_width)
    hi = np.ones(schema.input_width)
    if near is None:
        return Box(lo, hi)
    centre = schema.encode(near)
    for f in schema.nonprotected:
        if f.is_categorical:
            continue
        j = schema.layout[f.name].start
        a, b = max(0.0, centre[j] - radius), min(1.0, centre[j] + radius)
        if f.integral:
            R = f.span
            a, b = math.ceil(a * R - 1e-9) / R, math.floor(b * R + 1e-9) / R
        lo[j], hi[j] = a, b
    return Box(lo, hi)


def _check_supported(network, schema):
    if network.output_width not in (1, 2):
        raise UnsupportedNetworkError("pair-fairness MILP supports one or two outputs")
    if network.input_width != schema.input_width:
        raise UnsupportedNetworkError(
            f"network input width {network.input_width} does not match schema "
            f"layout width {schema.input_width}")


def encode_pair_fairness(network, schema, bounds=None, epsilon=0.05, near=None,
                         radius=DEFAULT_RADIUS, symmetric=True):
    """Build the MILP whose optimum is the largest favorable-margin gap.

    With ``symmetric`` the side selector is pinned to ``f1 = 1``: the two
    copies are interchangeable, so the optimum is unchanged while the weak
    relaxation of the side selector disappears from the search.
    """
    _check_supported(network, schema)
    box = input_box(schema, near, radius)
    if bounds is None:
        bounds = propagate(network, box)
    prob = MilpProblem()
    K = schema.K

    # -- shared non-protected inputs -----------------------------------
    shared = {}  # coordinate -> LinearExpr
    integral_bits = {}
    onehots = {}
    for f in schema.nonprotected:
        sl = schema.layout[f.name]
        if f.is_categorical:
            ids = [prob.add_var(f"o{j}", BINARY) for j in range(sl.start, sl.stop)]
            prob.add_constraint(LinearExpr({i: 1.0 for i in ids}), EQ, 1.0, f"onehot_{f.name}")
            for j, i in zip(range(sl.start, sl.stop), ids):
                shared[j] = LinearExpr.of(i)
            onehots[f.name] = ids
            continue
        j = sl.start
        u = prob.add_var(f"u{j}", lower=box.lower[j], upper=box.upper[j])
        shared[j] = LinearExpr.of(u)
        if f.integral:
            R = int(round(f.span))
            nbits = max(1, R.bit_length())
            bits = [prob.add_var(f"u{j}.b{i}", BINARY) for i in range(nbits)]
            row = LinearExpr({u: float(R)})
            for i, b in enumerate(bits):
                row.add(LinearExpr.of(b, -(2 ** i)))
            prob.add_constraint(row, EQ, 0.0, f"bits_{f.name}")
            integral_bits[j] = (R, bits)

    # -- protected selectors per copy -----------------------------------
    selectors = []
    for v in (1, 2):
        ids = [prob.add_var(f"sel{v}_{c}", BINARY) for c in range(K)]
        prob.add_constraint(LinearExpr({i: 1.0 for i in ids}), EQ, 1.0, f"select{v}")
        selectors.append(ids)

    for v, sel in zip((1, 2), selectors):
        for r, (rule, hit, tests) in enumerate(schema.mixed_rules):
            row = LinearExpr({sel[c]: 1.0 for c in np.flatnonzero(hit)})
            n_atoms = 0
            for f, _ in rule.atoms:
                if not schema[f].protected and not schema[f].is_categorical:
                    raise SchemaError(
                        f"rule atom on numeric feature {f!r} cannot be encoded in the MILP")
            for coord, _ in tests:
                row.add(shared[coord])
                n_atoms += 1
            prob.add_constraint(row, LE, float(n_atoms), f"rule{r}_copy{v}")

    # -- network copies --------------------------------------------------
    margins = []
    z_ids = [[], []]
    hidden_ids = [[], []]
    for v, sel in zip((1, 2), selectors):
        prev = []
        for j in range(schema.input_width):
            if j in shared:
                prev.append(shared[j])
            else:
                k = int(np.flatnonzero(schema.protected_coords == j)[0])
                prev.append(LinearExpr({sel[c]: schema.protected_block[c, k]
                                        for c in range(K) if schema.protected_block[c, k] != 0}))
        for li, layer in enumerate(network.hidden_layers):
            pre_box = bounds.pre[li]
            cur = []
            layer_z = []
            for j in range(layer.output_width):
                L = pre_box.lower[j] - BIG_M_SLACK
                U = pre_box.upper[j] + BIG_M_SLACK
                active = pre_box.lower[j] >= 0.0
                inactive = pre_box.upper[j] <= 0.0
                x = prob.add_var(f"x{v}_{li}_{j}", lower=0.0, upper=0.0 if inactive else U)
                s = prob.add_var(f"s{v}_{li}_{j}", lower=0.0, upper=0.0 if active else -L)
                row = LinearExpr({}, float(layer.bias[j]))
                for k in range(layer.input_width):
                    if layer.weights[j, k] != 0.0:
                        row.add(prev[k], float(layer.weights[j, k]))
                row.add(LinearExpr({x: -1.0, s: 1.0}))
                prob.add_constraint(row, EQ, 0.0, f"relu{v}_{li}_{j}")
                if not (active or inactive):
                    z = prob.add_var(f"z{v}_{li}_{j}", BINARY)
                    prob.add_constraint(LinearExpr({x: 1.0, z: U}), LE, U, f"bigm_x{v}_{li}_{j}")
                    prob.add_constraint(LinearExpr({s: 1.0, z: L}), LE, 0.0, f"bigm_s{v}_{li}_{j}")
                    layer_z.append((j, z))
                cur.append(LinearExpr.of(x))
            z_ids[v - 1].append(layer_z)
            hidden_ids[v - 1].append(len(cur))
            prev = cur
        out = network.layers[-1]
        if network.output_width == 1:
            w, b = out.weights[0], float(out.bias[0])
        else:
            fav = network.favorable_output_index
            w = out.weights[fav] - out.weights[1 - fav]
            b = float(out.bias[fav] - out.bias[1 - fav])
        m = LinearExpr({}, b)
        for k in range(len(prev)):
            if w[k] != 0.0:
                m.add(prev[k], float(w[k]))
        margins.append(m)

    last_post = bounds.post[-2] if len(network.layers) > 1 else box
    mlo, mhi = affine_bounds(w[None, :], np.array([b]), last_post.lower, last_post.upper)
    M = float(mhi[0] - mlo[0]) + BIG_M_SLACK
    F = prob.add_var("F", lower=0.0, upper=M)
    f1 = prob.add_var("f1", BINARY)
    f2 = prob.add_var("f2", BINARY)
    d = margins[0] - margins[1]
    prob.add_constraint(LinearExpr({f1: 1.0, f2: 1.0}), EQ, 1.0, "side")
    prob.add_constraint(LinearExpr.of(F) - d, GE, 0.0, "abs_pos")
    prob.add_constraint(LinearExpr.of(F) + d, GE, 0.0, "abs_neg")
    prob.add_constraint((LinearExpr.of(F) - d).add(LinearExpr.of(f1, 2 * M)), LE, 2 * M, "max_f1")
    prob.add_constraint((LinearExpr.of(F) + d).add(LinearExpr.of(f2, 2 * M)), LE, 2 * M, "max_f2")
    prob.maximize(LinearExpr.of(F))
    if symmetric:
        # swapping the copies maps F1 - F2 to F2 - F1, so side f1 loses nothing
        prob.variables[f2].upper = 0.0
        prob.variables[f1].lower = 1.0

    prob.meta = {
        "epsilon": epsilon,
        "epsilon_logit": logit_threshold(epsilon),
        "K": K,
        "shared_coords": sorted(shared),
        "n_shared_vars": sum(1 for v in prob.variables
                             if v.name.startswith("u") or v.name.startswith("o")),
        "hidden_neurons": hidden_ids[0],
        "n_relu_binaries": sum(len(lz) for lz in z_ids[0]),
        "input_box": box,
        "bounds": bounds,
    }
    codec = _PairCodec(network, schema, prob, shared, integral_bits, onehots, selectors,
                       z_ids, box, (F, f1, f2))
    prob.codec = codec
    prob.repair = codec.repair
    prob.decode_pair = codec.decode_pair
    return prob


class _PairCodec:
    """Maps between MILP points and concrete encoded inputs."""

    def __init__(self, network, schema, prob, shared, integral_bits, onehots, selectors,
                 z_ids, box, objective_ids):
        self.net = network
        self.schema = schema
        self.prob = prob
        self.shared = shared
        self.bits = integral_bits
        self.onehots = onehots
        self.sel = selectors
        self.z = z_ids
        self.box = box
        self.obj = objective_ids
        self.u = {j: next(iter(e.coefficients)) for j, e in shared.items()}

    def base_vector(self, x, snap=False):
        """Encoded non-protected part of LP point ``x`` (protected coords zero)."""
        vec = np.zeros(self.schema.input_width)
        for f in self.schema.nonprotected:
            sl = self.schema.layout[f.name]
            if f.is_categorical:
                ids = self.onehots[f.name]
                pick = int(np.argmax([x[i] for i in ids]))
                vec[sl.start + pick] = 1.0
                continue
            j = sl.start
            val = float(x[self.u[j]])
            if f.integral and snap:
                R = self.bits[j][0]
                a = math.ceil(self.box.lower[j] * R - 1e-9)
                b = math.floor(self.box.upper[j] * R + 1e-9)
                val = min(max(round(val * R), a), b) / R
            vec[j] = min(max(val, self.box.lower[j]), self.box.upper[j])
        return vec

    def with_combo(self, base, c):
        vec = base.copy()
        vec[self.schema.protected_coords] = self.schema.protected_block[c]
        return vec

    def decode_pair(self, x):
        base = self.base_vector(x, snap=True)
        c1 = int(np.argmax([x[i] for i in self.sel[0]]))
        c2 = int(np.argmax([x[i] for i in self.sel[1]]))
        return self.with_combo(base, c1), self.with_combo(base, c2), (c1, c2)

    def repair(self, x):
        """Forward-pass repair: round inputs, pick the widest combination pair."""
        base = self.base_vector(x, snap=True)
        mask = self.schema.combination_mask(base)
        combos = np.flatnonzero(mask)
        if combos.size == 0:
            return None
        X = np.repeat(base[None, :], combos.size, axis=0)
        X[:, self.schema.protected_coords] = self.schema.protected_block[combos]
        margin = favorable_margin(self.net, forward(self.net, X))
        c1, c2 = int(combos[np.argmax(margin)]), int(combos[np.argmin(margin)])
        fixes = {}
        for f in self.schema.nonprotected:
            sl = self.schema.layout[f.name]
            if f.is_categorical:
                for j, i in zip(range(sl.start, sl.stop), self.onehots[f.name]):
                    fixes[i] = float(base[j])
            elif f.integral:
                R, bits = self.bits[sl.start]
                n = int(round(base[sl.start] * R))
                for i, b in enumerate(bits):
                    fixes[b] = float((n >> i) & 1)
        pair = (self.with_combo(base, c1), self.with_combo(base, c2))
        for v, (c, vec) in enumerate(zip((c1, c2), pair)):
            for cc, i in enumerate(self.sel[v]):
                fixes[i] = 1.0 if cc == c else 0.0
            pre = forward_all(self.net, vec)
            for li, layer_z in enumerate(self.z[v]):
                for j, zid in layer_z:
                    fixes[zid] = 1.0 if pre[li][j] < 0.0 else 0.0
        _, f1, f2 = self.obj
        fixes[f1], fixes[f2] = 1.0, 0.0
        return fixes
