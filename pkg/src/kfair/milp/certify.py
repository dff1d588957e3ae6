"""Fairness certificates and solver-seeded counterexamples."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..bounds import BIG_M_SLACK, affine_bounds, propagate
from ..cluster import DEFAULT_EPSILON, counterfactual_scores
from ..model import score
from .bnb import STATUS_OPTIMAL, SolveConfig, solve
from .encode import DEFAULT_RADIUS, encode_pair_fairness, input_box, logit_threshold

FAIR = "Fair"
UNFAIR = "Unfair"
UNKNOWN = "Unknown"


@dataclass
class Certificate:
    """Outcome of a pairwise fairness check.

    ``Fair`` carries ``max_gap`` (the optimal logit-margin gap), ``Unfair``
    carries a counterexample with its two protected combinations and their
    forward-pass scores, ``Unknown`` carries a reason.
    """

    verdict: str
    max_gap: float = None
    counterexample: dict = None
    z_pair: tuple = None
    validated_scores: tuple = None
    reason: str = None
    solver_status: str = None
    objective_value: float = None
    best_bound: float = None
    stats: dict = field(default_factory=dict)

    def to_dict(self, timing=True):
        d = {"verdict": self.verdict, "solver_status": self.solver_status,
             "objective_value": self.objective_value, "best_bound": self.best_bound}
        if self.verdict == FAIR:
            d["max_gap"] = self.max_gap
        elif self.verdict == UNFAIR:
            d["counterexample"] = self.counterexample
            d["z_pair"] = [dict(c) for c in self.z_pair]
            d["validated_scores"] = list(self.validated_scores)
        else:
            d["reason"] = self.reason
        d["stats"] = {k: v for k, v in self.stats.items() if timing or k != "wall_time"}
        return d


def _solve_config(config, **overrides):
    cfg = SolveConfig() if config is None else SolveConfig(**vars(config))
    for k, v in overrides.items():
        setattr(cfg, k, v)
    return cfg


def _widest_pair(scorer, schema, vec):
    """(instance, combo_hi, combo_lo, s_hi, s_lo) over the valid counterfactuals."""
    mask = schema.combination_mask(vec)
    combos = np.flatnonzero(mask)
    s = counterfactual_scores(scorer, schema, vec)
    ok = ~np.isnan(s)
    if ok.sum() < 2:
        return None
    idx, s = combos[ok], s[ok]
    hi, lo = int(np.argmax(s)), int(np.argmin(s))
    return schema.decode(vec), int(idx[hi]), int(idx[lo]), float(s[hi]), float(s[lo])


def _validate(prob, network, schema, x, epsilon, scorer=None):
    """Decode LP point ``x`` and re-check it by forward passes only."""
    vec, _, _ = prob.decode_pair(x)
    inst = schema.decode(vec)
    vec = schema.encode(inst)
    found = _widest_pair(scorer if scorer is not None else network, schema, vec)
    if found is None:
        return None
    inst, hi, lo, s_hi, s_lo = found
    if s_hi - s_lo > epsilon:
        return inst, hi, lo, s_hi, s_lo
    return None


def certify(network, schema, epsilon=DEFAULT_EPSILON, config=None, bounds=None,
            stop_at_counterexample=True):
    """Decide pairwise fairness of ``network`` over the whole input box.

    Fair requires a proven optimum at most ``4 * epsilon`` in logit-margin
    units, which bounds every score gap by ``epsilon``.  Unfair requires a
    decoded incumbent whose forward-pass scores differ by more than
    ``epsilon``.  Anything else is Unknown.

    With ``stop_at_counterexample`` the search ends at the first validated
    counterexample; otherwise it runs to the optimal gap.
    """
    prob = encode_pair_fairness(network, schema, bounds=bounds, epsilon=epsilon)
    overrides = {}
    if stop_at_counterexample:
        overrides = dict(early_stop_threshold=logit_threshold(epsilon),
                         stop_when=lambda x: _validate(prob, network, schema, x,
                                                       epsilon) is not None)
    res = solve(prob, _solve_config(config, **overrides))
    cert = Certificate(UNKNOWN, solver_status=res.status, objective_value=res.objective_value,
                       best_bound=res.best_bound, stats=res.stats.to_dict())
    if res.has_incumbent:
        hit = _validate(prob, network, schema, res.assignment, epsilon)
        if hit is not None:
            inst, hi, lo, s_hi, s_lo = hit
            cert.verdict = UNFAIR
            cert.counterexample = inst
            cert.z_pair = (schema.combinations[hi], schema.combinations[lo])
            cert.validated_scores = (s_hi, s_lo)
            return cert
    if res.status == STATUS_OPTIMAL and res.objective_value <= logit_threshold(epsilon):
        cert.verdict = FAIR
        cert.max_gap = res.objective_value
        return cert
    if res.status == STATUS_OPTIMAL:
        cert.reason = ("optimal logit gap exceeds the sound threshold but no score-level "
                       "violation was found")
    elif res.has_incumbent:
        cert.reason = f"solver stopped with status {res.status} before proving optimality"
    else:
        cert.reason = f"solver stopped with status {res.status} and no incumbent"
    return cert


def seed_counterexample(network, schema, epsilon=DEFAULT_EPSILON, near=None, config=None,
                        radius=DEFAULT_RADIUS, scorer=None):
    """Ask the solver for a validated 2-discriminant instance, or None.

    With ``near`` the non-protected numeric inputs are restricted to a box of
    half-width ``radius`` (encoded units) around it.  ``scorer`` replaces
    the network for validation (a guarded model, for instance).
    """
    prob = encode_pair_fairness(network, schema, epsilon=epsilon, near=near, radius=radius)

    def stop_when(x):
        return _validate(prob, network, schema, x, epsilon, scorer) is not None

    cfg = _solve_config(config, early_stop_threshold=logit_threshold(epsilon),
                        stop_when=stop_when)
    res = solve(prob, cfg)
    if not res.has_incumbent:
        return None
    hit = _validate(prob, network, schema, res.assignment, epsilon, scorer)
    return None if hit is None else hit[0]


class CounterexampleSeeder:
    """Repeated solver seeding on one network.

    The MILP is encoded once with big-M constants from the full input box.
    Each query narrows variable bounds only: the shared numeric inputs to
    the box around ``near``, the neuron parts to interval bounds propagated
    from that box (fixing the indicator of every locally stable neuron),
    and the objective to the local margin range.  The constraint matrix
    never changes, so each root relaxation is warm-started from the
    previous one.  Nodes whose bound cannot exceed the sound threshold are
    pruned, so a box without counterexamples is usually refuted quickly.
    """

    def __init__(self, network, schema, epsilon=DEFAULT_EPSILON, config=None,
                 radius=DEFAULT_RADIUS, scorer=None):
        self.network = network
        self.schema = schema
        self.epsilon = epsilon
        self.config = config
        self.radius = radius
        self.scorer = scorer
        self.problem = prob = encode_pair_fairness(network, schema, epsilon=epsilon)
        self._u = {}
        for f in schema.nonprotected:
            if not f.is_categorical:
                j = schema.layout[f.name].start
                self._u[j] = prob.id(f"u{j}")
        names = {v.name: i for i, v in enumerate(prob.variables)}
        self._neurons = []
        for v in (1, 2):
            for li, layer in enumerate(network.hidden_layers):
                for j in range(layer.output_width):
                    self._neurons.append((li, j, names[f"x{v}_{li}_{j}"],
                                          names[f"s{v}_{li}_{j}"],
                                          names.get(f"z{v}_{li}_{j}")))
        self._F = names["F"]
        self._warm = None
        self.last_result = None

    def bounds_near(self, near):
        """Variable bounds for the query around ``near`` (also retargets repair)."""
        lo, hi = self.problem.bounds()
        box = input_box(self.schema, near, self.radius)
        for j, vid in self._u.items():
            lo[vid], hi[vid] = box.lower[j], box.upper[j]
        lb = propagate(self.network, box)
        for li, j, x, s, z in self._neurons:
            L, U = lb.pre[li].lower[j], lb.pre[li].upper[j]
            if U <= 0.0:
                hi[x] = 0.0
                if z is not None:
                    lo[z] = hi[z] = 1.0
            elif L >= 0.0:
                hi[s] = 0.0
                if z is not None:
                    lo[z] = hi[z] = 0.0
            else:
                hi[x] = min(hi[x], U + BIG_M_SLACK)
                hi[s] = min(hi[s], -L + BIG_M_SLACK)
        w, b = _margin_row(self.network)
        last = lb.post[-2] if len(self.network.layers) > 1 else box
        mlo, mhi = affine_bounds(w[None, :], np.array([b]), last.lower, last.upper)
        hi[self._F] = min(hi[self._F], float(mhi[0] - mlo[0]) + BIG_M_SLACK)
        self.problem.codec.box = box
        return lo, hi

    def seed(self, near=None, timeout=None):
        """A validated counterexample near ``near`` (anywhere when None), or None.

        ``timeout`` caps the configured solver budget for this query.
        """
        prob = self.problem

        def stop_when(x):
            return _validate(prob, self.network, self.schema, x, self.epsilon,
                             self.scorer) is not None

        thr = logit_threshold(self.epsilon)
        cfg = _solve_config(self.config, early_stop_threshold=thr, stop_when=stop_when,
                            cutoff=thr)
        if timeout is not None:
            cfg.timeout_seconds = min(cfg.timeout_seconds, max(0.0, timeout))
        if near is not None:
            lo, hi = self.bounds_near(near)
        else:
            lo, hi = prob.bounds()
            prob.codec.box = input_box(self.schema)
        res = solve(prob, cfg, lo, hi, warm=self._warm)
        if res.root_state is not None:
            self._warm = res.root_state
        self.last_result = res
        if not res.has_incumbent:
            return None
        hit = _validate(prob, self.network, self.schema, res.assignment, self.epsilon,
                        self.scorer)
        return None if hit is None else hit[0]


def _margin_row(network):
    out = network.layers[-1]
    if network.output_width == 1:
        return out.weights[0], float(out.bias[0])
    fav = network.favorable_output_index
    return out.weights[fav] - out.weights[1 - fav], float(out.bias[fav] - out.bias[1 - fav])


def max_score_gap(network, schema, instance):
    """Largest pairwise score gap over the counterfactuals of ``instance``."""
    X = schema.counterfactual_batch(schema.encode(instance))
    s = np.atleast_1d(score(network, X))
    return float(s.max() - s.min())
