"""Randomized search for inputs with many distinct counterfactual outcomes.

A run starts from a solver counterexample near a random dataset row and
then walks the input space.  Random walk (RW) always moves to a neighbor;
simulated annealing (SA) keeps a current point and accepts candidates by the
Metropolis rule; SA_KNN replaces neighbor moves with jumps to nearby
dataset rows.  When the best k stalls, the solver is queried again near a
fresh row.  Every evaluated instance with k >= 2 is an individual
discriminatory instance (ID).
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator

from ._rng import make_rng
from .cluster import (DEFAULT_EPSILON, DiscriminationRecord, bucketize,
                      counterfactual_scores, n_buckets)
from .exceptions import InputError
from .milp.bnb import SolveConfig
from .milp.certify import CounterexampleSeeder

log = logging.getLogger(__name__)

RW = "RW"
SA = "SA"
SA_KNN = "SA_KNN"
STRATEGIES = (RW, SA, SA_KNN)

DEFAULT_TIMEOUT = 14_400.0
CONTINUOUS_STEP = 0.01


@dataclass
class SearchConfig:
    strategy: str = SA
    epsilon: float = DEFAULT_EPSILON
    timeout_seconds: float = DEFAULT_TIMEOUT
    p_exploit: float = 0.9
    temperature_initial: float = 1.0
    temperature_decay: float = 0.995
    temperature_floor: float = 1e-3
    stagnation_limit: int = 50
    knn_neighbors: int = 5
    seed_radius: float = 0.2
    solver_timeout: float = 100.0
    solver_max_nodes: int = None
    max_iterations: int = None
    stop_k: int = None
    rng_seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise InputError(f"unknown strategy {self.strategy!r}; use one of {STRATEGIES}")
        if not 0.9 <= self.p_exploit <= 1.0:
            raise InputError("p_exploit must lie in [0.9, 1]")
        if not 0.0 < self.temperature_decay < 1.0:
            raise InputError("temperature_decay must lie in (0, 1)")
        if self.temperature_initial <= 0 or self.temperature_floor <= 0:
            raise InputError("temperatures must be positive")
        if self.stagnation_limit < 1 or self.knn_neighbors < 1:
            raise InputError("stagnation_limit and knn_neighbors must be positive")

    def to_dict(self):
        return asdict(self)


@dataclass
class SearchReport:
    strategy: str
    iterations: int = 0
    candidates: int = 0
    max_k: int = 1
    avg_k: float = 0.0
    num_id: int = 0
    success_rate: float = 0.0
    num_id_max_k: int = 0
    first_id_iteration: int = None
    max_k_iteration: int = None
    t_first_id_seconds: float = None
    t_max_k_seconds: float = None
    wall_time: float = 0.0
    solver_queries: int = 0
    solver_hits: int = 0
    degraded: bool = False
    best_instances: list = field(default_factory=list)
    ids: list = field(default_factory=list)

    TIMING_FIELDS = ("t_first_id_seconds", "t_max_k_seconds", "wall_time")

    def to_dict(self, timing=True, include_ids=True):
        d = {
            "strategy": self.strategy, "iterations": self.iterations,
            "candidates": self.candidates, "max_k": self.max_k, "avg_k": self.avg_k,
            "num_id": self.num_id, "success_rate": self.success_rate,
            "num_id_max_k": self.num_id_max_k, "first_id_iteration": self.first_id_iteration,
            "max_k_iteration": self.max_k_iteration, "solver_queries": self.solver_queries,
            "solver_hits": self.solver_hits, "degraded": self.degraded,
            "best_instances": [r.to_dict() for r in self.best_instances],
        }
        if include_ids:
            d["ids"] = [r.to_dict() for r in self.ids]
        if timing:
            d.update({k: getattr(self, k) for k in self.TIMING_FIELDS})
        return d

    def timings(self):
        return {k: getattr(self, k) for k in self.TIMING_FIELDS}

    @classmethod
    def from_dict(cls, doc):
        rep = cls(doc["strategy"])
        for k, v in doc.items():
            if k in ("best_instances", "ids"):
                setattr(rep, k, [DiscriminationRecord.from_dict(r) for r in v])
            elif hasattr(rep, k):
                setattr(rep, k, v)
        return rep


# -- moves ------------------------------------------------------------------------

def propose_neighbor(current, schema, rng):
    """Mutate one uniformly chosen non-protected feature by one step."""
    cand = dict(current)
    f = schema.nonprotected[int(rng.integers(len(schema.nonprotected)))]
    if f.is_categorical:
        others = [v for v in f.values if v != current[f.name]]
        cand[f.name] = others[int(rng.integers(len(others)))]
        return cand
    step = 1.0 if f.integral else CONTINUOUS_STEP * f.span
    direction = 1.0 if rng.random() < 0.5 else -1.0
    v = min(max(float(current[f.name]) + direction * step, f.lower), f.upper)
    cand[f.name] = int(round(v)) if f.integral else v
    return cand


def accept_metropolis(k_current, k_candidate, temperature, rng):
    """Accept improvements and ties; accept a drop with prob. exp(dk / T)."""
    if temperature <= 0:
        raise InputError("temperature must be positive")
    if k_candidate >= k_current:
        return True
    return bool(rng.random() < math.exp((k_candidate - k_current) / temperature))


def build_knn_index(dataset):
    if dataset is None or len(dataset) == 0:
        return None
    return cKDTree(dataset.X)


def _random_row(dataset, schema, rng):
    if dataset is None or len(dataset) == 0:
        return schema.random_instance(rng)
    return dict(dataset.rows[int(rng.integers(len(dataset)))])


def pick_candidate_source(strategy, current, dataset, knn_index, p_exploit, rng, schema,
                          knn_neighbors=5):
    """Next candidate for ``strategy`` (see module docstring)."""
    if strategy == RW:
        return propose_neighbor(current, schema, rng)
    exploit = rng.random() < p_exploit
    if not exploit:
        return _random_row(dataset, schema, rng)
    if strategy == SA:
        return propose_neighbor(current, schema, rng)
    if knn_index is None:
        return schema.random_instance(rng)
    n = min(knn_neighbors, knn_index.n)
    _, idx = knn_index.query(schema.encode(current), k=n)
    idx = np.atleast_1d(idx)
    return dict(dataset.rows[int(idx[int(rng.integers(idx.size))])])


# -- the search loop --------------------------------------------------------------

class _Run:
    def __init__(self, network, schema, dataset, config, scorer, clock):
        self.net = network
        self.schema = schema
        self.dataset = dataset
        self.cfg = config
        self.scorer = network if scorer is None else scorer
        self.clock = clock
        self.rng = make_rng(config.rng_seed, "search")
        self.knn = build_knn_index(dataset) if config.strategy == SA_KNN else None
        self.report = SearchReport(config.strategy)
        self.seen = {}
        self.k_bound = min(schema.K, n_buckets(config.epsilon))
        self.seeder = None
        self.t0 = clock()

    def elapsed(self):
        return self.clock() - self.t0

    def evaluate(self, instance):
        """k of ``instance``; records it when it is a new ID."""
        rep = self.report
        rep.candidates += 1
        vec = self.schema.encode(instance)
        scores = counterfactual_scores(self.scorer, self.schema, vec)
        buckets = bucketize(scores, self.cfg.epsilon)
        k = int(np.unique(buckets).size)
        if k >= 2:
            key = np.round(vec, 9).tobytes()
            if key not in self.seen:
                rec = DiscriminationRecord(self.schema.validate(instance),
                                           [float(s) for s in scores],
                                           [int(b) for b in buckets], k)
                self.seen[key] = rec
                rep.ids.append(rec)
                if rep.first_id_iteration is None:
                    rep.first_id_iteration = rep.iterations
                    rep.t_first_id_seconds = self.elapsed()
            if k > rep.max_k:
                rep.max_k = k
                rep.max_k_iteration = rep.iterations
                rep.t_max_k_seconds = self.elapsed()
        return k

    def solver_seed(self):
        """A validated solver counterexample near a random row, else the row."""
        row = _random_row(self.dataset, self.schema, self.rng)
        self.report.solver_queries += 1
        if self.seeder is None:
            cfg = SolveConfig(timeout_seconds=self.cfg.solver_timeout,
                              max_nodes=self.cfg.solver_max_nodes)
            self.seeder = CounterexampleSeeder(
                self.net, self.schema, self.cfg.epsilon, config=cfg,
                radius=self.cfg.seed_radius,
                scorer=None if self.scorer is self.net else self.scorer)
        found = self.seeder.seed(row, self.cfg.timeout_seconds - self.elapsed())
        if found is None:
            self.report.degraded = True
            return row
        self.report.solver_hits += 1
        return found

    def done(self):
        cfg, rep = self.cfg, self.report
        if cfg.max_iterations is not None and rep.iterations >= cfg.max_iterations:
            return True
        if cfg.stop_k is not None and rep.max_k >= cfg.stop_k:
            return True
        if rep.max_k >= self.k_bound:
            return True
        return self.elapsed() >= cfg.timeout_seconds

    def run(self):
        cfg, rep = self.cfg, self.report
        current = self.solver_seed()
        k_cur = self.evaluate(current)
        best = k_cur
        stale = 0
        temp = cfg.temperature_initial
        while not self.done():
            rep.iterations += 1
            cand = pick_candidate_source(cfg.strategy, current, self.dataset, self.knn,
                                         cfg.p_exploit, self.rng, self.schema,
                                         cfg.knn_neighbors)
            k_cand = self.evaluate(cand)
            if cfg.strategy == RW or accept_metropolis(k_cur, k_cand, temp, self.rng):
                current, k_cur = cand, k_cand
            temp = max(temp * cfg.temperature_decay, cfg.temperature_floor)
            if k_cand > best:
                best, stale = k_cand, 0
            else:
                stale += 1
            if stale >= cfg.stagnation_limit and not self.done():
                current = self.solver_seed()
                k_cur = self.evaluate(current)
                best, stale = k_cur, 0
                temp = cfg.temperature_initial
        rep.wall_time = self.elapsed()
        return self.finish()

    def finish(self):
        rep = self.report
        rep.num_id = len(rep.ids)
        rep.avg_k = float(np.mean([r.k_value for r in rep.ids])) if rep.ids else 0.0
        rep.success_rate = 100.0 * rep.num_id / rep.candidates if rep.candidates else 0.0
        rep.best_instances = [r for r in rep.ids if r.k_value == rep.max_k and rep.max_k >= 2]
        rep.num_id_max_k = len(rep.best_instances)
        return rep


def run_search(network, schema, dataset=None, config=None, scorer=None, clock=time.monotonic):
    """Run one search and return its :class:`SearchReport`.

    ``scorer`` replaces the network for k evaluation (a guarded model, for
    instance); the solver always works on ``network``.
    """
    cfg = config or SearchConfig()
    if network.input_width != schema.input_width:
        raise InputError("network and schema disagree on the input width")
    run = _Run(network, schema, dataset, cfg, scorer, clock)
    rep = run.run()
    log.info("search %s: %d iterations, max_k=%d, #ID=%d", cfg.strategy, rep.iterations,
             rep.max_k, rep.num_id)
    return rep


class KDiscriminationSearch(BaseEstimator):
    """Estimator facade: ``fit(dataset)`` runs the search into ``report_``."""

    def __init__(self, network=None, schema=None, strategy=SA, epsilon=DEFAULT_EPSILON,
                 timeout_seconds=DEFAULT_TIMEOUT, max_iterations=None, rng_seed=0):
        self.network = network
        self.schema = schema
        self.strategy = strategy
        self.epsilon = epsilon
        self.timeout_seconds = timeout_seconds
        self.max_iterations = max_iterations
        self.rng_seed = rng_seed

    def fit(self, X=None, y=None):
        cfg = SearchConfig(strategy=self.strategy, epsilon=self.epsilon,
                           timeout_seconds=self.timeout_seconds,
                           max_iterations=self.max_iterations, rng_seed=self.rng_seed)
        self.report_ = run_search(self.network, self.schema, X, cfg)
        return self

    def predict(self, X):
        """k of every row of a dataset (or list of instances)."""
        rows = X.rows if hasattr(X, "rows") else X
        return np.array([
            np.unique(bucketize(counterfactual_scores(
                self.network, self.schema, self.schema.encode(r)), self.epsilon)).size
            for r in rows])
