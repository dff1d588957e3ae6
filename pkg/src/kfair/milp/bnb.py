"""Best-bound branch-and-bound over binary variables.

Each node's LP relaxation is warm-started from its parent's optimal basis.
Branching picks the most fractional binary (lowest id on ties).  New
incumbents come from integral relaxations and from the problem's ``repair``
hook: its 0/1 assignment is fixed and the remaining LP re-solved.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import NumericalError
from .lp import INFEASIBLE, OPTIMAL

log = logging.getLogger(__name__)

STATUS_OPTIMAL = "Optimal"
STATUS_FEASIBLE = "FeasibleIncumbent"
STATUS_INFEASIBLE = "Infeasible"
STATUS_TIMED_OUT = "TimedOut"

INT_TOL = 1e-6
VIOLATION_TOL = 1e-6


@dataclass
class SolveConfig:
    timeout_seconds: float = 100.0
    tolerance: float = 1e-4
    early_stop_threshold: float = None
    # extra test applied to an incumbent above the threshold before stopping
    stop_when: object = None
    workers: int = 1
    repair_every: int = 4
    max_nodes: int = None
    # prune every node whose bound is at or below this value; Infeasible then
    # means no point above the cutoff exists
    cutoff: float = None


@dataclass
class SolveStats:
    nodes_explored: int = 0
    lp_iterations: int = 0
    wall_time: float = 0.0
    unresolved_nodes: int = 0
    incumbent_updates: int = 0

    def to_dict(self, timing=True):
        d = {
            "nodes_explored": self.nodes_explored,
            "lp_iterations": self.lp_iterations,
            "unresolved_nodes": self.unresolved_nodes,
            "incumbent_updates": self.incumbent_updates,
        }
        if timing:
            d["wall_time"] = self.wall_time
        return d


@dataclass
class SolveResult:
    status: str
    objective_value: float = None
    assignment: np.ndarray = None
    stats: SolveStats = field(default_factory=SolveStats)
    best_bound: float = None
    # optimal basis of the root relaxation, reusable as ``warm`` later
    root_state: tuple = None

    @property
    def has_incumbent(self):
        return self.assignment is not None

    def value(self, problem, name):
        return float(self.assignment[problem.id(name)])


class _Search:
    def __init__(self, problem, config, lower=None, upper=None):
        self.p = problem
        self.cfg = config
        self.c = problem.matrices()[0]
        self.program = problem.linear_program()
        self.lo0, self.hi0 = problem.bounds()
        if lower is not None:
            self.lo0 = np.asarray(lower, dtype=float).copy()
        if upper is not None:
            self.hi0 = np.asarray(upper, dtype=float).copy()
        self.bins = problem.binary_ids
        self.const = problem.objective.constant
        self.stats = SolveStats()
        self.best_val = -math.inf
        self.best_x = None
        self.t0 = time.monotonic()

    def elapsed(self):
        return time.monotonic() - self.t0

    def lp(self, fixes, warm=None):
        lo, hi = self.lo0.copy(), self.hi0.copy()
        for k, v in fixes.items():
            lo[k] = hi[k] = v
        return self.program.solve(lo, hi, warm, self.t0 + self.cfg.timeout_seconds)

    def gap_tol(self):
        return self.cfg.tolerance * max(1.0, abs(self.best_val))

    def prune_level(self):
        level = -math.inf if self.best_x is None else self.best_val + self.gap_tol()
        if self.cfg.cutoff is not None:
            level = max(level, self.cfg.cutoff)
        return level

    def offer(self, x):
        """Try ``x`` as an incumbent; True when it improved the incumbent."""
        x = x.copy()
        x[self.bins] = np.round(x[self.bins])
        if self.p.max_violation(x) > VIOLATION_TOL * max(1.0, np.max(np.abs(x))):
            return False
        val = float(self.c @ x) + self.const
        if val > self.best_val + 1e-12:
            self.best_val, self.best_x = val, x
            self.stats.incumbent_updates += 1
            return True
        return False

    def should_stop_early(self):
        thr = self.cfg.early_stop_threshold
        if thr is None or self.best_x is None or self.best_val <= thr:
            return False
        return self.cfg.stop_when is None or bool(self.cfg.stop_when(self.best_x))

    def try_repair(self, x, warm=None):
        fixes = self.p.repair(x)
        if not fixes:
            return False
        try:
            res = self.lp(fixes, warm)
        except NumericalError:
            return False
        self.stats.lp_iterations += res.nit
        return res.status == OPTIMAL and self.offer(res.x)


def solve(problem, config=None, lower=None, upper=None, warm=None):
    """Maximize ``problem.objective``; see :class:`SolveResult` for outcomes.

    ``lower``/``upper`` override the declared variable bounds and ``warm``
    seeds the root relaxation with a basis from an earlier solve of the
    same problem.
    """
    cfg = config or SolveConfig()
    s = _Search(problem, cfg, lower, upper)
    tie = itertools.count()
    heap = [(-math.inf, next(tie), {}, warm)]
    root_state = None
    unresolved_bound = -math.inf
    timed_out = False
    early = False

    def evaluate(node):
        fixes, warm = node
        try:
            return s.lp(fixes, warm)
        except NumericalError as exc:
            log.debug("node unresolved: %s", exc)
            return None

    pool = ThreadPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        while heap:
            if s.elapsed() > cfg.timeout_seconds:
                timed_out = True
                break
            if cfg.max_nodes is not None and s.stats.nodes_explored >= cfg.max_nodes:
                timed_out = True
                break
            batch = []
            while heap and len(batch) < max(1, cfg.workers):
                key, _, fixes, warm = heapq.heappop(heap)
                if -key <= s.prune_level():
                    heap.clear()
                    break
                batch.append((-key, (fixes, warm)))
            if not batch:
                break
            results = (list(pool.map(evaluate, [node for _, node in batch])) if pool
                       else [evaluate(node) for _, node in batch])
            for pos, ((parent_bound, (fixes, _)), res) in enumerate(zip(batch, results)):
                s.stats.nodes_explored += 1
                if res is None or res.status not in (OPTIMAL, INFEASIBLE):
                    s.stats.unresolved_nodes += 1
                    unresolved_bound = max(unresolved_bound, parent_bound)
                    continue
                s.stats.lp_iterations += res.nit
                if not fixes and res.status == OPTIMAL:
                    root_state = res.state
                if res.status == INFEASIBLE:
                    continue
                val = -res.fun + s.const
                if val <= s.prune_level():
                    continue
                xb = res.x[s.bins]
                frac = np.abs(xb - np.round(xb))
                if frac.size == 0 or frac.max() <= INT_TOL:
                    s.offer(res.x)
                elif problem.repair is not None and (
                        s.stats.nodes_explored == 1
                        or s.stats.nodes_explored % cfg.repair_every == 0):
                    s.try_repair(res.x, res.state)
                if s.should_stop_early():
                    # the stopped node and any unprocessed batch members stay open
                    open_bound = max([val] + [b for b, _ in batch[pos + 1:]])
                    early = True
                    break
                if frac.size == 0 or frac.max() <= INT_TOL:
                    continue
                if val <= s.prune_level():
                    continue
                # most fractional: distance to 0.5, lowest id wins ties
                j = int(np.argmin(np.abs(xb - 0.5)))
                var = int(s.bins[j])
                first = 1 if xb[j] >= 0.5 else 0
                for v in (first, 1 - first):
                    child = dict(fixes)
                    child[var] = v
                    heapq.heappush(heap, (-val, next(tie), child, res.state))
            if early:
                break
    finally:
        if pool:
            pool.shutdown()

    s.stats.wall_time = s.elapsed()
    remaining = max([-k for k, _, _, _ in heap], default=-math.inf)
    best_bound = max(remaining, unresolved_bound, s.best_val)
    if early:
        best_bound = max(best_bound, open_bound)
        status = STATUS_FEASIBLE
    elif timed_out:
        status = STATUS_TIMED_OUT
    elif s.best_x is None:
        status = STATUS_INFEASIBLE if unresolved_bound == -math.inf else STATUS_TIMED_OUT
    elif unresolved_bound > s.best_val + s.gap_tol():
        status = STATUS_FEASIBLE
    elif cfg.cutoff is not None and s.best_val <= cfg.cutoff:
        status = STATUS_FEASIBLE
    else:
        status = STATUS_OPTIMAL
        best_bound = s.best_val if not heap else best_bound
    obj = s.best_val if s.best_x is not None else None
    return SolveResult(status, obj, s.best_x, s.stats,
                       None if best_bound == -math.inf else best_bound, root_state)
