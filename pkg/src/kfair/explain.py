"""Explanations of where a model produces many distinct counterfactual outcomes.

Samples are drawn around max-k witnesses, labelled HighK or LowK by a
percentile threshold on their k values, and a Gini decision tree is fitted
on the non-protected features.  Each HighK leaf gives a conjunctive
predicate, which is kept only when the mean k inside it exceeds the mean k
of uniform samples outside it by at least ``delta``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._rng import make_rng
from .cluster import DEFAULT_EPSILON, bucketize, counterfactual_scores
from .exceptions import DegenerateKError, InputError, SchemaError

log = logging.getLogger(__name__)

HIGH_K = "HighK"
LOW_K = "LowK"
MAX_REJECTIONS = 100_000
_GAIN_TOL = 1e-12


@dataclass
class ExplainConfig:
    n_samples: int = 5000
    high_k_percentile: float = 0.95
    delta: float = 2.0
    tree_max_depth: int = 6
    tree_min_leaf: int = 20
    perturb_sigma_fraction: float = 0.10
    categorical_flip_prob: float = 0.10
    cex_samples: int = 500
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.high_k_percentile < 1.0:
            raise InputError("high_k_percentile must lie in (0, 1)")
        if not self.delta > 0:
            raise InputError("delta must be positive")
        if self.n_samples < 100:
            raise InputError("n_samples must be at least 100")
        if self.tree_max_depth < 1 or self.tree_min_leaf < 1 or self.cex_samples < 1:
            raise InputError("tree_max_depth, tree_min_leaf and cex_samples must be positive")
        if self.perturb_sigma_fraction < 0 or not 0.0 <= self.categorical_flip_prob <= 1.0:
            raise InputError("perturbation parameters out of range")

    def to_dict(self):
        return asdict(self)


# -- predicates -----------------------------------------------------------------

def _fmt(value, integral):
    return str(int(value)) if integral else f"{value:.6g}"


@dataclass(frozen=True)
class NumericAtom:
    """``lower < x <= upper``; a missing side is unbounded.

    Integral features store whole-number bounds, so ``x > 39`` and
    ``x <= 60`` read exactly.
    """

    feature: str
    lower: float = None
    upper: float = None
    integral: bool = False

    def holds(self, value):
        v = float(value)
        return ((self.lower is None or v > self.lower)
                and (self.upper is None or v <= self.upper))

    def is_empty(self, spec):
        if self.integral:
            return self.count(spec) == 0
        lo = spec.lower if self.lower is None else max(self.lower, spec.lower)
        hi = spec.upper if self.upper is None else min(self.upper, spec.upper)
        return hi <= lo

    def fraction(self, spec):
        """Share of the feature's domain satisfying the atom."""
        if self.integral:
            return self.count(spec) / (spec.span + 1)
        lo = spec.lower if self.lower is None else max(self.lower, spec.lower)
        hi = spec.upper if self.upper is None else min(self.upper, spec.upper)
        return max(0.0, hi - lo) / spec.span

    def count(self, spec):
        first = int(spec.lower) if self.lower is None else max(math.floor(self.lower) + 1,
                                                               int(spec.lower))
        last = int(spec.upper) if self.upper is None else min(math.floor(self.upper),
                                                              int(spec.upper))
        return max(0, last - first + 1)

    def text(self):
        lo = None if self.lower is None else _fmt(self.lower, self.integral)
        hi = None if self.upper is None else _fmt(self.upper, self.integral)
        if lo is not None and hi is not None:
            return f"{lo} < {self.feature} <= {hi}"
        if lo is not None:
            return f"{self.feature} > {lo}"
        return f"{self.feature} <= {hi}"

    def to_dict(self):
        return {"feature": self.feature, "kind": "numeric", "lower": self.lower,
                "upper": self.upper}


@dataclass(frozen=True)
class CategoricalAtom:
    feature: str
    allowed: tuple

    def holds(self, value):
        return str(value) in self.allowed

    def is_empty(self, spec):
        return not self.allowed

    def fraction(self, spec):
        return len(self.allowed) / len(spec.values)

    def count(self, spec):
        return len(self.allowed)

    def text(self):
        return f"{self.feature} IN {{{', '.join(self.allowed)}}}"

    def to_dict(self):
        return {"feature": self.feature, "kind": "categorical", "allowed": list(self.allowed)}


def atom_from_dict(doc, schema):
    spec = schema[doc["feature"]]
    if spec.protected:
        raise SchemaError(f"predicate atom on protected feature {spec.name!r}")
    if doc.get("kind") == "categorical" or spec.is_categorical:
        allowed = [spec.check(v) for v in doc["allowed"]]
        return CategoricalAtom(spec.name, tuple(v for v in spec.values if v in allowed))
    lo, hi = doc.get("lower"), doc.get("upper")
    return NumericAtom(spec.name, None if lo is None else float(lo),
                       None if hi is None else float(hi), spec.integral)


@dataclass
class ExplanationPredicate:
    """Conjunction of per-feature atoms plus the metrics filled on validation."""

    atoms: tuple
    leaf_class: str = HIGH_K
    n_samples: int = 0
    coverage_volume: float = None
    coverage_count: int = None
    mean_k_inside: float = None
    mean_k_outside: float = None
    witness_k: float = None
    perturbed_k: float = None
    robustness_diff: float = None

    @property
    def size(self):
        return len(self.atoms)

    def holds(self, instance):
        return all(a.holds(instance[a.feature]) for a in self.atoms)

    def holds_many(self, instances):
        return np.array([self.holds(r) for r in instances], dtype=bool)

    def text(self):
        return " AND ".join(a.text() for a in self.atoms) if self.atoms else "TRUE"

    def to_dict(self):
        return {
            "predicate": self.text(),
            "atoms": [a.to_dict() for a in self.atoms],
            "leaf_class": self.leaf_class,
            "n_samples": self.n_samples,
            "size": self.size,
            "coverage_volume": self.coverage_volume,
            "coverage_count": self.coverage_count,
            "mean_k_inside": self.mean_k_inside,
            "mean_k_outside": self.mean_k_outside,
            "witness_k": self.witness_k,
            "perturbed_k": self.perturbed_k,
            "robustness_diff": self.robustness_diff,
        }

    @classmethod
    def from_dict(cls, doc, schema):
        atoms = tuple(atom_from_dict(a, schema) for a in doc["atoms"])
        keys = ("n_samples", "coverage_volume", "coverage_count", "mean_k_inside",
                "mean_k_outside", "witness_k", "perturbed_k", "robustness_diff")
        return cls(atoms, doc.get("leaf_class", HIGH_K),
                   **{k: doc.get(k) for k in keys if doc.get(k) is not None})


def coverage_volume(predicate, schema):
    """Fraction of the non-protected domain satisfying ``predicate``.

    Integral features count lattice points, so the value is exact for
    discrete schemas.
    """
    vol = 1.0
    for a in predicate.atoms:
        vol *= a.fraction(schema[a.feature])
    return vol


def coverage_count(predicate, schema):
    """Number of discrete non-protected points inside, or None with continuous features."""
    total = 1
    for f in schema.nonprotected:
        if not (f.is_categorical or f.integral):
            return None
    atoms = {a.feature: a for a in predicate.atoms}
    for f in schema.nonprotected:
        if f.name in atoms:
            total *= atoms[f.name].count(f)
        else:
            total *= len(f.values) if f.is_categorical else int(f.span) + 1
    return total


# -- k evaluation ---------------------------------------------------------------

def k_values(scorer, schema, instances, epsilon=DEFAULT_EPSILON, workers=1):
    """k of every instance, evaluating all counterfactuals in batches."""
    rows = list(instances)

    def chunk(part):
        out = np.empty(len(part), dtype=int)
        for i, inst in enumerate(part):
            s = counterfactual_scores(scorer, schema, schema.encode(inst))
            out[i] = np.unique(bucketize(s, epsilon)).size
        return out

    if not rows:
        return np.zeros(0, dtype=int)
    if workers <= 1 or len(rows) < 2 * workers:
        return chunk(rows)
    parts = np.array_split(np.arange(len(rows)), workers)
    with ThreadPoolExecutor(workers) as pool:
        res = list(pool.map(lambda idx: chunk([rows[i] for i in idx]), parts))
    return np.concatenate(res)


# -- sampling -------------------------------------------------------------------

def local_perturbation(seed_instances, schema, config=None, rng=None):
    """Draw ``config.n_samples`` instances around uniformly chosen seeds.

    Numeric features get Gaussian jitter of ``perturb_sigma_fraction`` times
    their range (clamped, integral ones rounded); each categorical feature is
    resampled uniformly with probability ``categorical_flip_prob``.
    Protected features keep the seed's value.
    """
    cfg = config or ExplainConfig()
    rng = make_rng(cfg.rng_seed, "explain", "perturb") if rng is None else rng
    seeds = [schema.validate(s) for s in seed_instances]
    if not seeds:
        raise InputError("local_perturbation needs at least one seed instance")
    out = []
    for _ in range(cfg.n_samples):
        seed = seeds[int(rng.integers(len(seeds)))]
        for _attempt in range(100):
            inst = dict(seed)
            for f in schema.nonprotected:
                if f.is_categorical:
                    if rng.random() < cfg.categorical_flip_prob:
                        inst[f.name] = f.values[int(rng.integers(len(f.values)))]
                else:
                    v = seed[f.name] + rng.normal(0.0, cfg.perturb_sigma_fraction * f.span)
                    v = min(max(v, f.lower), f.upper)
                    inst[f.name] = int(round(v)) if f.integral else float(v)
            if not schema.violates_rules(inst):
                break
        else:
            inst = dict(seed)
        out.append(inst)
    return out


def label_high_low(k_values, percentile=0.95):
    """HighK mask and the nearest-rank threshold κ.

    HighK means k > κ, so that only the values strictly above the
    percentile are high; when that leaves nothing (many ties at the top),
    k >= κ is used instead.
    """
    k = np.asarray(k_values, dtype=float).reshape(-1)
    if k.size == 0:
        raise InputError("label_high_low needs at least one k value")
    if k.min() == k.max():
        raise DegenerateKError(f"all {k.size} sampled k values equal {int(k[0])}; "
                               "no high/low split exists")
    srt = np.sort(k)
    kappa = float(srt[max(0, math.ceil(percentile * k.size) - 1)])
    high = k > kappa
    if not high.any():
        high = k >= kappa
    return high, kappa


# -- decision tree ----------------------------------------------------------------

@dataclass
class TreeNode:
    """Split node (``feature`` set) or leaf (``label`` set).

    Numeric splits send ``x <= threshold`` left; categorical splits send
    ``x == category`` left.
    """

    counts: tuple
    label: str = None
    feature: int = None
    threshold: float = None
    category: int = None
    left: "TreeNode" = None
    right: "TreeNode" = None
    depth: int = 0

    @property
    def is_leaf(self):
        return self.feature is None


def _gini(w_high, w_low):
    tot = w_high + w_low
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(tot > 0, w_high / tot, 0.0)
    return 2.0 * p * (1.0 - p)


class GiniTreeClassifier(BaseEstimator):
    """Binary CART tree with Gini impurity and inverse-frequency class weights.

    ``X`` holds one column per feature; columns flagged in ``categorical``
    carry integer label codes and are split one label against the rest.
    Ties in gain go to the lowest feature index, then the lowest threshold.
    """

    def __init__(self, max_depth=6, min_samples_leaf=20, categorical=None):
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.categorical = categorical

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=bool)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise InputError("X must be 2-D with one row per label")
        if y.all() or not y.any():
            raise DegenerateKError("tree fitting needs both HighK and LowK samples")
        n = y.size
        w = np.where(y, n / (2.0 * y.sum()), n / (2.0 * (n - y.sum())))
        self.categorical_ = (np.zeros(X.shape[1], dtype=bool) if self.categorical is None
                             else np.asarray(self.categorical, dtype=bool))
        self.n_features_in_ = X.shape[1]
        self.tree_ = self._grow(X, y, w, np.arange(n), 0)
        return self

    def _leaf(self, y, w, idx, depth):
        wh, wl = float(w[idx][y[idx]].sum()), float(w[idx][~y[idx]].sum())
        counts = (int(y[idx].sum()), int((~y[idx]).sum()))
        return TreeNode(counts, HIGH_K if wh > wl else LOW_K, depth=depth)

    def _grow(self, X, y, w, idx, depth):
        node = self._leaf(y, w, idx, depth)
        if depth >= self.max_depth or node.counts[0] == 0 or node.counts[1] == 0:
            return node
        split = self._best_split(X[idx], y[idx], w[idx])
        if split is None:
            return node
        f, thr, cat = split
        go_left = X[idx, f] <= thr if cat is None else X[idx, f] == cat
        node.feature, node.threshold, node.category = f, thr, cat
        node.label = None
        node.left = self._grow(X, y, w, idx[go_left], depth + 1)
        node.right = self._grow(X, y, w, idx[~go_left], depth + 1)
        return node

    def _best_split(self, X, y, w):
        m = self.min_samples_leaf
        n = y.size
        wh_tot, wl_tot = float(w[y].sum()), float(w[~y].sum())
        parent = float(_gini(wh_tot, wl_tot)) * (wh_tot + wl_tot)
        best, best_gain = None, _GAIN_TOL
        for f in range(X.shape[1]):
            col = X[:, f]
            if self.categorical_[f]:
                cands = np.unique(col)
                lh = np.array([w[(col == c) & y].sum() for c in cands])
                ll = np.array([w[(col == c) & ~y].sum() for c in cands])
                nl = np.array([(col == c).sum() for c in cands])
                thr = cands
            else:
                order = np.argsort(col, kind="stable")
                cs = col[order]
                cut = np.flatnonzero(cs[1:] > cs[:-1])
                if cut.size == 0:
                    continue
                lh = np.cumsum(np.where(y[order], w[order], 0.0))[cut]
                ll = np.cumsum(np.where(y[order], 0.0, w[order]))[cut]
                nl = cut + 1
                thr = 0.5 * (cs[cut] + cs[cut + 1])
            ok = (nl >= m) & (n - nl >= m)
            if not ok.any():
                continue
            rh, rl = wh_tot - lh, wl_tot - ll
            child = _gini(lh, ll) * (lh + ll) + _gini(rh, rl) * (rh + rl)
            gain = np.where(ok, parent - child, -np.inf)
            j = int(np.argmax(gain))
            # argmax returns the lowest threshold among equal gains
            if gain[j] > best_gain + _GAIN_TOL:
                best_gain = float(gain[j])
                best = (f, None, float(thr[j])) if self.categorical_[f] else (f, float(thr[j]),
                                                                               None)
        return best

    def _route(self, row):
        node = self.tree_
        while not node.is_leaf:
            if node.category is None:
                node = node.left if row[node.feature] <= node.threshold else node.right
            else:
                node = node.left if row[node.feature] == node.category else node.right
        return node

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        return np.array([self._route(r).label == HIGH_K for r in X], dtype=bool)

    def leaves(self):
        out, stack = [], [self.tree_]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                out.append(node)
            else:
                stack.extend([node.right, node.left])
        return out

    @property
    def depth_(self):
        return max(leaf.depth for leaf in self.leaves())


def feature_matrix(schema, instances):
    """Raw non-protected values: numbers as is, categorical labels as codes."""
    feats = schema.nonprotected
    X = np.empty((len(instances), len(feats)))
    for i, inst in enumerate(instances):
        for j, f in enumerate(feats):
            v = inst[f.name]
            X[i, j] = f.values.index(str(v)) if f.is_categorical else float(v)
    return X


def build_decision_tree(schema, samples, labels, config=None):
    """Fit a :class:`GiniTreeClassifier` on the non-protected features of ``samples``."""
    cfg = config or ExplainConfig()
    tree = GiniTreeClassifier(cfg.tree_max_depth, cfg.tree_min_leaf,
                              [f.is_categorical for f in schema.nonprotected])
    return tree.fit(feature_matrix(schema, samples), labels)


def extract_paths(tree, schema):
    """One merged predicate per leaf, root to leaf; contradictory paths are dropped."""
    feats = schema.nonprotected
    out = []

    def walk(node, bounds):
        if node.is_leaf:
            atoms = []
            for j, f in enumerate(feats):
                if j not in bounds:
                    continue
                b = bounds[j]
                if f.is_categorical:
                    atom = CategoricalAtom(f.name, tuple(v for i, v in enumerate(f.values)
                                                         if i in b))
                    if len(atom.allowed) == len(f.values):
                        continue
                else:
                    atom = NumericAtom(f.name, b[0], b[1], f.integral)
                if atom.is_empty(f):
                    log.info("dropping contradictory path at %s", atom.text())
                    return
                atoms.append(atom)
            out.append(ExplanationPredicate(tuple(atoms), node.label, sum(node.counts)))
            return
        j, f = node.feature, feats[node.feature]
        for side, child in (("left", node.left), ("right", node.right)):
            nb = dict(bounds)
            if f.is_categorical:
                cur = nb.get(j, set(range(len(f.values))))
                c = int(node.category)
                nb[j] = cur & {c} if side == "left" else cur - {c}
            else:
                lo, hi = nb.get(j, (None, None))
                t = math.floor(node.threshold) if f.integral else node.threshold
                if side == "left":
                    hi = t if hi is None else min(hi, t)
                else:
                    lo = t if lo is None else max(lo, t)
                nb[j] = (lo, hi)
            walk(child, nb)

    walk(tree.tree_, {})
    return out


# -- validation -------------------------------------------------------------------

@dataclass
class PathVerdict:
    accepted: bool
    predicate: ExplanationPredicate
    reason: str = None


def sample_outside(schema, predicate, n, rng):
    """``n`` uniform instances falsifying ``predicate``, or None after too many draws."""
    out, draws = [], 0
    while len(out) < n:
        if draws >= MAX_REJECTIONS:
            return None
        draws += 1
        inst = schema.random_instance(rng)
        if not predicate.holds(inst):
            out.append(inst)
    return out


def _outside_values(spec, atom, value):
    """Candidate values just outside ``atom``, nearest first."""
    if spec.is_categorical:
        return [v for v in spec.values if v not in atom.allowed][:1]
    step = 1.0 if spec.integral else spec.span * 1e-3
    cands = []
    if atom.upper is not None:
        up = atom.upper + step if not spec.integral else math.floor(atom.upper) + 1
        if up <= spec.upper:
            cands.append(up)
    if atom.lower is not None:
        down = math.floor(atom.lower) if spec.integral else atom.lower - step
        if down >= spec.lower:
            cands.append(down)
    cands.sort(key=lambda c: (abs(c - float(value)), -c))
    return [int(c) if spec.integral else float(c) for c in cands[:1]]


def robustness(scorer, schema, predicate, witness, epsilon=DEFAULT_EPSILON):
    """(k of witness, mean k over one-feature flips out of the predicate, Diff)."""
    witness = schema.validate(witness)
    k_w = float(k_values(scorer, schema, [witness], epsilon)[0])
    flips = []
    for atom in predicate.atoms:
        spec = schema[atom.feature]
        for v in _outside_values(spec, atom, witness[atom.feature]):
            inst = dict(witness)
            inst[atom.feature] = v
            if not schema.violates_rules(inst):
                flips.append(inst)
    if not flips:
        return k_w, k_w, 0.0
    pert = float(np.mean(k_values(scorer, schema, flips, epsilon)))
    return k_w, pert, k_w - pert


def robustness_diff(scorer, schema, predicate, witness, epsilon=DEFAULT_EPSILON):
    """k(witness) minus the mean k after moving each constrained feature just outside."""
    return robustness(scorer, schema, predicate, witness, epsilon)[2]


def validate_path(scorer, schema, predicate, samples, sample_k, config=None, rng=None,
                  epsilon=DEFAULT_EPSILON, workers=1):
    """Accept ``predicate`` when mean k inside minus mean k outside is at least delta.

    Inside uses the provided samples satisfying the predicate, outside uses
    ``cex_samples`` uniform draws that falsify it.
    """
    cfg = config or ExplainConfig()
    rng = make_rng(cfg.rng_seed, "explain", "validate") if rng is None else rng
    sample_k = np.asarray(sample_k, dtype=float)
    inside = predicate.holds_many(samples)
    if not inside.any():
        return PathVerdict(False, predicate, "no sample satisfies the predicate")
    outside = sample_outside(schema, predicate, cfg.cex_samples, rng)
    if outside is None:
        return PathVerdict(False, predicate,
                           f"negation not sampled within {MAX_REJECTIONS} uniform draws")
    predicate.mean_k_inside = float(sample_k[inside].mean())
    predicate.mean_k_outside = float(np.mean(k_values(scorer, schema, outside, epsilon,
                                                      workers)))
    diff = predicate.mean_k_inside - predicate.mean_k_outside
    if diff < cfg.delta:
        return PathVerdict(False, predicate,
                           f"mean k difference {diff:.3f} below delta {cfg.delta}")
    predicate.coverage_volume = coverage_volume(predicate, schema)
    predicate.coverage_count = coverage_count(predicate, schema)
    return PathVerdict(True, predicate)


# -- pipeline -----------------------------------------------------------------------

@dataclass
class Explanation:
    predicates: list
    rejected: list
    kappa: float
    n_samples: int
    n_high: int
    tree_depth: int
    n_leaves: int
    config: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "predicates": [p.to_dict() for p in self.predicates],
            "rejected": [{"predicate": v.predicate.text(), "reason": v.reason}
                         for v in self.rejected],
            "kappa": self.kappa,
            "n_samples": self.n_samples,
            "n_high": self.n_high,
            "tree_depth": self.tree_depth,
            "n_leaves": self.n_leaves,
            "config": self.config,
        }


def explain(scorer, schema, seeds, config=None, epsilon=DEFAULT_EPSILON, workers=1):
    """Run the whole pipeline from max-k witnesses ``seeds`` to accepted predicates.

    Raises DegenerateKError when the sampled k values leave no HighK/LowK split.
    """
    cfg = config or ExplainConfig()
    seeds = [schema.validate(s) for s in seeds]
    samples = local_perturbation(seeds, schema, cfg, make_rng(cfg.rng_seed, "explain",
                                                              "perturb"))
    ks = k_values(scorer, schema, samples, epsilon, workers)
    high, kappa = label_high_low(ks, cfg.high_k_percentile)
    tree = build_decision_tree(schema, samples, high, cfg)
    paths = extract_paths(tree, schema)
    vrng = make_rng(cfg.rng_seed, "explain", "validate")
    seed_k = k_values(scorer, schema, seeds, epsilon)
    accepted, rejected = [], []
    for pred in paths:
        if pred.leaf_class != HIGH_K:
            continue
        verdict = validate_path(scorer, schema, pred, samples, ks, cfg, vrng, epsilon, workers)
        if not verdict.accepted:
            log.info("rejected %s: %s", pred.text(), verdict.reason)
            rejected.append(verdict)
            continue
        witness = _witness(pred, seeds, seed_k, samples, ks)
        pred.witness_k, pred.perturbed_k, pred.robustness_diff = robustness(
            scorer, schema, pred, witness, epsilon)
        accepted.append(pred)
    return Explanation(accepted, rejected, kappa, len(samples), int(high.sum()),
                       tree.depth_, len(tree.leaves()), cfg.to_dict())


def _witness(pred, seeds, seed_k, samples, ks):
    """Highest-k seed inside ``pred``, else the highest-k sample inside it."""
    for pool, kv in ((seeds, seed_k), (samples, ks)):
        inside = pred.holds_many(pool)
        if inside.any():
            idx = np.flatnonzero(inside)
            return pool[int(idx[np.argmax(kv[idx])])]
    raise InputError("no witness satisfies the predicate")


class DiscriminationExplainer(TransformerMixin, BaseEstimator):
    """Estimator facade over :func:`explain`.

    ``fit`` takes max-k witness instances; ``transform`` returns one boolean
    column per accepted predicate and ``predict`` flags rows inside any of
    them.
    """

    def __init__(self, scorer=None, schema=None, epsilon=DEFAULT_EPSILON, n_samples=5000,
                 high_k_percentile=0.95, delta=2.0, tree_max_depth=6, tree_min_leaf=20,
                 rng_seed=0):
        self.scorer = scorer
        self.schema = schema
        self.epsilon = epsilon
        self.n_samples = n_samples
        self.high_k_percentile = high_k_percentile
        self.delta = delta
        self.tree_max_depth = tree_max_depth
        self.tree_min_leaf = tree_min_leaf
        self.rng_seed = rng_seed

    def fit(self, X, y=None):
        cfg = ExplainConfig(n_samples=self.n_samples, high_k_percentile=self.high_k_percentile,
                            delta=self.delta, tree_max_depth=self.tree_max_depth,
                            tree_min_leaf=self.tree_min_leaf, rng_seed=self.rng_seed)
        self.explanation_ = explain(self.scorer, self.schema, X, cfg, self.epsilon)
        self.predicates_ = self.explanation_.predicates
        return self

    def transform(self, X):
        rows = X.rows if hasattr(X, "rows") else X
        return np.column_stack([p.holds_many(rows) for p in self.predicates_]
                               or [np.zeros(len(rows), dtype=bool)])

    def predict(self, X):
        return self.transform(X).any(axis=1)
