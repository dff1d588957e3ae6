"""Interventions against k-discrimination and their before/after measurement.

Two interventions are provided.  Guardrails wrap a network and refuse to
answer inside explanation predicates.  Retraining fine-tunes a network on
a dataset augmented with the counterfactuals of discriminatory instances,
each labelled by the majority prediction over its counterfactual set.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ._rng import make_rng
from .cluster import DEFAULT_EPSILON
from .data import Dataset
from .exceptions import DivergenceError, InputError, SchemaError
from .model import IDENTITY, DenseLayer, Network, forward, predict_label, scores_from_logits
from .search import SearchConfig, run_search

log = logging.getLogger(__name__)

ABSTAIN = "abstain"
ORIGINAL = "Original"
ORIGINAL_DT = "Original+DT"
DEBIASED = "Debiased"
DEBIASED_DT = "Debiased+DT"


# -- guardrails ------------------------------------------------------------------

@dataclass(frozen=True)
class GuardOutcome:
    """``guarded`` tells whether a guard fired; ``score`` is NaN on abstention."""

    guarded: bool
    score: float


class GuardedModel:
    """A network whose answers are replaced inside any guard predicate.

    ``policy`` is ``"abstain"`` (score NaN, one reserved bucket) or a fixed
    score in [0, 1].
    """

    def __init__(self, network, schema, guards=(), policy=ABSTAIN):
        self.network = network
        self.schema = schema
        self.guards = list(guards)
        for g in self.guards:
            for a in g.atoms:
                if schema[a.feature].protected:
                    raise SchemaError(f"guard references protected feature {a.feature!r}")
        if policy != ABSTAIN and not 0.0 <= float(policy) <= 1.0:
            raise InputError("fixed guard score must lie in [0, 1]")
        self.policy = policy

    @property
    def input_width(self):
        return self.network.input_width

    @property
    def _fill(self):
        return math.nan if self.policy == ABSTAIN else float(self.policy)

    def guard_mask(self, X):
        """Rows of encoded ``X`` on which some guard fires."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if not self.guards:
            return np.zeros(X.shape[0], dtype=bool)
        rows = [self.schema.decode(x) for x in X]
        return np.array([any(g.holds(r) for g in self.guards) for r in rows], dtype=bool)

    def score_batch(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        s = np.atleast_1d(scores_from_logits(self.network, forward(self.network, X)))
        s = np.array(s, dtype=float)
        s[self.guard_mask(X)] = self._fill
        return s

    def predict_batch(self, X):
        """Labels, with -1 where the model abstains."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        lab = np.atleast_1d(predict_label(self.network, X)).astype(int)
        mask = self.guard_mask(X)
        if self.policy == ABSTAIN:
            lab[mask] = -1
        else:
            fixed = _label_from_score(self.network, float(self.policy))
            lab[mask] = fixed
        return lab

    def to_dict(self):
        return {"policy": self.policy, "guards": [g.to_dict() for g in self.guards]}


def _label_from_score(network, s):
    fav = 1 if network.output_width == 1 else network.favorable_output_index
    other = 0 if network.output_width == 1 else 1 - fav
    return fav if s > 0.5 else other


def guard_score(guarded, instance):
    """Guarded outcome or the network's score for one instance."""
    inst = guarded.schema.validate(instance)
    vec = guarded.schema.encode(inst)
    if any(g.holds(inst) for g in guarded.guards):
        return GuardOutcome(True, guarded._fill)
    return GuardOutcome(False, float(scores_from_logits(guarded.network,
                                                        forward(guarded.network, vec))))


# -- augmentation ---------------------------------------------------------------------

def favorable_label(network):
    return 1 if network.output_width == 1 else network.favorable_output_index


def augment_dataset(dataset, discriminatory, schema, network):
    """Append every counterfactual of each record with its majority predicted label.

    Ties go to the favorable label; rows already present (by encoded vector)
    are skipped.
    """
    if not dataset.has_labels:
        raise InputError("augmentation needs a labelled dataset")
    seen = {np.round(v, 9).tobytes() for v in dataset.X}
    rows, labels = [], []
    fav = favorable_label(network)
    for rec in discriminatory:
        cfs = schema.enumerate_counterfactuals(rec.instance)
        pred = np.atleast_1d(predict_label(network, schema.encode_many(cfs)))
        vals, counts = np.unique(pred, return_counts=True)
        top = vals[counts == counts.max()]
        label = fav if fav in top else int(top.min())
        for cf in cfs:
            key = np.round(schema.encode(cf), 9).tobytes()
            if key in seen:
                continue
            seen.add(key)
            rows.append(cf)
            labels.append(label)
    if not rows:
        return Dataset(schema, list(dataset.rows), dataset.labels.copy())
    return dataset.concat(Dataset(schema, rows, np.array(labels, dtype=int)))


# -- fine-tuning ------------------------------------------------------------------------

@dataclass
class FineTuneConfig:
    epochs: int = 5
    learning_rate: float = 1e-3
    batch_size: int = 32
    rng_seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or not self.learning_rate > 0:
            raise InputError("epochs >= 0, batch_size >= 1 and learning_rate > 0 required")

    def to_dict(self):
        return asdict(self)


def _params(network):
    return [(np.array(l.weights), np.array(l.bias)) for l in network.layers]


def _rebuild(network, params):
    layers = tuple(DenseLayer(W, b, l.activation) for (W, b), l in zip(params, network.layers))
    return replace(network, layers=layers, input_width=None)


def loss_and_gradients(network, X, y, params=None):
    """Mean training loss and its gradient for every (weights, bias) pair.

    One output uses the logistic loss on the logit, two outputs use softmax
    cross-entropy; ``y`` holds class indices.
    """
    params = _params(network) if params is None else params
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=int).reshape(-1)
    n = X.shape[0]
    acts, pres = [X], []
    h = X
    for (W, b), layer in zip(params, network.layers):
        z = h @ W.T + b
        pres.append(z)
        h = z if layer.activation == IDENTITY else np.maximum(z, 0.0)
        acts.append(h)
    logits = acts[-1]
    if logits.shape[1] == 1:
        t = logits[:, 0]
        # log(1 + exp(-|t|)) + max(t, 0) - y t, stable for large |t|
        loss = np.mean(np.logaddexp(0.0, t) - y * t)
        p = 1.0 / (1.0 + np.exp(-np.clip(t, -500, 500)))
        delta = ((p - y) / n)[:, None]
    else:
        shifted = logits - logits.max(axis=1, keepdims=True)
        logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        loss = -np.mean(logp[np.arange(n), y])
        delta = np.exp(logp)
        delta[np.arange(n), y] -= 1.0
        delta /= n
    grads = [None] * len(params)
    for i in range(len(params) - 1, -1, -1):
        W, _ = params[i]
        grads[i] = (delta.T @ acts[i], delta.sum(axis=0))
        if i:
            delta = (delta @ W) * (pres[i - 1] > 0)
    return float(loss), grads


def fine_tune_history(network, dataset, config=None):
    """(tuned network, full-data loss after each epoch) by minibatch gradient descent."""
    cfg = config or FineTuneConfig()
    if not dataset.has_labels:
        raise InputError("fine-tuning needs labels")
    n_classes = 2
    dataset.check_labels(n_classes)
    X, y = dataset.X, dataset.labels
    params = _params(network)
    rng = make_rng(cfg.rng_seed, "fine_tune")
    history = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(y))
        for start in range(0, len(y), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grads = loss_and_gradients(network, X[idx], y[idx], params)
            if not np.isfinite(loss):
                raise DivergenceError(f"training loss diverged in epoch {epoch}")
            for (W, b), (gW, gb) in zip(params, grads):
                W -= cfg.learning_rate * gW
                b -= cfg.learning_rate * gb
        loss, _ = loss_and_gradients(network, X, y, params)
        if not np.isfinite(loss) or not all(np.all(np.isfinite(W)) for W, _ in params):
            raise DivergenceError(f"training loss diverged in epoch {epoch}")
        history.append(loss)
        log.debug("epoch %d loss %.6f", epoch, loss)
    return _rebuild(network, params), history


def fine_tune(network, dataset, config=None):
    """New network trained on ``dataset``; the input network is left untouched."""
    return fine_tune_history(network, dataset, config)[0]


# -- evaluation --------------------------------------------------------------------------

def accuracy(model, dataset):
    """(accuracy percent on answered rows, abstention rate percent)."""
    if not dataset.has_labels or len(dataset) == 0:
        raise InputError("accuracy needs a non-empty labelled dataset")
    if isinstance(model, GuardedModel):
        lab = model.predict_batch(dataset.X)
    else:
        lab = np.atleast_1d(predict_label(model, dataset.X))
    answered = lab >= 0
    if not answered.any():
        return math.nan, 100.0
    acc = 100.0 * float(np.mean(lab[answered] == dataset.labels[answered]))
    return acc, 100.0 * float(np.mean(~answered))


@dataclass
class VariantResult:
    variant: str
    accuracy: float
    abstain_rate: float
    search: object

    def to_dict(self, timing=True):
        return {"variant": self.variant, "accuracy": self.accuracy,
                "abstain_rate": self.abstain_rate,
                "search": self.search.to_dict(timing=timing, include_ids=False)}


@dataclass
class MitigationReport:
    variants: list
    search_config: dict = field(default_factory=dict)

    def row(self, name):
        for v in self.variants:
            if v.variant == name:
                return v
        raise KeyError(name)

    @property
    def accuracy_delta(self):
        """Debiased minus Original accuracy in points, or None without retraining."""
        names = {v.variant for v in self.variants}
        if DEBIASED not in names:
            return None
        return self.row(DEBIASED).accuracy - self.row(ORIGINAL).accuracy

    def to_dict(self, timing=True):
        return {"variants": [v.to_dict(timing) for v in self.variants],
                "accuracy_delta": self.accuracy_delta,
                "search_config": self.search_config}


def evaluate_mitigation(original, debiased, guards, schema, held_out, search_data,
                        search_config=None, policy=ABSTAIN):
    """Accuracy and an identically seeded search for each model variant.

    ``debiased`` may be None, in which case only the Original rows appear.
    """
    cfg = search_config or SearchConfig()
    variants = [(ORIGINAL, original, None), (ORIGINAL_DT, original, guards)]
    if debiased is not None:
        variants += [(DEBIASED, debiased, None), (DEBIASED_DT, debiased, guards)]
    rows = []
    for name, net, g in variants:
        model = net if g is None else GuardedModel(net, schema, g, policy)
        acc, abst = accuracy(model, held_out)
        rep = run_search(net, schema, search_data, replace(cfg),
                         scorer=None if g is None else model)
        log.info("%s: accuracy %.2f, Succ.rate %.1f", name, acc, rep.success_rate)
        rows.append(VariantResult(name, acc, abst, rep))
    return MitigationReport(rows, cfg.to_dict())
