"""Uniform outcome buckets and the k-discrimination measure."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import InputError
from .model import scores_from_logits, forward

DEFAULT_EPSILON = 0.05
ABSTAIN_BUCKET = -1


def n_buckets(epsilon):
    return math.ceil(round(1.0 / epsilon, 9))


def _check_eps(epsilon):
    if not 0.0 < epsilon <= 1.0:
        raise InputError(f"epsilon must lie in (0, 1], got {epsilon}")


def bucketize(score, epsilon=DEFAULT_EPSILON):
    """Index of the uniform bucket holding ``score``; 1.0 lands in the top bucket.

    Works on scalars and arrays.  NaN marks an abstained outcome and maps to
    ``ABSTAIN_BUCKET``.
    """
    _check_eps(epsilon)
    s = np.asarray(score, dtype=float)
    abstain = np.isnan(s)
    if np.any((s[~abstain] < 0.0) | (s[~abstain] > 1.0)):
        raise InputError("scores must lie in [0, 1]")
    # round before flooring so 0.15/0.05 does not land at 2.9999999
    idx = np.floor(np.round(np.where(abstain, 0.0, s) / epsilon, 9)).astype(int)
    idx = np.minimum(idx, n_buckets(epsilon) - 1)
    idx = np.where(abstain, ABSTAIN_BUCKET, idx)
    return int(idx) if idx.ndim == 0 else idx


def count_k(scores, epsilon=DEFAULT_EPSILON):
    """Number of distinct buckets occupied by ``scores``."""
    return int(np.unique(bucketize(np.asarray(scores, dtype=float), epsilon)).size)


def is_2_discriminant(score_a, score_b, epsilon=DEFAULT_EPSILON):
    return abs(float(score_a) - float(score_b)) > epsilon


@dataclass
class DiscriminationRecord:
    instance: dict
    counterfactual_scores: list
    bucket_indices: list
    k_value: int

    @property
    def is_id(self):
        return self.k_value >= 2

    def to_dict(self):
        return {
            "instance": self.instance,
            "counterfactual_scores": [None if math.isnan(s) else s
                                      for s in self.counterfactual_scores],
            "bucket_indices": list(self.bucket_indices),
            "k_value": self.k_value,
            "is_id": self.is_id,
        }

    @classmethod
    def from_dict(cls, doc):
        scores = [float("nan") if s is None else float(s) for s in doc["counterfactual_scores"]]
        return cls(dict(doc["instance"]), scores, list(doc["bucket_indices"]),
                   int(doc["k_value"]))


def counterfactual_scores(scorer, schema, vec):
    """Scores of every valid counterfactual of encoded ``vec``.

    ``scorer`` is a Network or any object with a ``score_batch`` method
    (guarded models return NaN for abstained rows).
    """
    X = schema.counterfactual_batch(vec)
    if hasattr(scorer, "score_batch"):
        return np.asarray(scorer.score_batch(X), dtype=float)
    return scores_from_logits(scorer, forward(scorer, X))


def k_of_vector(scorer, schema, vec, epsilon=DEFAULT_EPSILON):
    return count_k(counterfactual_scores(scorer, schema, vec), epsilon)


def k_discrimination(network, schema, instance, epsilon=DEFAULT_EPSILON):
    """Evaluate all counterfactuals of ``instance`` and count occupied buckets."""
    inst = schema.validate(instance)
    scores = counterfactual_scores(network, schema, schema.encode(inst))
    buckets = bucketize(scores, epsilon)
    return DiscriminationRecord(inst, [float(s) for s in scores],
                                [int(b) for b in buckets], int(np.unique(buckets).size))
