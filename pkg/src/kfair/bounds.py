"""Interval bound propagation through affine + ReLU layers.

The MILP encoding needs finite big-M constants for every neuron; plain
interval arithmetic supplies them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InputError
from .model import RELU

BIG_M_SLACK = 1e-6


@dataclass(frozen=True)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(-1)
        hi = np.asarray(self.upper, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise InputError("box bounds must have equal length")
        if np.any(lo > hi):
            raise InputError("box lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def __len__(self):
        return self.lower.shape[0]

    @classmethod
    def unit(cls, n):
        return cls(np.zeros(n), np.ones(n))

    def contains(self, x, tol=0.0):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def inflate(self, slack=BIG_M_SLACK):
        return Box(self.lower - slack, self.upper + slack)


@dataclass(frozen=True)
class LayerBounds:
    """Pre- and post-activation boxes, one pair per layer (output layer included)."""

    pre: tuple
    post: tuple

    def stable_active(self, layer):
        return self.pre[layer].lower >= 0.0

    def stable_inactive(self, layer):
        return self.pre[layer].upper <= 0.0

    def unstable(self, layer):
        b = self.pre[layer]
        return (b.lower < 0.0) & (b.upper > 0.0)


def affine_bounds(weights, bias, lower, upper):
    w_pos = np.maximum(weights, 0.0)
    w_neg = np.minimum(weights, 0.0)
    lo = w_pos @ lower + w_neg @ upper + bias
    hi = w_pos @ upper + w_neg @ lower + bias
    return lo, hi


def propagate(network, input_box):
    """Sound per-neuron bounds for every input in ``input_box``."""
    if len(input_box) != network.input_width:
        raise InputError(
            f"input box has {len(input_box)} coordinates, network expects {network.input_width}")
    lo, hi = input_box.lower, input_box.upper
    pre, post = [], []
    for layer in network.layers:
        plo, phi = affine_bounds(layer.weights, layer.bias, lo, hi)
        pre.append(Box(plo, np.maximum(phi, plo)))
        if layer.activation == RELU:
            lo, hi = np.maximum(plo, 0.0), np.maximum(phi, 0.0)
        else:
            lo, hi = plo, phi
        post.append(Box(lo, hi))
    return LayerBounds(tuple(pre), tuple(post))
