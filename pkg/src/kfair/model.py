"""Feed-forward ReLU networks: evaluation, scoring and the JSON file format.

A network is a list of dense layers.  Hidden layers use ReLU, the last
layer is an identity map producing raw logits.  The decision score used by
every fairness check is the probability of the favorable class: a logistic
of the single logit, or the softmax entry of the favorable logit when there
are several outputs.

JSON layout::

    {"input_width": 6, "output_width": 1, "favorable_output_index": 0,
     "layers": [{"weights": [[...], ...], "bias": [...], "activation": "relu"},
                ...,
                {"weights": [[...]], "bias": [...], "activation": "identity"}]}

Weights are row-major with one row per output neuron.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array

from .exceptions import InputError

RELU = "relu"
IDENTITY = "identity"
ACTIVATIONS = (RELU, IDENTITY)


@dataclass(frozen=True)
class DenseLayer:
    weights: np.ndarray
    bias: np.ndarray
    activation: str = RELU

    def __post_init__(self):
        w = np.array(self.weights, dtype=float, ndmin=2)
        b = np.array(self.bias, dtype=float).reshape(-1)
        if w.ndim != 2:
            raise InputError("weights must be a matrix")
        if b.shape[0] != w.shape[0]:
            raise InputError(
                f"bias length {b.shape[0]} does not match {w.shape[0]} weight rows")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise InputError("layer parameters must be finite")
        if self.activation not in ACTIVATIONS:
            raise InputError(f"unknown activation {self.activation!r}")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def input_width(self):
        return self.weights.shape[1]

    @property
    def output_width(self):
        return self.weights.shape[0]


@dataclass(frozen=True)
class Network:
    """Immutable affine+ReLU stack with a designated favorable output."""

    layers: tuple
    favorable_output_index: int = 0
    input_width: int = field(default=None)

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise InputError("a network needs at least one layer")
        width = self.input_width if self.input_width is not None else layers[0].input_width
        for i, layer in enumerate(layers):
            if layer.input_width != width:
                raise InputError(
                    f"layer {i}: expects input width {layer.input_width}, got {width}")
            last = i == len(layers) - 1
            if last and layer.activation != IDENTITY:
                raise InputError(f"layer {i}: output layer must be identity")
            if not last and layer.activation != RELU:
                raise InputError(f"layer {i}: hidden layers must be relu")
            width = layer.output_width
        if not 0 <= self.favorable_output_index < width:
            raise InputError(
                f"favorable_output_index {self.favorable_output_index} out of range "
                f"for {width} outputs")
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "input_width", layers[0].input_width)

    @property
    def output_width(self):
        return self.layers[-1].output_width

    @property
    def hidden_layers(self):
        return self.layers[:-1]

    def forward(self, x):
        return forward(self, x)

    def score(self, x):
        return score(self, x)

    def predict_label(self, x):
        return predict_label(self, x)

    # -- serialization -------------------------------------------------
    def to_dict(self):
        return {
            "input_width": self.input_width,
            "output_width": self.output_width,
            "favorable_output_index": self.favorable_output_index,
            "layers": [
                {"weights": layer.weights.tolist(), "bias": layer.bias.tolist(),
                 "activation": layer.activation}
                for layer in self.layers
            ],
        }

    @classmethod
    def from_dict(cls, doc):
        try:
            raw_layers = doc["layers"]
        except (KeyError, TypeError):
            raise InputError("network document needs a 'layers' list") from None
        layers = []
        for i, raw in enumerate(raw_layers):
            try:
                layers.append(DenseLayer(
                    np.asarray(raw["weights"], dtype=float),
                    np.asarray(raw["bias"], dtype=float),
                    str(raw.get("activation", RELU)).lower(),
                ))
            except KeyError as exc:
                raise InputError(f"layer {i}: missing field {exc.args[0]!r}") from None
            except (InputError, ValueError) as exc:
                raise InputError(f"layer {i}: {exc}") from None
        net = cls(tuple(layers), int(doc.get("favorable_output_index", 0)),
                  doc.get("input_width"))
        if "output_width" in doc and int(doc["output_width"]) != net.output_width:
            raise InputError(
                f"layer {len(layers) - 1}: output width {net.output_width} "
                f"does not match declared {doc['output_width']}")
        return net


def load_network(path):
    """Read and validate a network JSON file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InputError(f"model file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
    return Network.from_dict(doc)


def save_network(network, path):
    Path(path).write_text(json.dumps(network.to_dict(), indent=1), encoding="utf-8")


def _as_inputs(network, x):
    arr = np.asarray(x, dtype=float)
    if arr.ndim not in (1, 2) or arr.shape[-1] != network.input_width:
        raise InputError(
            f"expected input of width {network.input_width}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError("inputs must be finite")
    return arr


def forward_all(network, x):
    """Pre-activations of every layer for a batch ``x`` (rows are inputs)."""
    h = _as_inputs(network, x)
    pre = []
    for layer in network.layers:
        z = h @ layer.weights.T + layer.bias
        pre.append(z)
        h = np.maximum(z, 0.0) if layer.activation == RELU else z
    return pre


def forward(network, x):
    """Logits for a single input vector or a batch of row vectors."""
    h = _as_inputs(network, x)
    for layer in network.layers:
        h = h @ layer.weights.T + layer.bias
        if layer.activation == RELU:
            h = np.maximum(h, 0.0)
    return h


def favorable_margin(network, logits):
    """Linear surrogate of the score: the logit itself, or favorable minus other.

    For two outputs, softmax of the favorable entry equals the logistic of
    this margin, so ``score == sigmoid(margin)`` in both supported cases.
    """
    logits = np.asarray(logits, dtype=float)
    if network.output_width == 1:
        return logits[..., 0]
    if network.output_width == 2:
        fav = network.favorable_output_index
        return logits[..., fav] - logits[..., 1 - fav]
    raise InputError("favorable margin is defined for one or two outputs only")


def sigmoid(t):
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out if out.ndim else float(out)


def scores_from_logits(network, logits):
    logits = np.asarray(logits, dtype=float)
    if network.output_width == 1:
        return sigmoid(logits[..., 0])
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=-1, keepdims=True)
    return p[..., network.favorable_output_index]


def score(network, x):
    """Probability of the favorable outcome, in [0, 1]."""
    s = scores_from_logits(network, forward(network, x))
    return float(s) if np.ndim(s) == 0 else s


def predict_label(network, x):
    """Class index; argmax of logits with ties going to the lowest index.

    With a single output the label is 1 iff the score exceeds 0.5.
    """
    logits = forward(network, x)
    if network.output_width == 1:
        lab = (logits[..., 0] > 0.0).astype(int)
    else:
        lab = np.argmax(logits, axis=-1)  # argmax returns the first maximum
    return int(lab) if np.ndim(lab) == 0 else lab


class NetworkClassifier(ClassifierMixin, BaseEstimator):
    """scikit-learn view of a fixed :class:`Network` over encoded inputs.

    ``fit`` only records the class labels, the weights are not touched.
    """

    def __init__(self, network=None):
        self.network = network

    def fit(self, X, y=None):
        X = check_array(X)
        n_classes = max(2, self.network.output_width)
        self.classes_ = np.arange(n_classes)
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X):
        X = check_array(X)
        logits = forward(self.network, X)
        if self.network.output_width == 1:
            p1 = sigmoid(logits[:, 0])
            return np.column_stack([1.0 - p1, p1])
        shifted = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, X):
        return predict_label(self.network, check_array(X))
