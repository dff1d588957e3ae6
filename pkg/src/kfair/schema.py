"""Tabular feature schemas and the counterfactual space of protected values.

Instances are plain ``dict`` objects mapping feature name to a raw value
(a number for numeric features, a label string for categorical ones).

Encoding into network inputs follows the declared feature order:

* numeric features take one coordinate, min-max scaled to [0, 1]
  (integral features are rounded first);
* categorical features take one coordinate per label (one-hot).

Networks loaded with a schema must use exactly this layout.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._rng import as_rng
from .exceptions import SchemaError

NUMERIC = "numeric"
CATEGORICAL = "categorical"
MAX_PROTECTED_LEVELS = 64
MAX_REJECTIONS = 10_000
_TOL = 1e-9


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str
    lower: float = 0.0
    upper: float = 1.0
    integral: bool = False
    values: tuple = ()
    protected: bool = False

    def __post_init__(self):
        if self.kind == NUMERIC:
            if not (np.isfinite(self.lower) and np.isfinite(self.upper)):
                raise SchemaError(f"{self.name}: bounds must be finite")
            if not self.lower < self.upper:
                raise SchemaError(f"{self.name}: lower must be below upper")
            if self.integral and (self.lower != int(self.lower) or self.upper != int(self.upper)):
                raise SchemaError(f"{self.name}: integral bounds must be whole numbers")
            if self.protected:
                if not self.integral:
                    raise SchemaError(
                        f"{self.name}: protected numeric features must be integral")
                if self.upper - self.lower + 1 > MAX_PROTECTED_LEVELS:
                    raise SchemaError(f"{self.name}: protected domain too large")
        elif self.kind == CATEGORICAL:
            vals = tuple(str(v) for v in self.values)
            if len(set(vals)) < 2 or len(set(vals)) != len(vals):
                raise SchemaError(f"{self.name}: needs at least 2 distinct labels")
            object.__setattr__(self, "values", vals)
        else:
            raise SchemaError(f"{self.name}: unknown kind {self.kind!r}")

    @property
    def width(self):
        return len(self.values) if self.kind == CATEGORICAL else 1

    @property
    def is_categorical(self):
        return self.kind == CATEGORICAL

    @property
    def span(self):
        return self.upper - self.lower

    def domain(self):
        """Finite value list (categorical or integral features only)."""
        if self.is_categorical:
            return list(self.values)
        if self.integral:
            return list(range(int(self.lower), int(self.upper) + 1))
        raise SchemaError(f"{self.name}: continuous feature has no finite domain")

    def check(self, value):
        if self.is_categorical:
            if str(value) not in self.values:
                raise SchemaError(f"{self.name}: unknown label {value!r}")
            return str(value)
        try:
            v = float(value)
        except (TypeError, ValueError):
            raise SchemaError(f"{self.name}: not a number: {value!r}") from None
        if not np.isfinite(v) or v < self.lower - _TOL or v > self.upper + _TOL:
            raise SchemaError(
                f"{self.name}: value {value!r} outside [{self.lower}, {self.upper}]")
        v = min(max(v, self.lower), self.upper)
        return int(round(v)) if self.integral else v

    def to_dict(self):
        d = {"name": self.name, "kind": self.kind, "protected": self.protected}
        if self.is_categorical:
            d["values"] = list(self.values)
        else:
            d.update(lower=self.lower, upper=self.upper, integral=self.integral)
        return d


@dataclass(frozen=True)
class ConsistencyRule:
    """A forbidden conjunction of ``feature == value`` atoms."""

    atoms: tuple

    def matches(self, instance):
        return all(_same(instance[f], v) for f, v in self.atoms)

    def to_list(self):
        return [{"feature": f, "value": v} for f, v in self.atoms]


def _same(a, b):
    if isinstance(a, str) or isinstance(b, str):
        return str(a) == str(b)
    return abs(float(a) - float(b)) < _TOL


class FeatureSchema:
    """Ordered features, encoding layout and the protected combination space."""

    def __init__(self, features, consistency_rules=()):
        self.features = tuple(features)
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise SchemaError("feature names must be unique")
        self._by_name = {f.name: f for f in self.features}
        self.layout = {}
        start = 0
        for f in self.features:
            self.layout[f.name] = slice(start, start + f.width)
            start += f.width
        self.input_width = start

        rules = []
        for rule in consistency_rules:
            if not isinstance(rule, ConsistencyRule):
                rule = ConsistencyRule(tuple(rule))
            atoms = []
            for fname, value in rule.atoms:
                if fname not in self._by_name:
                    raise SchemaError(f"rule references unknown feature {fname!r}")
                spec = self._by_name[fname]
                if not spec.is_categorical and not spec.integral:
                    raise SchemaError(f"rule atom on continuous feature {fname!r}")
                atoms.append((fname, spec.check(value)))
            rules.append(ConsistencyRule(tuple(atoms)))
        self.consistency_rules = tuple(rules)

        self.protected = tuple(f for f in self.features if f.protected)
        self.nonprotected = tuple(f for f in self.features if not f.protected)
        if not self.protected:
            raise SchemaError("schema declares no protected feature")
        self._build_combinations()

    # -- protected combinations ---------------------------------------
    def _build_combinations(self):
        domains = [f.domain() for f in self.protected]
        combos = []
        for values in itertools.product(*domains):
            combo = dict(zip((f.name for f in self.protected), values))
            if any(self._rule_forbids_protected(r, combo) for r in self._pure_rules()):
                continue
            combos.append(combo)
        if len(combos) < 2:
            raise SchemaError(
                f"only {len(combos)} protected combination(s) remain after filtering")
        self.combinations = tuple(combos)
        self.protected_coords = np.concatenate(
            [np.arange(self.layout[f.name].start, self.layout[f.name].stop)
             for f in self.protected])
        block = np.zeros((len(combos), len(self.protected_coords)))
        for i, combo in enumerate(combos):
            vec = np.zeros(self.input_width)
            for f in self.protected:
                self._encode_into(vec, f, combo[f.name])
            block[i] = vec[self.protected_coords]
        self.protected_block = block

        # rules that also mention non-protected features are checked per instance
        self._mixed = []
        for rule in self.consistency_rules:
            prot_atoms = [(f, v) for f, v in rule.atoms if self._by_name[f].protected]
            np_atoms = [(f, v) for f, v in rule.atoms if not self._by_name[f].protected]
            if not np_atoms:
                continue
            hit = np.array([all(_same(c[f], v) for f, v in prot_atoms) for c in combos])
            coord_tests = []
            for f, v in np_atoms:
                spec = self._by_name[f]
                sl = self.layout[f]
                if spec.is_categorical:
                    coord_tests.append((sl.start + spec.values.index(v), 1.0))
                else:
                    coord_tests.append((sl.start, (v - spec.lower) / spec.span))
            self._mixed.append((rule, hit, coord_tests))

    def _pure_rules(self):
        return [r for r in self.consistency_rules
                if all(self._by_name[f].protected for f, _ in r.atoms)]

    @staticmethod
    def _rule_forbids_protected(rule, combo):
        return all(_same(combo[f], v) for f, v in rule.atoms)

    @property
    def K(self):
        return len(self.combinations)

    @property
    def has_mixed_rules(self):
        return bool(self._mixed)

    @property
    def mixed_rules(self):
        """(rule, combination mask, [(coordinate, encoded value)]) triples."""
        return tuple(self._mixed)

    def combination_mask(self, vec):
        """Boolean mask of protected combinations allowed for encoded ``vec``."""
        mask = np.ones(self.K, dtype=bool)
        for _, hit, tests in self._mixed:
            if all(abs(vec[c] - v) < 1e-6 for c, v in tests):
                mask &= ~hit
        return mask

    def __getitem__(self, name):
        return self._by_name[name]

    def __contains__(self, name):
        return name in self._by_name

    @property
    def names(self):
        return [f.name for f in self.features]

    @property
    def nonprotected_coords(self):
        mask = np.ones(self.input_width, dtype=bool)
        mask[self.protected_coords] = False
        return np.flatnonzero(mask)

    # -- validation / encoding ----------------------------------------
    def validate(self, instance):
        """Return a normalized copy of ``instance`` or raise SchemaError."""
        unknown = set(instance) - set(self._by_name)
        if unknown:
            raise SchemaError(f"unknown feature(s): {sorted(unknown)}")
        out = {}
        for f in self.features:
            if f.name not in instance:
                raise SchemaError(f"feature {f.name!r} is not assigned")
            out[f.name] = f.check(instance[f.name])
        return out

    def violates_rules(self, instance):
        return any(r.matches(instance) for r in self.consistency_rules)

    def _encode_into(self, vec, spec, value):
        sl = self.layout[spec.name]
        if spec.is_categorical:
            vec[sl] = 0.0
            vec[sl.start + spec.values.index(value)] = 1.0
        else:
            vec[sl.start] = (value - spec.lower) / spec.span

    def encode(self, instance):
        inst = self.validate(instance)
        vec = np.zeros(self.input_width)
        for f in self.features:
            self._encode_into(vec, f, inst[f.name])
        return vec

    def encode_many(self, instances):
        return np.array([self.encode(i) for i in instances]).reshape(-1, self.input_width)

    def decode(self, vector):
        vec = np.asarray(vector, dtype=float).reshape(-1)
        if vec.shape[0] != self.input_width:
            raise SchemaError(
                f"vector length {vec.shape[0]} does not match layout width {self.input_width}")
        out = {}
        for f in self.features:
            sl = self.layout[f.name]
            if f.is_categorical:
                out[f.name] = f.values[int(np.argmax(vec[sl]))]
            else:
                v = f.lower + min(max(vec[sl.start], 0.0), 1.0) * f.span
                out[f.name] = int(round(v)) if f.integral else float(v)
        return out

    # -- counterfactuals ----------------------------------------------
    def enumerate_counterfactuals(self, instance):
        """All valid protected variants of ``instance``, in lexicographic order."""
        inst = self.validate(instance)
        out = []
        for combo in self.combinations:
            cf = dict(inst)
            cf.update(combo)
            if self.violates_rules(cf):
                continue
            out.append(cf)
        if not out:
            raise SchemaError("every protected combination is forbidden for this instance")
        return out

    def counterfactual_batch(self, vec):
        """Encoded counterfactual rows for encoded ``vec`` (one per valid combination)."""
        vec = np.asarray(vec, dtype=float)
        X = np.repeat(vec[None, :], self.K, axis=0)
        X[:, self.protected_coords] = self.protected_block
        if self._mixed:
            X = X[self.combination_mask(vec)]
        return X

    def random_instance(self, rng=None):
        rng = as_rng(rng)
        for _ in range(MAX_REJECTIONS):
            inst = {}
            for f in self.features:
                if f.is_categorical:
                    inst[f.name] = f.values[int(rng.integers(len(f.values)))]
                elif f.integral:
                    inst[f.name] = int(rng.integers(int(f.lower), int(f.upper) + 1))
                else:
                    inst[f.name] = float(rng.uniform(f.lower, f.upper))
            if not self.violates_rules(inst):
                return inst
        raise SchemaError(f"no rule-consistent instance after {MAX_REJECTIONS} draws")

    # -- io -------------------------------------------------------------
    def to_dict(self):
        return {
            "features": [f.to_dict() for f in self.features],
            "consistency_rules": [{"forbidden": r.to_list()} for r in self.consistency_rules],
        }

    @classmethod
    def from_dict(cls, doc):
        feats = []
        for i, raw in enumerate(doc.get("features", [])):
            try:
                kind = raw["kind"]
                if kind == CATEGORICAL:
                    feats.append(FeatureSpec(raw["name"], kind, values=tuple(raw["values"]),
                                             protected=bool(raw.get("protected", False))))
                else:
                    feats.append(FeatureSpec(raw["name"], kind, float(raw["lower"]),
                                             float(raw["upper"]),
                                             bool(raw.get("integral", False)),
                                             protected=bool(raw.get("protected", False))))
            except KeyError as exc:
                raise SchemaError(f"feature {i}: missing field {exc.args[0]!r}") from None
        rules = []
        for raw in doc.get("consistency_rules", []):
            atoms = raw["forbidden"] if isinstance(raw, dict) else raw
            rules.append(ConsistencyRule(tuple((a["feature"], a["value"]) for a in atoms)))
        return cls(feats, rules)


def load_schema(path):
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise SchemaError(f"schema file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from None
    return FeatureSchema.from_dict(doc)


def save_schema(schema, path):
    Path(path).write_text(json.dumps(schema.to_dict(), indent=1), encoding="utf-8")


def encode(schema, instance):
    return schema.encode(instance)


def decode(schema, vector):
    return schema.decode(vector)


def enumerate_counterfactuals(schema, instance):
    return schema.enumerate_counterfactuals(instance)


def random_instance(schema, rng=None):
    return schema.random_instance(rng)


class SchemaEncoder(TransformerMixin, BaseEstimator):
    """Transformer from raw instances (dicts) to encoded network inputs."""

    def __init__(self, schema=None):
        self.schema = schema

    def fit(self, X=None, y=None):
        self.n_features_out_ = self.schema.input_width
        return self

    def transform(self, X):
        return self.schema.encode_many(list(X))

    def inverse_transform(self, X):
        return [self.schema.decode(row) for row in np.atleast_2d(X)]
