"""CSV datasets and synthetic planted-structure networks.

A planted network has a known discrimination structure: a stack of nested
hyper-rectangles over non-protected features, each with a table of scores
per protected combination.  Inside the innermost region containing an
input the score is ``base + offset[c]``; outside every region the score is
``base`` whatever the protected values, so ``k = 1`` there.

Construction (all layers ReLU except the output)::

    layer 1  penalties   relu(a - x), relu(x - b) per numeric atom,
                         sum of disallowed one-hot inputs per categorical atom
             combo ind.  relu(sum of the combination's one-hot inputs - (m - 1))
             background  pass-through of numeric inputs (when enabled)
    layer 2  region      h_r = relu(1 - s * sum of region r penalties)
             pass-through of the combination indicators and background
    layer 3  AND         relu(h_r + ind_c - 1), one per (region, combination)
    output   logit(base) + sum_r sum_c w[r, c] * AND[r, c] + background

The background is linear in the scaled numeric inputs and centered at the
domain midpoint, so its sign varies across the input space.

``w`` telescopes from the outermost region inward, so inside region ``r``
the logit is exactly ``logit(base + offset_r[c])``.  For integral features
lattice points outside a region have penalty at least ``1 / span``, so the
steepness ``s = max span`` makes ``h_r`` an exact 0/1 indicator on the
lattice.  Continuous atoms get a ramp of width ``1 / s`` at the boundary.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._rng import make_rng
from .cluster import DEFAULT_EPSILON, count_k, n_buckets
from .exceptions import InputError, SchemaError
from .model import IDENTITY, RELU, DenseLayer, Network, predict_label
from .schema import CATEGORICAL, NUMERIC, FeatureSchema, FeatureSpec

LABEL_COLUMN = "label"
DEFAULT_RAMP = 1000.0


@dataclass
class Dataset:
    """Validated rows of a schema, with optional integer class labels."""

    schema: FeatureSchema
    rows: list
    labels: np.ndarray = None
    _X: np.ndarray = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.rows = [self.schema.validate(r) for r in self.rows]
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (len(self.rows),):
                raise InputError(f"{labels.shape[0]} labels for {len(self.rows)} rows")
            if labels.size and (labels.min() < 0 or not np.all(labels == np.round(labels))):
                raise InputError("labels must be non-negative class indices")
            self.labels = labels.astype(int)

    def __len__(self):
        return len(self.rows)

    @property
    def has_labels(self):
        return self.labels is not None

    @property
    def X(self):
        """Encoded rows, shape ``(n, input_width)``."""
        if self._X is None:
            self._X = self.schema.encode_many(self.rows)
        return self._X

    def subset(self, indices):
        idx = [int(i) for i in indices]
        labels = None if self.labels is None else self.labels[idx]
        return Dataset(self.schema, [self.rows[i] for i in idx], labels)

    def concat(self, other):
        if self.has_labels != other.has_labels:
            raise InputError("cannot concatenate labelled and unlabelled datasets")
        labels = None if self.labels is None else np.concatenate([self.labels, other.labels])
        return Dataset(self.schema, self.rows + other.rows, labels)

    def check_labels(self, n_classes):
        if self.labels is not None and self.labels.size and self.labels.max() >= n_classes:
            raise InputError(f"label {self.labels.max()} outside [0, {n_classes})")


def _parse_cell(spec, raw):
    raw = raw.strip()
    if spec.kind == CATEGORICAL:
        return raw
    return float(raw)


def load_csv(path, schema):
    """Read a headed CSV into a :class:`Dataset`; errors name the file line."""
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except FileNotFoundError:
        raise InputError(f"data file not found: {path}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        missing = [n for n in schema.names if n not in header]
        if missing:
            raise InputError(f"{path}: missing column(s) {missing}")
        unknown = [h for h in header if h not in schema and h != LABEL_COLUMN]
        if unknown:
            raise InputError(f"{path}: unknown column(s) {unknown}")
        has_label = LABEL_COLUMN in header
        rows, labels = [], []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise InputError(
                    f"{path}:{line}: expected {len(header)} fields, found {len(row)}")
            inst = {}
            for name, raw in zip(header, row):
                if name == LABEL_COLUMN:
                    try:
                        labels.append(int(raw.strip()))
                    except ValueError:
                        raise InputError(f"{path}:{line}: bad label {raw!r}") from None
                    continue
                spec = schema[name]
                try:
                    inst[name] = spec.check(_parse_cell(spec, raw))
                except ValueError as exc:
                    if isinstance(exc, SchemaError):
                        raise InputError(f"{path}:{line}: {exc}") from None
                    raise InputError(
                        f"{path}:{line}: {name}: cannot parse {raw!r}") from None
            rows.append(inst)
    return Dataset(schema, rows, np.array(labels, dtype=int) if has_label else None)


def save_csv(dataset, path):
    names = dataset.schema.names
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(names + ([LABEL_COLUMN] if dataset.has_labels else []))
        for i, row in enumerate(dataset.rows):
            cells = [row[n] for n in names]
            if dataset.has_labels:
                cells.append(int(dataset.labels[i]))
            w.writerow(cells)


def train_test_split(dataset, fraction=0.8, rng_seed=0):
    """Shuffle and split; ``fraction`` of the rows go to the first part."""
    if not 0.0 < fraction < 1.0:
        raise InputError("fraction must lie strictly between 0 and 1")
    n = len(dataset)
    n_train = int(round(fraction * n))
    if n_train == 0 or n_train == n:
        raise InputError(f"split of {n} rows at {fraction} leaves an empty part")
    perm = make_rng(rng_seed, "split").permutation(n)
    return dataset.subset(np.sort(perm[:n_train])), dataset.subset(np.sort(perm[n_train:]))


# -- planted networks ---------------------------------------------------------

@dataclass(frozen=True)
class PlantRegion:
    """Hyper-rectangle plus per-combination score offsets.

    ``box`` maps numeric features to inclusive ``(lower, upper)`` raw bounds
    and categorical features to the set of allowed labels.
    """

    box: dict
    offsets: tuple

    def contains(self, instance):
        for name, atom in self.box.items():
            v = instance[name]
            if isinstance(atom, (set, frozenset)):
                if str(v) not in atom:
                    return False
            elif not atom[0] - 1e-9 <= float(v) <= atom[1] + 1e-9:
                return False
        return True

    def to_dict(self):
        box = {k: sorted(v) if isinstance(v, (set, frozenset)) else list(v)
               for k, v in self.box.items()}
        return {"box": box, "offsets": list(self.offsets)}

    @classmethod
    def from_dict(cls, doc, schema):
        box = {}
        for k, v in doc["box"].items():
            box[k] = frozenset(v) if schema[k].is_categorical else (float(v[0]), float(v[1]))
        return cls(box, tuple(float(o) for o in doc["offsets"]))


@dataclass(frozen=True)
class PlantSpec:
    """Nested regions listed outermost first, a base score and extras."""

    regions: tuple
    base_score: float = 0.5
    output_width: int = 1
    background_scale: float = 0.0
    ramp_steepness: float = DEFAULT_RAMP

    def to_dict(self):
        return {"regions": [r.to_dict() for r in self.regions], "base_score": self.base_score,
                "output_width": self.output_width, "background_scale": self.background_scale,
                "ramp_steepness": self.ramp_steepness}

    @classmethod
    def from_dict(cls, doc, schema):
        return cls(tuple(PlantRegion.from_dict(r, schema) for r in doc["regions"]),
                   float(doc.get("base_score", 0.5)), int(doc.get("output_width", 1)),
                   float(doc.get("background_scale", 0.0)),
                   float(doc.get("ramp_steepness", DEFAULT_RAMP)))


def _logit(p):
    return math.log(p / (1.0 - p))


def _check_plant(schema, plant):
    if plant.output_width not in (1, 2):
        raise SchemaError("planted networks have one or two outputs")
    if not 0.0 < plant.base_score < 1.0:
        raise SchemaError("base score must lie in (0, 1)")
    if any(not f.is_categorical for f in schema.protected):
        raise SchemaError("planted networks need categorical protected features")
    if not plant.regions:
        raise SchemaError("plant declares no region")
    for i, reg in enumerate(plant.regions):
        if len(reg.offsets) != schema.K:
            raise SchemaError(f"region {i}: {len(reg.offsets)} offsets for K={schema.K}")
        for c, off in enumerate(reg.offsets):
            if not 0.0 < plant.base_score + off < 1.0:
                raise SchemaError(f"region {i}: score for combination {c} leaves (0, 1)")
        for name, atom in reg.box.items():
            if name not in schema:
                raise SchemaError(f"region {i}: unknown feature {name!r}")
            spec = schema[name]
            if spec.protected:
                raise SchemaError(f"region {i}: {name!r} is protected")
            if spec.is_categorical:
                if not isinstance(atom, (set, frozenset)) or not atom <= set(spec.values):
                    raise SchemaError(f"region {i}: bad label set for {name!r}")
            elif not spec.lower <= atom[0] <= atom[1] <= spec.upper:
                raise SchemaError(f"region {i}: interval for {name!r} leaves its domain")
        if i:
            outer = plant.regions[i - 1].box
            for name, atom in outer.items():
                inner = reg.box.get(name)
                if inner is None:
                    raise SchemaError(f"region {i} is not nested in region {i - 1} ({name})")
                if isinstance(atom, (set, frozenset)):
                    ok = inner <= atom
                else:
                    ok = atom[0] <= inner[0] and inner[1] <= atom[1]
                if not ok:
                    raise SchemaError(f"region {i} is not nested in region {i - 1} ({name})")


def make_planted_network(schema, plant, rng_seed=0):
    """Network whose scores follow ``plant`` exactly (see module docstring)."""
    _check_plant(schema, plant)
    d = schema.input_width
    K = schema.K
    R = len(plant.regions)

    rows1, bias1 = [], []
    region_pen = []
    steep = 1.0
    for reg in plant.regions:
        pens = []
        for name, atom in reg.box.items():
            spec = schema[name]
            sl = schema.layout[name]
            if spec.is_categorical:
                w = np.zeros(d)
                for j, lab in enumerate(spec.values):
                    if lab not in atom:
                        w[sl.start + j] = 1.0
                if not w.any():
                    continue
                pens.append(len(rows1))
                rows1.append(w)
                bias1.append(0.0)
                continue
            a = (atom[0] - spec.lower) / spec.span
            b = (atom[1] - spec.lower) / spec.span
            steep = max(steep, spec.span if spec.integral else plant.ramp_steepness)
            if a > 0.0:
                w = np.zeros(d)
                w[sl.start] = -1.0
                pens.append(len(rows1))
                rows1.append(w)
                bias1.append(a)
            if b < 1.0:
                w = np.zeros(d)
                w[sl.start] = 1.0
                pens.append(len(rows1))
                rows1.append(w)
                bias1.append(-b)
        region_pen.append(pens)

    m = len(schema.protected)
    ind_start = len(rows1)
    for combo in schema.combinations:
        w = np.zeros(d)
        for f in schema.protected:
            w[schema.layout[f.name].start + f.values.index(combo[f.name])] = 1.0
        rows1.append(w)
        bias1.append(-(m - 1.0))

    rng = make_rng(rng_seed, "plant", "background")
    bg_coords = [schema.layout[f.name].start for f in schema.nonprotected if not f.is_categorical]
    bg_w = (rng.normal(scale=plant.background_scale, size=len(bg_coords))
            if plant.background_scale > 0 else np.zeros(0))
    if bg_w.size == 0:
        bg_coords = []
    bg_start = len(rows1)
    for j in bg_coords:
        w = np.zeros(d)
        w[j] = 1.0
        rows1.append(w)
        bias1.append(0.0)
    n1 = len(rows1)
    W1 = np.array(rows1).reshape(n1, d)

    # layer 2: region indicators then pass-throughs
    n_pass = K + len(bg_coords)
    W2 = np.zeros((R + n_pass, n1))
    b2 = np.zeros(R + n_pass)
    for r, pens in enumerate(region_pen):
        W2[r, pens] = -steep
        b2[r] = 1.0
    for i in range(n_pass):
        W2[R + i, ind_start + i] = 1.0

    # layer 3: AND of region and combination
    weights = np.zeros((R, K))
    prev = np.full(K, _logit(plant.base_score))
    for r, reg in enumerate(plant.regions):
        cur = np.array([_logit(plant.base_score + o) for o in reg.offsets])
        weights[r] = cur - prev
        prev = cur
    pairs = [(r, c) for r in range(R) for c in range(K) if weights[r, c] != 0.0]
    n3 = len(pairs) + len(bg_coords)
    W3 = np.zeros((n3, R + n_pass))
    b3 = np.zeros(n3)
    for i, (r, c) in enumerate(pairs):
        W3[i, r] = 1.0
        W3[i, R + c] = 1.0
        b3[i] = -1.0
    for i in range(len(bg_coords)):
        W3[len(pairs) + i, R + K + i] = 1.0

    wo = np.concatenate([[weights[r, c] for r, c in pairs], bg_w])
    bo = _logit(plant.base_score) - 0.5 * float(bg_w.sum())
    if plant.output_width == 1:
        Wo, bout = wo[None, :], np.array([bo])
    else:
        Wo = np.vstack([wo, np.zeros_like(wo)])
        bout = np.array([bo, 0.0])
    if n3 == 0:
        # nothing is planted: a single dead unit keeps the layer chain valid
        W3, b3 = np.zeros((1, R + n_pass)), np.zeros(1)
        Wo = np.zeros((plant.output_width, 1))
    layers = [DenseLayer(W1, np.array(bias1), RELU), DenseLayer(W2, b2, RELU),
              DenseLayer(W3, b3, RELU), DenseLayer(Wo, bout, IDENTITY)]
    return Network(layers, favorable_output_index=0)


# -- planted ground truth -----------------------------------------------------

def innermost_region(plant, instance):
    """Index of the innermost region containing ``instance``, or -1."""
    found = -1
    for i, reg in enumerate(plant.regions):
        if not reg.contains(instance):
            break
        found = i
    return found


def planted_scores(plant, instance):
    """Ground-truth scores of every protected combination at ``instance``."""
    r = innermost_region(plant, instance)
    K = len(plant.regions[0].offsets)
    if r < 0:
        return np.full(K, plant.base_score)
    return plant.base_score + np.asarray(plant.regions[r].offsets)


def planted_k(plant, instance, epsilon=DEFAULT_EPSILON):
    return count_k(planted_scores(plant, instance), epsilon)


def planted_max_k(plant, epsilon=DEFAULT_EPSILON):
    return max(count_k(plant.base_score + np.asarray(r.offsets), epsilon)
               for r in plant.regions)


def region_volume(schema, box):
    """Fraction of the non-protected domain inside ``box``.

    Integral features count lattice points, continuous features measure
    length and categorical features count labels.
    """
    vol = 1.0
    for name, atom in box.items():
        spec = schema[name]
        if spec.is_categorical:
            vol *= len(atom) / len(spec.values)
        elif spec.integral:
            lo, hi = math.ceil(atom[0] - 1e-9), math.floor(atom[1] + 1e-9)
            vol *= max(0, hi - lo + 1) / (spec.span + 1)
        else:
            vol *= (atom[1] - atom[0]) / spec.span
    return vol


def bucket_center_scores(levels, n_levels, epsilon=DEFAULT_EPSILON):
    """Scores at bucket centres for ``levels`` spread evenly over the buckets."""
    nb = n_buckets(epsilon)
    idx = np.round(np.linspace(0, nb - 1, n_levels)).astype(int)
    return np.array([(idx[l] + 0.5) * epsilon for l in levels])


def graded_offsets(K, k, base, epsilon=DEFAULT_EPSILON):
    """Offsets giving exactly ``k`` occupied buckets over ``K`` combinations."""
    if not 1 <= k <= min(K, n_buckets(epsilon)):
        raise SchemaError(f"k={k} not realizable with K={K}")
    if k == 1:
        return tuple(0.0 for _ in range(K))
    scores = bucket_center_scores([c % k for c in range(K)], k, epsilon)
    return tuple(float(s - base) for s in scores)


# -- fixtures -------------------------------------------------------------------

def planted_schema():
    """Census-style schema with K = 20 protected combinations."""
    feats = [
        FeatureSpec("age", NUMERIC, 18, 90, integral=True),
        FeatureSpec("hours_per_week", NUMERIC, 1, 99, integral=True),
        FeatureSpec("education_num", NUMERIC, 1, 16, integral=True),
        FeatureSpec("capital_gain", NUMERIC, 0.0, 10.0),
        FeatureSpec("workclass", CATEGORICAL,
                    values=("Private", "Self-emp-inc", "Federal-gov", "Local-gov")),
        FeatureSpec("sex", CATEGORICAL, values=("Female", "Male"), protected=True),
        FeatureSpec("race", CATEGORICAL,
                    values=("White", "Black", "Asian", "Amer-Indian", "Other",
                            "Pacific", "Mixed", "Arab", "Latino", "Unknown"),
                    protected=True),
    ]
    return FeatureSchema(feats)


PLANTED_BOX = {"age": (30.0, 50.0), "hours_per_week": (40.0, 60.0),
               "workclass": frozenset({"Private", "Self-emp-inc"})}
RING_CENTER = {"age": 63.0, "hours_per_week": 73.0}
MAX_RINGS = 10
# core half-width 3, each further ring 2 units wider
RING_HALF_WIDTHS = tuple(3.0 + 2.0 * i for i in range(MAX_RINGS - 1))


def ring_levels(k):
    """Increasing k values for graded rings, ending at ``k``."""
    return sorted({int(round(x)) for x in np.linspace(2, k, min(MAX_RINGS, k - 1))})


def ring_boxes(schema, n):
    """``n`` nested boxes around :data:`RING_CENTER`, outermost first.

    The outermost box spans the whole age and hours domains; the others
    shrink by :data:`RING_HALF_WIDTHS` toward a small core box.
    """
    boxes = []
    widths = RING_HALF_WIDTHS[:n - 1][::-1]
    full = {f: (schema[f].lower, schema[f].upper) for f in RING_CENTER}
    boxes.append(dict(full))
    for hw in widths:
        box = {}
        for f, c in RING_CENTER.items():
            box[f] = (max(schema[f].lower, c - hw), min(schema[f].upper, c + hw))
        boxes.append(box)
    boxes[-1]["workclass"] = frozenset({"Private", "Self-emp-inc"})
    return boxes


def planted_fixture(k, graded=False, base_score=0.5, epsilon=DEFAULT_EPSILON,
                    output_width=1):
    """(schema, plant) with ground-truth max k = ``k``.

    Without ``graded`` the scores spread over ``k`` buckets inside
    :data:`PLANTED_BOX` and k = 1 elsewhere.  With ``graded`` nested rings
    around a small core box raise k step by step (see :func:`ring_levels`),
    so a search seeded in an outer ring has to climb to reach max k.
    """
    schema = planted_schema()
    if not graded:
        regions = (PlantRegion(PLANTED_BOX, graded_offsets(schema.K, k, base_score, epsilon)),)
    else:
        levels = ring_levels(k)
        boxes = ring_boxes(schema, len(levels))
        regions = tuple(PlantRegion(box, graded_offsets(schema.K, lv, base_score, epsilon))
                        for box, lv in zip(boxes, levels))
    return schema, PlantSpec(regions, base_score, output_width)


def sample_dataset(schema, n, rng_seed=0, network=None):
    """``n`` uniform rows, labelled by ``network`` when given."""
    rng = make_rng(rng_seed, "dataset")
    rows = [schema.random_instance(rng) for _ in range(n)]
    labels = None
    if network is not None:
        labels = np.atleast_1d(predict_label(network, schema.encode_many(rows)))
    return Dataset(schema, rows, labels)
