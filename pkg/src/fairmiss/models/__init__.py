"""Classifiers: constant baselines, surrogate-split trees, logistic
regression, naive Bayes and bagged forests.

Use :func:`fit` with a :class:`ModelSpec` and :func:`predict` on any
dataset carrying the training columns. Only the tree tolerates masked
cells; the other learners raise :class:`MissingValuesUnsupported`.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..dataset import Dataset
from ..errors import (EmptyTrainingSet, FairMissError, MissingValuesUnsupported, NotATree,
                      SingleClassTraining)
from ..metrics import Predictions
from . import cart as _cart
from .cart import CartParams, Node, TreeBuilder
from .encoding import FeatureSchema, label_codes
from .linear import OneHotScaler, gradient_descent, softmax

MAJORITY, PERFECT, CART, LOGISTIC, NAIVE_BAYES, FOREST = (
    "majority", "perfect", "cart", "logistic", "naive_bayes", "forest")
KINDS = (MAJORITY, PERFECT, CART, LOGISTIC, NAIVE_BAYES, FOREST)
DISPLAY = {MAJORITY: "Majority", PERFECT: "Perfect", CART: "CART", LOGISTIC: "Logistic",
           NAIVE_BAYES: "NaiveBayes", FOREST: "Forest"}
FOREST_DEFAULTS = {"n_trees": 30, "max_features": "sqrt", "bootstrap": True,
                   "max_depth": 10, "min_split": 20, "complexity": 0.0}


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    params: dict = field(default_factory=dict)
    name: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise FairMissError(f"unknown model kind {self.kind!r}; choose from {KINDS}")

    @property
    def label(self):
        return self.name or DISPLAY[self.kind]

    def to_dict(self):
        out = {"kind": self.kind, "params": dict(sorted(self.params.items()))}
        if self.name:
            out["name"] = self.name
        return out

    @classmethod
    def parse(cls, obj):
        """Accept a kind string, a display name, or a ``{"kind", "params", "name"}`` mapping."""
        if isinstance(obj, ModelSpec):
            return obj
        if isinstance(obj, str):
            lookup = {k: k for k in KINDS} | {v.lower(): k for k, v in DISPLAY.items()}
            if obj.lower() not in lookup:
                raise FairMissError(f"unknown model {obj!r}")
            return cls(lookup[obj.lower()])
        return cls(obj["kind"], dict(obj.get("params", {})), obj.get("name"))


class Model:
    """Base class; subclasses fill :meth:`predict_proba` and serialization."""

    kind = None
    tolerates_missing = False

    def __init__(self, classes, schema: FeatureSchema | None):
        self.classes = tuple(classes)
        self.schema = schema

    def _matrix(self, rows: Dataset):
        if not self.tolerates_missing and rows.n_missing_cells:
            raise MissingValuesUnsupported(
                f"{DISPLAY[self.kind]} cannot score rows with masked cells")
        return self.schema.transform(rows)

    def predict_proba(self, rows: Dataset, **kw) -> np.ndarray:
        raise NotImplementedError

    def predict(self, rows: Dataset, **kw) -> Predictions:
        scores = self.predict_proba(rows, **kw)
        labels = np.asarray(self.classes, dtype=object)[np.argmax(scores, axis=1)]
        return Predictions(labels, scores, self.classes)

    def to_dict(self):
        out = {"kind": self.kind, "classes": list(self.classes)}
        if self.schema is not None:
            out["schema"] = self.schema.to_dict()
        out.update(self._state())
        return out

    def _state(self):
        return {}


class MajorityModel(Model):
    kind = MAJORITY
    tolerates_missing = True

    def __init__(self, classes, schema, winner):
        super().__init__(classes, schema)
        self.winner = winner

    @classmethod
    def fit(cls, train, y, schema, params, seed):
        counts = np.bincount(y, minlength=len(train.classes))
        return cls(train.classes, schema, train.classes[int(np.argmax(counts))])

    def predict_proba(self, rows, **kw):
        out = np.zeros((rows.n_rows, len(self.classes)))
        out[:, self.classes.index(self.winner)] = 1.0
        return out

    def _state(self):
        return {"winner": self.winner}

    @classmethod
    def from_state(cls, obj, classes, schema):
        return cls(classes, schema, obj["winner"])


class PerfectModel(Model):
    """Returns the evaluation rows' own labels; only meaningful on labelled data."""

    kind = PERFECT
    tolerates_missing = True

    @classmethod
    def fit(cls, train, y, schema, params, seed):
        return cls(train.classes, schema)

    def predict(self, rows, **kw):
        if rows.label is None:
            raise FairMissError("the perfect oracle needs rows with true labels")
        labels = rows.labels
        classes = tuple(dict.fromkeys(self.classes + tuple(rows.classes)))
        scores = (labels[:, None] == np.asarray(classes, dtype=object)[None, :]).astype(float)
        return Predictions(labels, scores, classes)

    def predict_proba(self, rows, **kw):
        return self.predict(rows).scores

    @classmethod
    def from_state(cls, obj, classes, schema):
        return cls(classes, schema)


class CartModel(Model):
    kind = CART
    tolerates_missing = True

    def __init__(self, classes, schema, root: Node, params: CartParams):
        super().__init__(classes, schema)
        self.root = root
        self.params = params

    @classmethod
    def fit(cls, train, y, schema, params, seed):
        p = CartParams(**params)
        x = schema.transform(train)
        cat = [schema.is_categorical(j) for j in range(len(schema.names))]
        ncat = [len(c) for c in schema.categories]
        root = TreeBuilder(x, y, len(train.classes), cat, ncat, p).build()
        return cls(train.classes, schema, root, p)

    def predict_proba(self, rows, policy=_cart.SURROGATE, seed=0, **kw):
        return _cart.predict_proba(self.root, self._matrix(rows), policy, seed)

    def importance_totals(self):
        return _cart.importance_totals(self.root, len(self.schema.names))

    def referenced_columns(self):
        return {self.schema.names[j] for j in _cart.referenced_features(self.root)}

    def _state(self):
        return {"params": self.params.to_dict(), "root": self.root.to_dict(self.schema, self.classes)}

    @classmethod
    def from_state(cls, obj, classes, schema):
        return cls(classes, schema, Node.from_dict(obj["root"], schema, classes),
                   CartParams(**obj["params"]))


class LogisticModel(Model):
    kind = LOGISTIC

    def __init__(self, classes, schema, encoder, weights, bias, iterations, converged):
        super().__init__(classes, schema)
        self.encoder = encoder
        self.weights = np.asarray(weights, float)
        self.bias = np.asarray(bias, float)
        self.iterations = iterations
        self.converged = converged

    @classmethod
    def fit(cls, train, y, schema, params, seed):
        x = schema.transform(train)
        enc = OneHotScaler.fit(schema, x)
        onehot = np.eye(len(train.classes))[y]
        w, b, it, ok = gradient_descent(enc.transform(x), onehot,
                                        l2=params.get("l2", 1e-4), tol=params.get("tol", 1e-4),
                                        max_iter=params.get("max_iter", 3000))
        if not ok:
            warnings.warn(f"logistic regression stopped after {it} iterations without "
                          "reaching the gradient tolerance", stacklevel=3)
        return cls(train.classes, schema, enc, w, b, it, ok)

    def predict_proba(self, rows, **kw):
        return softmax(self.encoder.transform(self._matrix(rows)) @ self.weights + self.bias)

    def _state(self):
        return {"encoding": {"columns": self.encoder.column_names(),
                             "mean": self.encoder.mean.tolist(),
                             "scale": self.encoder.scale.tolist()},
                "weights": self.weights.tolist(), "bias": self.bias.tolist(),
                "iterations": self.iterations, "converged": self.converged}

    @classmethod
    def from_state(cls, obj, classes, schema):
        enc = OneHotScaler(schema, obj["encoding"]["mean"], obj["encoding"]["scale"])
        return cls(classes, schema, enc, obj["weights"], obj["bias"],
                   obj["iterations"], obj["converged"])


class NaiveBayesModel(Model):
    """Gaussian class conditionals for numeric columns, Laplace-smoothed tables otherwise."""

    kind = NAIVE_BAYES

    def __init__(self, classes, schema, log_prior, gaussians, tables):
        super().__init__(classes, schema)
        self.log_prior = np.asarray(log_prior, float)
        self.gaussians = {int(j): (np.asarray(m, float), np.asarray(v, float))
                          for j, (m, v) in gaussians.items()}
        self.tables = {int(j): np.asarray(t, float) for j, t in tables.items()}

    @classmethod
    def fit(cls, train, y, schema, params, seed):
        x = schema.transform(train)
        k = len(train.classes)
        counts = np.bincount(y, minlength=k).astype(float)
        with np.errstate(divide="ignore"):
            log_prior = np.log(counts / counts.sum())
        alpha = params.get("alpha", 1.0)
        gaussians, tables = {}, {}
        numeric = [j for j in range(x.shape[1]) if not schema.is_categorical(j)]
        floor = params.get("var_smoothing", 1e-9) * max(
            [float(np.var(x[:, j])) for j in numeric] + [1.0])
        for j in range(x.shape[1]):
            if schema.is_categorical(j):
                ncat = len(schema.categories[j])
                t = np.zeros((k, ncat))
                np.add.at(t, (y, x[:, j].astype(np.int64)), 1)
                tables[j] = np.log((t + alpha) / (t.sum(axis=1, keepdims=True) + alpha * ncat))
            else:
                means, variances = np.zeros(k), np.ones(k)
                for c in range(k):
                    vals = x[y == c, j]
                    if len(vals):
                        means[c], variances[c] = vals.mean(), vals.var()
                gaussians[j] = (means, variances + floor)
        return cls(train.classes, schema, log_prior, gaussians, tables)

    def predict_proba(self, rows, **kw):
        x = self._matrix(rows)
        logp = np.tile(self.log_prior, (len(x), 1))
        for j, (m, v) in self.gaussians.items():
            logp += -0.5 * (np.log(2 * np.pi * v) + (x[:, j:j + 1] - m) ** 2 / v)
        for j, t in self.tables.items():
            codes = x[:, j].astype(np.int64)
            ok = (codes >= 0) & (codes < t.shape[1])
            logp[ok] += t[:, codes[ok]].T
        return softmax(logp)

    def _state(self):
        return {"log_prior": [None if not np.isfinite(v) else v for v in self.log_prior.tolist()],
                "gaussians": {self.schema.names[j]: {"mean": m.tolist(), "var": v.tolist()}
                              for j, (m, v) in self.gaussians.items()},
                "tables": {self.schema.names[j]: t.tolist() for j, t in self.tables.items()}}

    @classmethod
    def from_state(cls, obj, classes, schema):
        prior = [-np.inf if v is None else v for v in obj["log_prior"]]
        g = {schema.names.index(n): (d["mean"], d["var"]) for n, d in obj["gaussians"].items()}
        t = {schema.names.index(n): v for n, v in obj["tables"].items()}
        return cls(classes, schema, prior, g, t)


class ForestModel(Model):
    """Bagged trees with per-node column subsampling; scores are averaged tree distributions."""

    kind = FOREST

    def __init__(self, classes, schema, trees, seeds, settings):
        super().__init__(classes, schema)
        self.trees = list(trees)
        self.seeds = list(seeds)
        self.settings = dict(settings)

    @classmethod
    def fit(cls, train, y, schema, params, seed):
        settings = dict(FOREST_DEFAULTS, **params)
        tree_keys = {"max_depth", "min_split", "complexity", "min_bucket"}
        p = CartParams(use_surrogates=False, max_surrogates=0,
                       **{k: v for k, v in settings.items() if k in tree_keys})
        x = schema.transform(train)
        n, n_features = x.shape
        mtry = _resolve_max_features(settings["max_features"], n_features)
        cat = [schema.is_categorical(j) for j in range(n_features)]
        ncat = [len(c) for c in schema.categories]
        seeds = [int(s.generate_state(1)[0])
                 for s in np.random.SeedSequence(seed).spawn(settings["n_trees"])]
        trees = []
        for s in seeds:
            rng = np.random.default_rng(s)
            rows = rng.integers(0, n, n) if settings["bootstrap"] else np.arange(n)
            sampler = None
            if mtry < n_features:
                def sampler(rng=rng):
                    return np.sort(rng.choice(n_features, mtry, replace=False))
            trees.append(TreeBuilder(x[rows], y[rows], len(train.classes), cat, ncat, p,
                                     sampler).build())
        return cls(train.classes, schema, trees, seeds, settings)

    def predict_proba(self, rows, **kw):
        x = self._matrix(rows)
        return sum(_cart.predict_proba(t, x) for t in self.trees) / len(self.trees)

    def importance_totals(self):
        return sum(_cart.importance_totals(t, len(self.schema.names)) for t in self.trees)

    def _state(self):
        return {"settings": self.settings, "seeds": self.seeds,
                "trees": [t.to_dict(self.schema, self.classes) for t in self.trees]}

    @classmethod
    def from_state(cls, obj, classes, schema):
        trees = [Node.from_dict(t, schema, classes) for t in obj["trees"]]
        return cls(classes, schema, trees, obj["seeds"], obj["settings"])


def _resolve_max_features(value, p):
    if value is None:
        return p
    if value == "sqrt":
        return max(1, int(math.floor(math.sqrt(p))))
    if isinstance(value, float):
        return max(1, int(value * p))
    return max(1, min(p, int(value)))


_CLASSES = {MAJORITY: MajorityModel, PERFECT: PerfectModel, CART: CartModel,
            LOGISTIC: LogisticModel, NAIVE_BAYES: NaiveBayesModel, FOREST: ForestModel}


def fit(train: Dataset, spec, seed: int = 0) -> Model:
    """Fit ``spec`` (a :class:`ModelSpec`, kind string or mapping) on ``train``.

    Deterministic in ``(train, spec, seed)``.
    """
    spec = ModelSpec.parse(spec)
    cls = _CLASSES[spec.kind]
    if train.label is None:
        raise FairMissError("training data needs a label column")
    if train.n_rows == 0 and spec.kind != PERFECT:
        raise EmptyTrainingSet("cannot fit on zero rows")
    if not cls.tolerates_missing and train.n_missing_cells:
        raise MissingValuesUnsupported(
            f"{DISPLAY[spec.kind]} needs complete rows; found {train.n_missing_cells} masked cells")
    schema = FeatureSchema.of(train)
    y = label_codes(train, train.classes)
    if spec.kind not in (MAJORITY, PERFECT) and len(np.unique(y)) < 2:
        warnings.warn(f"{DISPLAY[spec.kind]} trained on a single class; predicting it constantly",
                      SingleClassTraining, stacklevel=2)
        return MajorityModel.fit(train, y, schema, {}, seed)
    return cls.fit(train, y, schema, dict(spec.params), seed)


def predict(m: Model, rows: Dataset, **kw) -> Predictions:
    return m.predict(rows, **kw)


def feature_importance(m: Model) -> dict:
    """Total impurity decrease per column, normalised to sum to 1 (all zeros for a stump)."""
    if not isinstance(m, (CartModel, ForestModel)):
        raise NotATree(f"{type(m).__name__} has no tree structure")
    totals = m.importance_totals()
    s = totals.sum()
    ratios = totals / s if s > 0 else totals
    return {name: float(r) for name, r in zip(m.schema.names, ratios)}


def to_json(m: Model) -> str:
    return json.dumps(m.to_dict(), sort_keys=True)


def from_json(text) -> Model:
    obj = json.loads(text) if isinstance(text, str) else text
    schema = FeatureSchema.from_dict(obj["schema"]) if "schema" in obj else None
    return _CLASSES[obj["kind"]].from_state(obj, tuple(obj["classes"]), schema)
