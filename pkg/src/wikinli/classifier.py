"""Multinomial logistic regression trained by full-batch gradient descent.

Features are z-scored with training statistics (zero-variance columns get a
standard deviation of 1).  The objective is mean softmax cross-entropy plus
``l2/2 * ||W||^2`` over the non-bias weights, minimised with an Armijo
backtracking line search starting from ``lr`` at every epoch.
"""

from __future__ import annotations

import csv
import io
import json
import math
import random
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import DataError

ARMIJO_C = 1e-4
MIN_STEP = 1e-12


@dataclass(frozen=True)
class Hyper:
    lr: float = 1.0
    l2: float = 1e-4
    max_epochs: int = 500
    tol: float = 1e-6


def _unpack(items):
    """Split ``(vector, label[, comment_id])`` items into parts."""
    vecs, labels, ids = [], [], []
    for i, item in enumerate(items):
        vecs.append(item[0])
        labels.append(item[1])
        ids.append(item[2] if len(item) > 2 else f"#{i}")
    return vecs, labels, ids


def _matrix(vecs, schema, ids):
    for v, cid in zip(vecs, ids):
        if tuple(v.schema) != tuple(schema):
            raise DataError(f"feature schema mismatch for {cid}")
    X = np.array([v.values for v in vecs], dtype=np.float64).reshape(len(vecs), len(schema))
    bad = ~np.isfinite(X).all(axis=1)
    if bad.any():
        raise DataError(f"non-finite feature value in comment {ids[int(np.argmax(bad))]}")
    return X


def softmax(scores):
    z = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _with_bias(X):
    return np.hstack([X, np.ones((X.shape[0], 1))])


def loss_and_grad(W, Xb, y, l2):
    """Regularised cross-entropy and its gradient.

    *Xb* already carries the trailing bias column; *y* holds class indices.
    """
    n = Xb.shape[0]
    scores = Xb @ W.T
    z = scores - scores.max(axis=1, keepdims=True)
    logZ = np.log(np.exp(z).sum(axis=1))
    nll = float(np.mean(logZ - z[np.arange(n), y]))
    P = np.exp(z - logZ[:, None])
    P[np.arange(n), y] -= 1.0
    grad = P.T @ Xb / n
    reg = W.copy()
    reg[:, -1] = 0.0
    grad += l2 * reg
    return nll + 0.5 * l2 * float(np.sum(reg * reg)), grad


@dataclass
class ClassifierModel:
    weights: np.ndarray          # K x (D+1), bias column last
    class_labels: tuple
    feature_schema: tuple
    mean: np.ndarray
    std: np.ndarray
    seed: int = 0
    hyper: Hyper = Hyper()
    history: list = field(default_factory=list)

    def __post_init__(self):
        K, D = len(self.class_labels), len(self.feature_schema)
        if self.weights.shape != (K, D + 1):
            raise ValueError(f"weights {self.weights.shape} do not match {K} classes x {D}+1 features")
        if (self.std <= 0).any():
            raise ValueError("standard deviations must be positive")

    def standardize(self, X):
        return (X - self.mean) / self.std

    def probabilities(self, X):
        return softmax(_with_bias(self.standardize(X)) @ self.weights.T)

    def predict_indices(self, X):
        # argmax returns the first maximum, i.e. ties go to the earlier class
        return np.argmax(self.probabilities(X), axis=1)

    def to_dict(self):
        return {
            "class_labels": list(self.class_labels),
            "feature_schema": list(self.feature_schema),
            "standardization": {"mean": [float(x) for x in self.mean], "std": [float(x) for x in self.std]},
            "weights": [float(x) for x in self.weights.ravel()],
            "shape": list(self.weights.shape),
            "seed": self.seed,
            "hyper": {"lr": self.hyper.lr, "l2": self.hyper.l2,
                      "max_epochs": self.hyper.max_epochs, "tol": self.hyper.tol},
            "history": self.history,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_dict(cls, d):
        W = np.array(d["weights"], dtype=np.float64).reshape(d["shape"])
        st = d["standardization"]
        return cls(W, tuple(d["class_labels"]), tuple(d["feature_schema"]),
                   np.array(st["mean"], dtype=np.float64), np.array(st["std"], dtype=np.float64),
                   d.get("seed", 0), Hyper(**d.get("hyper", {})), d.get("history", []))

    def save(self, path):
        Path(path).write_text(self.to_json(), encoding="utf-8", newline="\n")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def fit(train, dev=(), hyper: Hyper = Hyper(), seed: int = 0, class_labels=None) -> ClassifierModel:
    """Train on ``(FeatureVector, label)`` pairs.

    The dev set only feeds the per-epoch accuracy in ``model.history``.
    Training is deterministic: weights start at zero and every step is
    full-batch, so *seed* is recorded but does not perturb the result.
    """
    if not train:
        raise DataError("empty training set")
    vecs, labels, ids = _unpack(train)
    schema = tuple(vecs[0].schema)
    X = _matrix(vecs, schema, ids)
    classes = tuple(class_labels) if class_labels is not None else tuple(sorted(set(labels)))
    if len(classes) < 2:
        raise DataError(f"need at least two classes, got {list(classes)}")
    index = {c: i for i, c in enumerate(classes)}
    unknown = set(labels) - set(index)
    if unknown:
        raise DataError(f"training labels outside the class set: {sorted(unknown)}")
    y = np.array([index[l] for l in labels])

    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std[std <= 1e-12] = 1.0
    Xb = _with_bias((X - mean) / std)

    dev_X = dev_y = None
    if dev:
        dvecs, dlabels, dids = _unpack(dev)
        dev_X = _with_bias((_matrix(dvecs, schema, dids) - mean) / std)
        dev_y = np.array([index[l] for l in dlabels])

    W = np.zeros((len(classes), X.shape[1] + 1))
    f, g = loss_and_grad(W, Xb, y, hyper.l2)
    history = []
    for epoch in range(1, hyper.max_epochs + 1):
        gg = float(np.sum(g * g))
        if gg == 0.0:
            break
        t = hyper.lr
        while True:
            W_new = W - t * g
            f_new, g_new = loss_and_grad(W_new, Xb, y, hyper.l2)
            if f_new <= f - ARMIJO_C * t * gg:
                break
            t *= 0.5
            if t < MIN_STEP:
                break
        if t < MIN_STEP:
            break
        delta = f - f_new
        W, f, g = W_new, f_new, g_new
        row = {"epoch": epoch, "loss": f, "step": t}
        if dev_X is not None:
            row["dev_acc"] = float(np.mean(np.argmax(dev_X @ W.T, axis=1) == dev_y))
        history.append(row)
        if delta < hyper.tol:
            break
    return ClassifierModel(W, classes, schema, mean, std, seed, hyper, history)


def predict(model: ClassifierModel, v):
    if tuple(v.schema) != tuple(model.feature_schema):
        raise DataError("feature schema mismatch")
    X = np.array([v.values], dtype=np.float64)
    p = model.probabilities(X)[0]
    return model.class_labels[int(np.argmax(p))], [float(x) for x in p]


# --------------------------------------------------------------------------
# Evaluation

@dataclass
class EvalReport:
    class_labels: tuple
    confusion: np.ndarray        # rows = true, columns = predicted
    accuracy: float
    per_class: list

    def __post_init__(self):
        total = int(self.confusion.sum())
        if total and not math.isclose(self.accuracy, np.trace(self.confusion) / total):
            raise ValueError("accuracy must equal trace/sum of the confusion matrix")

    @classmethod
    def from_pairs(cls, class_labels, truth, predicted):
        index = {c: i for i, c in enumerate(class_labels)}
        K = len(class_labels)
        cm = np.zeros((K, K), dtype=np.int64)
        for t, p in zip(truth, predicted):
            if t not in index:
                raise DataError(f"label {t!r} is not one of the model's classes")
            cm[index[t], index[p]] += 1
        total = int(cm.sum())
        acc = float(np.trace(cm) / total) if total else 0.0
        per_class = []
        for i, lab in enumerate(class_labels):
            col, row = int(cm[:, i].sum()), int(cm[i, :].sum())
            per_class.append({
                "label": lab,
                "precision": cm[i, i] / col if col else 0.0,
                "recall": cm[i, i] / row if row else 0.0,
                "precision_undefined": col == 0,
                "recall_undefined": row == 0,
                "support": row,
            })
        for d in per_class:
            d["precision"] = float(d["precision"])
            d["recall"] = float(d["recall"])
        return cls(tuple(class_labels), cm, acc, per_class)

    def to_dict(self):
        return {"class_labels": list(self.class_labels),
                "confusion": self.confusion.tolist(),
                "accuracy": self.accuracy,
                "n": int(self.confusion.sum()),
                "per_class": self.per_class}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    def confusion_csv(self):
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["true\\predicted", *self.class_labels])
        for lab, row in zip(self.class_labels, self.confusion.tolist()):
            w.writerow([lab, *row])
        return out.getvalue()


def evaluate(model: ClassifierModel, test) -> EvalReport:
    if not test:
        raise DataError("empty test set")
    vecs, labels, ids = _unpack(test)
    for lab in labels:
        if lab not in model.class_labels:
            raise DataError(f"test label {lab!r} was not seen in training")
    X = _matrix(vecs, model.feature_schema, ids)
    pred = [model.class_labels[i] for i in model.predict_indices(X)]
    return EvalReport.from_pairs(model.class_labels, labels, pred)


# --------------------------------------------------------------------------
# Learning curves

class CurveRow(NamedTuple):
    fraction: float
    n_train: int
    train_acc: float
    dev_acc: float | None
    test_acc: float


def _default_label(item):
    return item[1] if isinstance(item, tuple) else item.label


def nested_subsamples(train, fractions, seed, label_of=_default_label):
    """Per-class seeded prefixes of one shuffle, so smaller fractions nest in larger."""
    fractions = [float(f) for f in fractions]
    if not fractions:
        raise ValueError("no fractions given")
    if any(not 0 < f <= 1 for f in fractions):
        raise ValueError(f"fractions must lie in (0, 1]: {fractions}")
    if any(a >= b for a, b in zip(fractions, fractions[1:])):
        raise ValueError(f"fractions must be strictly increasing: {fractions}")
    by_class = defaultdict(list)
    for item in train:
        by_class[label_of(item)].append(item)
    rng = random.Random(seed)
    order = {}
    for lab in sorted(by_class):
        items = list(by_class[lab])
        rng.shuffle(items)
        order[lab] = items
    subsets = []
    for f in fractions:
        subset = []
        for lab in sorted(order):
            k = int(len(order[lab]) * f + 1e-9)
            if k < 1:
                raise DataError(f"fraction {f} leaves no training comment for class {lab!r}")
            subset.extend(order[lab][:k])
        subsets.append(subset)
    return subsets


def learning_curve(train, dev, test, fractions, seed, hyper: Hyper = Hyper(),
                   vectorize=None, class_labels=None) -> list[CurveRow]:
    """Retrain on nested subsets of *train* and score all three splits.

    Without *vectorize* the splits hold ``(FeatureVector, label)`` pairs.
    With it they hold raw labeled items; ``vectorize(subset)`` must return a
    function mapping one item to a FeatureVector, so any statistics (such as
    n-gram distributions) can be rebuilt from the subset alone.
    """
    rows = []
    for f, subset in zip(fractions, nested_subsamples(train, fractions, seed)):
        if vectorize is None:
            sub, d, t = subset, list(dev), list(test)
        else:
            fn = vectorize(subset)
            sub, d, t = ([(fn(c), c.label) for c in part] for part in (subset, dev, test))
        model = fit(sub, d, hyper, seed, class_labels)
        rows.append(CurveRow(float(f), len(sub), evaluate(model, sub).accuracy,
                             evaluate(model, d).accuracy if d else None,
                             evaluate(model, t).accuracy))
    return rows
