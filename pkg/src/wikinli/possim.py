"""Max-similarity PoS n-gram classifier.

Each candidate class holds a PoS n-gram distribution.  A comment first
eliminates every candidate whose distribution lacks one of the comment's
n-grams; among the survivors the class with the largest similarity (sum of
log2 counts) wins, ties going to the earlier class.  When every candidate
is eliminated the comment is a *zero comment* and is assigned the default
class (US English, the majority class).

Cascade estimation
------------------
With a cascade mode an unseen 4-gram ``(a, b, c, d)`` is estimated from
lower orders instead of eliminating the candidate:

* ``tribi``:  ``c(a,b,c) * c(b,c,d) / c(b,c)``
* ``biuni``:  ``c(a,b) * c(b,c) * c(c,d) / (c(b) * c(c))``
* ``both``:   mean of the two estimates

Every estimate is floored at 1.  An estimate counts as *supported* when all
of its numerator and denominator counts are non-zero; a candidate is only
eliminated by n-grams with no supported estimate.
"""

from __future__ import annotations

import csv
import enum
import io
import logging
import math
import random
from collections import Counter
from dataclasses import dataclass, field

from .errors import ConfigError
from .features import Level, comment_ngrams, serialize_key

logger = logging.getLogger(__name__)

ELIMINATED = "eliminated"
DEFAULT_CLASS = "en-us"


class Cascade(enum.Enum):
    OFF = "off"
    TRIBI = "tribi"
    BIUNI = "biuni"
    BOTH = "both"


@dataclass(frozen=True)
class Cutoff:
    """``none``, ``top:K`` (K most frequent per class) or ``appears:K``
    (n-grams present in at least K classes)."""

    mode: str = "none"
    k: int | None = None

    def __post_init__(self):
        if self.mode not in ("none", "top", "appears"):
            raise ConfigError(f"unknown cutoff mode {self.mode!r}")
        if self.mode == "none" and self.k is not None:
            raise ConfigError("cutoff 'none' takes no k")
        if self.mode != "none" and (self.k is None or self.k <= 0):
            raise ConfigError(f"cutoff {self.mode!r} needs a positive k")

    @classmethod
    def parse(cls, text):
        text = text.strip().lower()
        if text in ("", "none"):
            return cls()
        mode, _, k = text.partition(":")
        try:
            return cls(mode, int(k))
        except ValueError:
            raise ConfigError(f"bad cutoff {text!r}; use none, top:K or appears:K") from None

    def __str__(self):
        return "none" if self.mode == "none" else f"{self.mode}:{self.k}"


@dataclass(frozen=True)
class PosSimConfig:
    order: int = 4
    min_pos_ngrams: int = 100
    cutoff: Cutoff = Cutoff()
    cascade: Cascade = Cascade.OFF
    default_class: str = DEFAULT_CLASS

    def __post_init__(self):
        if self.order not in (1, 2, 3, 4):
            raise ConfigError(f"order must be in 1..4, got {self.order}")
        if self.cascade is not Cascade.OFF and self.order != 4:
            raise ConfigError("cascade estimation applies to 4-grams only")
        if self.min_pos_ngrams < 0:
            raise ConfigError("min_pos_ngrams must be non-negative")


@dataclass
class PosSimOutcome:
    predicted: str
    zero_comment: bool
    per_class_scores: dict = field(default_factory=dict)


# --------------------------------------------------------------------------

def _cascade_parts(x, family, mode):
    four = family[4].counts.get(x)
    if four is not None:
        return float(four), True
    c3, c2, c1 = family[3].counts, family[2].counts, family[1].counts
    a, b, c, d = x

    def tribi():
        num = c3.get((a, b, c), 0) * c3.get((b, c, d), 0)
        den = c2.get((b, c), 0)
        return (max(1.0, num / den), True) if num and den else (1.0, False)

    def biuni():
        num = c2.get((a, b), 0) * c2.get((b, c), 0) * c2.get((c, d), 0)
        den = c1.get((b,), 0) * c1.get((c,), 0)
        return (max(1.0, num / den), True) if num and den else (1.0, False)

    if mode is Cascade.TRIBI:
        return tribi()
    if mode is Cascade.BIUNI:
        return biuni()
    if mode is Cascade.BOTH:
        (t, ts), (u, us) = tribi(), biuni()
        return (t + u) / 2.0, ts or us
    raise ValueError("cascade estimation needs a cascade mode other than off")


def cascade_estimate(x, family, mode: Cascade) -> float:
    """Count of 4-gram *x* if seen, else its lower-order estimate (>= 1).

    *family* maps order (1-4) to the class's PoS distribution of that order.
    """
    if len(x) != 4:
        raise ValueError("cascade estimation is defined for 4-grams")
    missing = [n for n in (1, 2, 3, 4) if n not in family]
    if missing:
        raise ValueError(f"family lacks orders {missing}")
    return _cascade_parts(tuple(x), family, mode)[0]


def classify_possim(comment, dists, cfg: PosSimConfig, families=None) -> PosSimOutcome | None:
    """Classify one comment; ``None`` means it failed the length gate.

    *dists* maps class label to its PoS distribution at ``cfg.order``, in
    tie-breaking order.  *families* (class -> {order: dist}) is required
    when ``cfg.cascade`` is on.
    """
    grams = comment_ngrams(comment, Level.POS, cfg.order)
    if len(grams) <= cfg.min_pos_ngrams:
        return None
    if cfg.cascade is not Cascade.OFF and families is None:
        raise ConfigError("cascade estimation needs the per-order distribution families")
    scores = {}
    best = None
    for cls, dist in dists.items():
        total = []
        for g in grams:
            if cfg.cascade is Cascade.OFF:
                count = dist.counts.get(g)
                ok = count is not None
            else:
                count, ok = _cascade_parts(g, families[cls], cfg.cascade)
            if not ok:
                break
            total.append(math.log2(count))
        else:
            scores[cls] = math.fsum(total)
            if best is None or scores[cls] > scores[best]:
                best = cls
            continue
        scores[cls] = ELIMINATED
    if best is None:
        return PosSimOutcome(cfg.default_class, True, scores)
    return PosSimOutcome(best, False, scores)


def apply_cutoff(dists, cutoff: Cutoff):
    """Drop rare n-grams from every class distribution."""
    if cutoff.mode == "none":
        return dict(dists)
    if cutoff.mode == "top":
        out = {}
        for cls, d in dists.items():
            if cutoff.k >= len(d):
                logger.warning("cutoff top:%d covers all %d n-grams of %s", cutoff.k, len(d), cls)
                out[cls] = d
                continue
            ranked = sorted(d.counts.items(), key=lambda kv: (-kv[1], serialize_key(kv[0])))
            out[cls] = d.restrict({g for g, _ in ranked[:cutoff.k]})
        return out
    if cutoff.k > len(dists):
        logger.warning("cutoff appears:%d exceeds the %d classes; nothing survives", cutoff.k, len(dists))
    spread = Counter()
    for d in dists.values():
        spread.update(d.counts.keys())
    keep = {g for g, n in spread.items() if n >= cutoff.k}
    return {cls: d.restrict(keep) for cls, d in dists.items()}


def tricky_filter(test, dists, order=None):
    """Keep comments whose every PoS n-gram is in the true class's distribution.

    Returns ``(retained, discard_ratio)``.
    """
    retained = []
    for c in test:
        d = dists.get(c.label)
        if d is None:
            continue
        n = order or d.order
        if all(g in d.counts for g in comment_ngrams(c, Level.POS, n)):
            retained.append(c)
    ratio = 1.0 - len(retained) / len(test) if test else 0.0
    return retained, ratio


def _labels_of(items):
    return [c if isinstance(c, str) else c.label for c in items]


def baselines(test, classes, seed: int, train_labels=None):
    """``(Baseline-Max accuracy, Baseline-Random accuracy)``.

    Baseline-Max always predicts the largest training class (the largest
    test class when *train_labels* is not given, ties by class order).
    Baseline-Random draws uniformly from the classes with a seeded PRNG.
    *classes* is a class list or a class count.
    """
    labels = _labels_of(test)
    if not labels:
        return 0.0, 0.0
    if isinstance(classes, int):
        known = sorted(set(labels) | set(train_labels or ()))
        classes = known + [f"<class{i}>" for i in range(classes - len(known))]
    classes = list(classes)
    ref = Counter(train_labels if train_labels is not None else labels)
    majority = max(classes, key=lambda c: (ref.get(c, 0), -classes.index(c)))
    rng = random.Random(seed)
    max_acc = sum(l == majority for l in labels) / len(labels)
    rand_acc = sum(l == classes[rng.randrange(len(classes))] for l in labels) / len(labels)
    return max_acc, rand_acc


# --------------------------------------------------------------------------
# Evaluation and table emission

@dataclass
class PosSimReport:
    config: PosSimConfig
    available: int
    nonzero: int
    overall_acc: float
    nonzero_acc: float
    baseline_max: float
    baseline_max_nonzero: float
    baseline_random: float
    baseline_random_nonzero: float
    per_class: dict            # class -> [actual, predicted, correct]
    truth: list
    predicted: list


def evaluate_possim(test, dists, cfg: PosSimConfig, families=None, seed=0, train_labels=None,
                    classes=None) -> PosSimReport:
    classes = list(classes) if classes is not None else list(dists)
    truth, pred, zero = [], [], []
    for c in test:
        out = classify_possim(c, dists, cfg, families)
        if out is None:
            continue
        truth.append(c.label)
        pred.append(out.predicted)
        zero.append(out.zero_comment)
    nz_truth = [t for t, z in zip(truth, zero) if not z]
    nz_pred = [p for p, z in zip(pred, zero) if not z]

    def acc(t, p):
        return sum(a == b for a, b in zip(t, p)) / len(t) if t else 0.0

    bmax, brand = baselines(truth, classes, seed, train_labels)
    bmax_nz, brand_nz = baselines(nz_truth, classes, seed, train_labels)
    per_class = {c: [0, 0, 0] for c in classes}
    for t, p in zip(truth, pred):
        per_class.setdefault(t, [0, 0, 0])[0] += 1
        per_class.setdefault(p, [0, 0, 0])[1] += 1
        if t == p:
            per_class[t][2] += 1
    return PosSimReport(cfg, len(truth), len(nz_truth), acc(truth, pred), acc(nz_truth, nz_pred),
                        bmax, bmax_nz, brand, brand_nz, per_class, truth, pred)


def _pct(x):
    return f"{100 * x:.2f}"


def to_csv(header, rows):
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return out.getvalue()


def order_table(reports):
    """Per-order accuracy: overall, nonzero, available and nonzero counts."""
    names = {1: "uni-grams", 2: "bi-grams", 3: "tri-grams", 4: "4-grams"}
    rows = [[names[r.config.order], _pct(r.overall_acc), _pct(r.nonzero_acc), r.available, r.nonzero]
            for r in reports]
    ref = reports[0]
    rows.append(["baseline-max", _pct(ref.baseline_max), _pct(ref.baseline_max_nonzero), ref.available, ref.available])
    rows.append(["baseline-random", _pct(ref.baseline_random), _pct(ref.baseline_random_nonzero),
                 ref.available, ref.available])
    return to_csv(["", "overall_accuracy", "nonzero_accuracy", "available_count", "nonzero_count"], rows)


def length_tables(reports):
    """Accuracy by length threshold, overall and on nonzero data."""
    header = ["accuracy"] + [f"len>{r.config.min_pos_ngrams}" for r in reports]
    overall = [
        ["4-grams"] + [_pct(r.overall_acc) for r in reports],
        ["baseline-max"] + [_pct(r.baseline_max) for r in reports],
        ["baseline-random"] + [_pct(r.baseline_random) for r in reports],
    ]
    nonzero = [
        ["4-grams"] + [_pct(r.nonzero_acc) for r in reports],
        ["baseline-max"] + [_pct(r.baseline_max_nonzero) for r in reports],
        ["baseline-random"] + [_pct(r.baseline_random_nonzero) for r in reports],
    ]
    return to_csv(header, overall), to_csv(header, nonzero)


def cutoff_table(reports):
    rows = [[str(r.config.cutoff), _pct(r.overall_acc), _pct(r.nonzero_acc)] for r in reports]
    return to_csv(["cutoff", "overall_accuracy", "nonzero_accuracy"], rows)


def cascade_table(reports):
    rows = [[r.config.cascade.value, _pct(r.overall_acc), _pct(r.nonzero_acc), r.nonzero] for r in reports]
    return to_csv(["cascade", "overall_accuracy", "nonzero_accuracy", "nonzero_count"], rows)


def class_table(report, names=None):
    names = names or {}
    rows = [[names.get(c, c), *report.per_class[c]] for c in report.per_class]
    return to_csv(["class", "actual", "predicted", "correct"], rows)
