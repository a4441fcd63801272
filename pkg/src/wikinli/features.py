"""Per-class n-gram frequency distributions and similarity features.

For a comment ``C`` and a class distribution ``f`` of order ``n``::

    count(x) = f[x] if x was seen in f, else 1
    Sim(C, f) = sum(log2(count(x)) for x in ngrams(C, n))

Word n-grams slide over the token sequence, PoS n-grams over the tag
sequence, and character n-grams over the characters of each token
separately (they never span two tokens).
"""

from __future__ import annotations

import enum
import io
import math
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from .errors import DataError

FORMAT_VERSION = 1
KEY_SEP = "\x1f"
ORDERS = (1, 2, 3, 4)


class Level(enum.Enum):
    WORD = "word"
    CHAR = "char"
    POS = "pos"


LEVELS = (Level.WORD, Level.CHAR, Level.POS)


def ngrams(seq, n):
    return [tuple(seq[i:i + n]) for i in range(len(seq) - n + 1)]


def comment_ngrams(comment, level: Level, order: int):
    if level is Level.WORD:
        return ngrams(comment.tokens.tokens, order)
    if level is Level.POS:
        return ngrams(comment.pos_tags, order)
    grams = []
    for tok in comment.tokens.tokens:
        grams.extend(ngrams(tok, order))
    return grams


def serialize_key(gram):
    return KEY_SEP.join(gram)


@dataclass
class FreqDist:
    level: Level
    order: int
    class_label: str
    counts: dict = field(default_factory=dict)
    total: int = 0

    def __post_init__(self):
        if self.order not in ORDERS:
            raise ValueError(f"order must be in 1..4, got {self.order}")
        if any(c < 1 for c in self.counts.values()):
            raise ValueError("counts must be positive")
        if self.total != sum(self.counts.values()):
            raise ValueError("total must equal the sum of counts")

    def __len__(self):
        return len(self.counts)

    def __contains__(self, gram):
        return gram in self.counts

    @classmethod
    def from_counter(cls, level, order, class_label, counter):
        counts = {k: v for k, v in counter.items() if v > 0}
        return cls(level, order, class_label, counts, sum(counts.values()))

    def merge(self, other):
        """Sum two shards counted over disjoint comments of the same class."""
        if (self.level, self.order, self.class_label) != (other.level, other.order, other.class_label):
            raise ValueError("can only merge distributions of the same level, order and class")
        merged = Counter(self.counts)
        merged.update(other.counts)
        return FreqDist.from_counter(self.level, self.order, self.class_label, merged)

    def restrict(self, keep):
        """A copy holding only the n-grams in *keep*."""
        return FreqDist.from_counter(self.level, self.order, self.class_label,
                                     {k: v for k, v in self.counts.items() if k in keep})

    def dumps(self):
        out = io.StringIO()
        out.write(f"#freqdist\tlevel={self.level.value}\torder={self.order}\t"
                  f"class={self.class_label}\ttotal={self.total}\tversion={FORMAT_VERSION}\n")
        for key, count in sorted((serialize_key(g), c) for g, c in self.counts.items()):
            out.write(f"{key}\t{count}\n")
        return out.getvalue()

    @classmethod
    def loads(cls, text):
        lines = text.split("\n")
        fields = lines[0].split("\t")
        if fields[0] != "#freqdist":
            raise DataError("not a freqdist file")
        head = dict(f.split("=", 1) for f in fields[1:])
        if int(head["version"]) != FORMAT_VERSION:
            raise DataError(f"unsupported freqdist version {head['version']}")
        counts = {}
        for line in lines[1:]:
            if line:
                key, count = line.rsplit("\t", 1)
                counts[tuple(key.split(KEY_SEP))] = int(count)
        dist = cls(Level(head["level"]), int(head["order"]), head["class"], counts, sum(counts.values()))
        if dist.total != int(head["total"]):
            raise DataError("freqdist total does not match its counts")
        return dist

    def save(self, path):
        Path(path).write_text(self.dumps(), encoding="utf-8", newline="\n")

    @classmethod
    def load(cls, path):
        return cls.loads(Path(path).read_text(encoding="utf-8"))


def build_freqdist(comments, level: Level, order: int, class_label: str) -> FreqDist:
    if not comments:
        raise DataError(f"no comments to build the {level.value}/{order} distribution of {class_label!r}")
    if order not in ORDERS:
        raise ValueError(f"order must be in 1..4, got {order}")
    counter = Counter()
    for c in comments:
        if c.label is not None and c.label != class_label:
            raise DataError(f"comment {c.comment_id} is labeled {c.label!r}, not {class_label!r}")
        counter.update(comment_ngrams(c, level, order))
    return FreqDist.from_counter(level, order, class_label, counter)


def merge_freqdists(dists):
    dists = list(dists)
    out = dists[0]
    for d in dists[1:]:
        out = out.merge(d)
    return out


def build_class_dists(comments, class_labels=None, levels=LEVELS, orders=ORDERS):
    """Every (class, level, order) distribution over labeled *comments*."""
    by_class = {}
    for c in comments:
        by_class.setdefault(c.label, []).append(c)
    labels = list(class_labels) if class_labels is not None else sorted(by_class)
    dists = {}
    for lab in labels:
        for level in levels:
            for n in orders:
                dists[(lab, level, n)] = build_freqdist(by_class.get(lab, []), level, n, lab)
    return dists


def count_lookup(x, f: FreqDist) -> int:
    if len(x) != f.order:
        raise ValueError(f"{len(x)}-gram looked up in an order-{f.order} distribution")
    return f.counts.get(tuple(x), 1)


def similarity(comment, f: FreqDist) -> float:
    counts = f.counts
    return math.fsum(math.log2(counts.get(g, 1)) for g in comment_ngrams(comment, f.level, f.order))


# --------------------------------------------------------------------------
# Feature vectors

def load_stopwords(path=None):
    if path is None:
        text = resources.files("wikinli").joinpath("data/stopwords_en.txt").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    return tuple(w.strip() for w in text.splitlines() if w.strip())


@dataclass(frozen=True)
class FeatureVector:
    values: tuple
    schema: tuple

    def __post_init__(self):
        if len(self.values) != len(self.schema):
            raise ValueError(f"{len(self.values)} values for a {len(self.schema)}-feature schema")


def feature_schema(class_labels: Sequence[str], stopwords: Sequence[str]) -> tuple:
    names = [f"sim[{lab}|{level.value}|{n}]" for lab in class_labels for level in LEVELS for n in ORDERS]
    names += [f"stop[{w}]" for w in stopwords]
    names += ["avg_word_len", "n_sentences"]
    return tuple(names)


class Featurizer:
    """Maps processed comments to fixed-schema feature vectors.

    The similarity block is ordered by class (as given), then level
    (word, char, pos), then order 1-4.
    """

    def __init__(self, dists: Mapping, stopwords: Sequence[str], class_labels=None):
        labels = list(class_labels) if class_labels is not None else sorted({k[0] for k in dists})
        self.keys = [(lab, level, n) for lab in labels for level in LEVELS for n in ORDERS]
        for key in self.keys:
            if key not in dists:
                lab, level, n = key
                raise DataError(f"missing distribution for class={lab!r} level={level.value} order={n}")
        self.dists = dists
        self.class_labels = labels
        self.stopwords = tuple(stopwords)
        self.schema = feature_schema(labels, self.stopwords)

    def __call__(self, comment) -> FeatureVector:
        # n-grams depend only on (level, order): extract once, score against each class
        grams = {(level, n): comment_ngrams(comment, level, n) for level in LEVELS for n in ORDERS}
        sims = []
        for lab, level, n in self.keys:
            counts = self.dists[(lab, level, n)].counts
            sims.append(math.fsum(math.log2(counts.get(g, 1)) for g in grams[(level, n)]))
        tokens = comment.tokens.tokens
        n_tok = len(tokens)
        lowered = Counter(t.lower() for t in tokens)
        stops = [lowered.get(w, 0) / n_tok if n_tok else 0.0 for w in self.stopwords]
        avg_len = sum(len(t) for t in tokens) / n_tok if n_tok else 0.0
        return FeatureVector(tuple(sims + stops + [avg_len, float(comment.tokens.n_sentences)]), self.schema)


def featurize(comment, dists, stopwords, class_labels=None) -> FeatureVector:
    return Featurizer(dists, stopwords, class_labels)(comment)
