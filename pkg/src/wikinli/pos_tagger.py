"""Greedy averaged-perceptron PoS tagger over the Penn Treebank tag set.

Context features for position ``i``: bias, the lowercased word, 1-3
character suffixes, first character, word shape, previous tag, previous two
tags, previous tag with the word, and the neighbouring words.  Frequent
unambiguous training words go into a fallback lexicon that bypasses the
perceptron.  Scores are compared in :data:`PENN_TAGS` order, so an exact
tie (including a token with no evidence at all) resolves to the earliest
tag, ``NN``.
"""

from __future__ import annotations

import functools
import io
import logging
import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import DataError

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1

# Rough frequency order; the first entry wins exact ties.
PENN_TAGS = (
    "NN", "IN", "DT", "NNP", "JJ", "NNS", ",", ".", "CC", "RB", "VB", "VBD",
    "VBZ", "VBP", "VBN", "VBG", "PRP", "PRP$", "TO", "CD", "MD", "WDT", "WP",
    "WP$", "WRB", "POS", "RP", "EX", "JJR", "JJS", "RBR", "RBS", "NNPS", "PDT",
    "UH", "FW", "SYM", "LS", ":", "``", "''", "-LRB-", "-RRB-", "#", "$",
)

START = ("-START-", "-START2-")


@dataclass
class TaggerModel:
    weights: dict = field(default_factory=dict)     # feature -> {tag: weight}
    lexicon: dict = field(default_factory=dict)     # token -> tag
    tags: tuple = PENN_TAGS
    version: int = FORMAT_VERSION
    epoch_accuracy: list = field(default_factory=list, compare=False)

    def score(self, features):
        scores = defaultdict(float)
        for f in features:
            for t, w in self.weights.get(f, {}).items():
                scores[t] += w
        best, best_score = self.tags[0], scores.get(self.tags[0], 0.0)
        for t in self.tags[1:]:
            s = scores.get(t, 0.0)
            if s > best_score:
                best, best_score = t, s
        return best

    def dumps(self):
        out = io.StringIO()
        out.write(f"#wikinli-tagger\t{self.version}\n")
        out.write("#tags\t" + "\t".join(self.tags) + "\n")
        out.write("[lexicon]\n")
        for tok in sorted(self.lexicon):
            out.write(f"{tok}\t{self.lexicon[tok]}\n")
        out.write("[weights]\n")
        for feat in sorted(self.weights):
            for t in sorted(self.weights[feat]):
                out.write(f"{feat}\t{t}\t{self.weights[feat][t]!r}\n")
        return out.getvalue()

    @classmethod
    def loads(cls, text):
        lines = text.split("\n")
        head = lines[0].split("\t")
        if head[0] != "#wikinli-tagger":
            raise DataError("not a tagger model file")
        version = int(head[1])
        if version != FORMAT_VERSION:
            raise DataError(f"unsupported tagger model version {version}")
        tags = tuple(lines[1].split("\t")[1:])
        weights, lexicon, section = {}, {}, None
        for line in lines[2:]:
            if not line:
                continue
            if line in ("[lexicon]", "[weights]"):
                section = line
            elif section == "[lexicon]":
                tok, t = line.split("\t")
                lexicon[tok] = t
            elif section == "[weights]":
                feat, t, w = line.split("\t")
                weights.setdefault(feat, {})[t] = float(w)
        return cls(weights, lexicon, tags, version)

    def save(self, path):
        Path(path).write_text(self.dumps(), encoding="utf-8", newline="\n")

    @classmethod
    def load(cls, path):
        return cls.loads(Path(path).read_text(encoding="utf-8"))


def _normalize(word):
    if word.isdigit():
        return "!YEAR" if len(word) == 4 else "!DIGITS"
    return word.lower()


def _shape(word):
    if word.isdigit():
        return "d"
    if not any(ch.isalnum() for ch in word):
        return "p"
    if word[0].isupper():
        return "X" if word.isupper() and len(word) > 1 else "Xx"
    return "x"


def features(i, words, prev, prev2):
    """Feature strings for ``words[i]`` given the two previous tags."""
    w = words[i]
    low = _normalize(w)
    before = _normalize(words[i - 1]) if i > 0 else "-START-"
    after = _normalize(words[i + 1]) if i + 1 < len(words) else "-END-"
    return (
        "bias",
        "w=" + low,
        "s1=" + low[-1:],
        "s2=" + low[-2:],
        "s3=" + low[-3:],
        "p1=" + low[:1],
        "shape=" + _shape(w),
        "t1=" + prev,
        "t2=" + prev2 + "|" + prev,
        "t1w=" + prev + "|" + low,
        "w-1=" + before,
        "s3-1=" + before[-3:],
        "w+1=" + after,
        "s3+1=" + after[-3:],
    )


def tag(model: TaggerModel, tokens) -> list:
    """Tag a token sequence left to right; always returns one tag per token."""
    words = tuple(getattr(tokens, "tokens", tokens))
    prev, prev2 = START
    out = []
    for i, w in enumerate(words):
        t = model.lexicon.get(w)
        if t is None:
            t = model.score(features(i, words, prev, prev2)) if model.weights else _shape_guess(w, model.tags)
        out.append(t)
        prev2, prev = prev, t
    return out


def _shape_guess(word, tags):
    s = _shape(word)
    guess = {"d": "CD", "p": ".", "Xx": "NNP", "X": "NNP"}.get(s, "NN")
    return guess if guess in tags else tags[0]


def build_lexicon(corpus, min_freq=2, min_share=0.97):
    counts = defaultdict(Counter)
    for words, tags in corpus:
        for w, t in zip(words, tags):
            counts[w][t] += 1
    lexicon = {}
    for w, c in counts.items():
        t, n = min(c.items(), key=lambda kv: (-kv[1], kv[0]))
        total = sum(c.values())
        if total >= min_freq and n / total >= min_share:
            lexicon[w] = t
    return lexicon


def train_tagger(tagged_corpus, epochs: int = 8, seed: int = 0, tags=PENN_TAGS) -> TaggerModel:
    """Averaged-perceptron training with a seeded shuffle per epoch."""
    corpus = [(tuple(w), tuple(t)) for w, t in tagged_corpus]
    if not corpus:
        raise DataError("empty training corpus")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    tagset = set(tags)
    for words, ts in corpus:
        if len(words) != len(ts):
            raise DataError(f"misaligned sentence: {' '.join(words)[:60]}")
        bad = set(ts) - tagset
        if bad:
            raise DataError(f"tags outside the tag set: {sorted(bad)}")

    model = TaggerModel(lexicon=build_lexicon(corpus), tags=tuple(tags))
    weights = model.weights
    totals = defaultdict(float)
    stamps = defaultdict(int)
    step = 0

    def update(truth, guess, feats):
        for f in feats:
            fw = weights.setdefault(f, {})
            for t, delta in ((truth, 1.0), (guess, -1.0)):
                key = (f, t)
                w = fw.get(t, 0.0)
                totals[key] += (step - stamps[key]) * w
                stamps[key] = step
                fw[t] = w + delta

    rng = random.Random(seed)
    order = list(range(len(corpus)))
    for epoch in range(epochs):
        rng.shuffle(order)
        correct = seen = 0
        for idx in order:
            words, gold = corpus[idx]
            prev, prev2 = START
            for i, w in enumerate(words):
                guess = model.lexicon.get(w)
                if guess is None:
                    feats = features(i, words, prev, prev2)
                    guess = model.score(feats)
                    step += 1
                    if guess != gold[i]:
                        update(gold[i], guess, feats)
                correct += guess == gold[i]
                seen += 1
                prev2, prev = prev, guess
        acc = correct / seen
        model.epoch_accuracy.append(acc)
        logger.info("tagger epoch %d: training accuracy %.4f", epoch + 1, acc)

    averaged = {}
    for f, fw in weights.items():
        for t, w in fw.items():
            key = (f, t)
            total = totals[key] + (step - stamps[key]) * w
            avg = total / step if step else w
            if avg:
                averaged.setdefault(f, {})[t] = avg
    model.weights = averaged
    return model


def read_tagged(lines):
    """Parse ``token/TAG`` lines; ``#`` lines and blank lines are skipped."""
    corpus = []
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        pairs = [p.rsplit("/", 1) for p in line.split(" ")]
        if any(len(p) != 2 for p in pairs):
            raise DataError(f"malformed tagged line: {line[:60]}")
        corpus.append((tuple(p[0] for p in pairs), tuple(p[1] for p in pairs)))
    return corpus


def bootstrap_corpus():
    text = resources.files("wikinli").joinpath("data/bootstrap_tagged.txt").read_text("utf-8")
    return read_tagged(text.splitlines())


@functools.lru_cache(maxsize=1)
def default_model() -> TaggerModel:
    return train_tagger(bootstrap_corpus(), epochs=8, seed=0)


def evaluate_tagger(model, corpus):
    correct = total = 0
    for words, gold in corpus:
        pred = tag(model, words)
        correct += sum(p == g for p, g in zip(pred, gold))
        total += len(gold)
    return correct / total if total else 0.0
