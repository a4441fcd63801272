"""Synthetic tagged comments with controllable per-class style differences.

Every class shares one vocabulary and tag inventory.  A class is a tag
bigram chain plus per-tag word emissions; both start from a common base and
are perturbed per class by ``separation``.  With ``separation=0`` all
classes draw from the same distribution, so nothing label-dependent exists
to learn.
"""

from __future__ import annotations

import numpy as np

from .preprocess import ProcessedComment, TokenStream

TAGS = ("DT", "NN", "NNS", "VBZ", "VBD", "IN", "JJ", "RB", "PRP", "CC", "MD", "VB", "NNP", ".")

_CLOSED = {
    "DT": ["the", "a", "this", "that", "some", "no"],
    "IN": ["of", "in", "for", "with", "about", "from", "on", "at"],
    "PRP": ["i", "we", "he", "she", "it", "they", "you"],
    "CC": ["and", "but", "or"],
    "MD": ["can", "will", "should", "would"],
    "RB": ["very", "not", "just", "too", "now", "here"],
    "NNP": ["NNP"],
    ".": [".", "!", "?"],
}


def _vocabulary(rng, words_per_tag):
    vocab = {}
    for t in TAGS:
        if t in _CLOSED:
            vocab[t] = list(_CLOSED[t])
        else:
            stem = t.lower()
            vocab[t] = [f"{stem}{rng.integers(10**5):05d}{i}" for i in range(words_per_tag)]
    return vocab


class StyleModel:
    def __init__(self, trans, emit, vocab):
        self.trans = trans    # (T+1) x T, row 0 is the start state
        self.emit = emit      # tag -> probability vector over vocab[tag]
        self.vocab = vocab

    def sample(self, rng, n_tokens):
        tokens, tags, bounds = [], [], []
        state = 0
        end = TAGS.index(".")
        while True:
            t = int(rng.choice(len(TAGS), p=self.trans[state]))
            if len(tokens) >= n_tokens - 1:
                t = end
            tag = TAGS[t]
            words = self.vocab[tag]
            tokens.append(words[int(rng.choice(len(words), p=self.emit[tag]))])
            tags.append(tag)
            if t == end:
                bounds.append(len(tokens))
                if len(tokens) >= n_tokens:
                    break
                state = 0
            else:
                state = t + 1
        if tokens and tokens[0][0].isalpha():
            tokens[0] = tokens[0].capitalize() if tags[0] != "NNP" else tokens[0]
        return tuple(tokens), tuple(tags), tuple(bounds)


def make_styles(n_classes, separation=1.0, seed=0, words_per_tag=40):
    rng = np.random.default_rng(seed)
    vocab = _vocabulary(rng, words_per_tag)
    T = len(TAGS)
    base_trans = rng.dirichlet(np.full(T, 2.0), size=T + 1)
    base_emit = {t: rng.dirichlet(np.full(len(vocab[t]), 1.0)) for t in TAGS}
    styles = []
    for _ in range(n_classes):
        if separation > 0:
            trans = base_trans * np.exp(separation * rng.normal(size=base_trans.shape))
            trans /= trans.sum(axis=1, keepdims=True)
            emit = {}
            for t, p in base_emit.items():
                q = p * np.exp(separation * rng.normal(size=p.shape))
                emit[t] = q / q.sum()
        else:
            trans, emit = base_trans, base_emit
        styles.append(StyleModel(trans, emit, vocab))
    return styles


def generate_corpus(labels, n_per_class, separation=1.0, seed=0, min_len=25, max_len=45,
                    id_prefix="syn"):
    """``n_per_class`` processed comments per label (an int or a list)."""
    styles = make_styles(len(labels), separation, seed)
    rng = np.random.default_rng(seed + 1)
    counts = n_per_class if isinstance(n_per_class, (list, tuple)) else [n_per_class] * len(labels)
    out = []
    for lab, style, n in zip(labels, styles, counts):
        for i in range(n):
            toks, tags, bounds = style.sample(rng, int(rng.integers(min_len, max_len + 1)))
            out.append(ProcessedComment(f"{id_prefix}-{lab}-{i:05d}", lab, TokenStream(toks, bounds), tags))
    return out
