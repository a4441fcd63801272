"""Text normalization: scrub -> tokenize -> tag -> mask.

Tokenization rules
------------------
* A token is either a run of word characters (letters, digits, ``_`` and the
  replacement character U+FFFD, with internal apostrophes such as ``don't``)
  or a single other non-space character.  Punctuation is always its own token.
* A sentence ends at a ``.``, ``!`` or ``?`` token that is followed by
  whitespace and a capitalised token, or by the end of the text.  A period
  right after a single capital letter (an initial such as ``A.``) never ends
  a sentence.  Whatever follows the last boundary forms a final sentence.

The 20-token admission gate counts tokens after scrubbing, punctuation
included.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import DataError

REPLACEMENT = "�"
PROPER_NOUN_TAGS = ("NNP", "NNPS")
SENTENCE_END = frozenset(".!?")

_TOKEN_RE = re.compile(r"[\w�]+(?:'[\w�]+)*|[^\w\s�]")


@dataclass(frozen=True)
class TokenStream:
    tokens: tuple
    sentence_bounds: tuple = ()

    def __post_init__(self):
        b = self.sentence_bounds
        if any(x >= y for x, y in zip(b, b[1:])):
            raise ValueError("sentence bounds must be strictly increasing")
        if self.tokens and (not b or b[-1] != len(self.tokens)):
            raise ValueError("last sentence bound must equal the token count")
        if not self.tokens and b:
            raise ValueError("empty stream cannot have sentences")

    def __len__(self):
        return len(self.tokens)

    @property
    def n_sentences(self):
        return len(self.sentence_bounds)


@dataclass(frozen=True)
class ProcessedComment:
    comment_id: str
    label: str | None
    tokens: TokenStream
    pos_tags: tuple
    masked: bool = True

    def __post_init__(self):
        if len(self.pos_tags) != len(self.tokens):
            raise ValueError(f"{self.comment_id}: {len(self.pos_tags)} tags for {len(self.tokens)} tokens")

    @property
    def words(self):
        return self.tokens.tokens

    def to_json(self):
        return {"comment_id": self.comment_id, "label": self.label,
                "tokens": list(self.tokens.tokens), "tags": list(self.pos_tags),
                "sentences": self.tokens.n_sentences,
                "bounds": list(self.tokens.sentence_bounds)}

    @classmethod
    def from_json(cls, d):
        toks = tuple(d["tokens"])
        bounds = d.get("bounds")
        if bounds is None:
            # only a sentence count was stored; spread that many bounds evenly
            k = max(1, min(int(d.get("sentences", 1)), len(toks))) if toks else 0
            bounds = sorted({(len(toks) * (i + 1)) // k for i in range(k)}) if k else []
        return cls(str(d["comment_id"]), d.get("label"), TokenStream(toks, tuple(bounds)),
                   tuple(d["tags"]), d.get("masked", True))


def scrub_non_ascii(raw_text: str) -> str:
    """Replace every code point above U+007F with U+FFFD."""
    return "".join(ch if ord(ch) < 128 else REPLACEMENT for ch in raw_text)


def _is_capitalised(tok):
    return tok[:1].isupper()


def tokenize(raw_text: str) -> TokenStream:
    matches = list(_TOKEN_RE.finditer(raw_text))
    tokens = tuple(m.group() for m in matches)
    bounds = []
    for i, m in enumerate(matches):
        if m.group() not in SENTENCE_END:
            continue
        if m.group() == "." and i > 0 and len(tokens[i - 1]) == 1 and tokens[i - 1].isupper():
            continue
        if i + 1 == len(matches):
            bounds.append(i + 1)
        elif raw_text[m.end():matches[i + 1].start()].isspace() and _is_capitalised(tokens[i + 1]):
            bounds.append(i + 1)
    if tokens and (not bounds or bounds[-1] != len(tokens)):
        bounds.append(len(tokens))
    return TokenStream(tokens, tuple(bounds))


def mask_proper_nouns(tokens: TokenStream, tags) -> TokenStream:
    if len(tags) != len(tokens):
        raise DataError(f"{len(tags)} tags for {len(tokens)} tokens")
    masked = tuple(t if t in PROPER_NOUN_TAGS else tok for tok, t in zip(tokens.tokens, tags))
    return TokenStream(masked, tokens.sentence_bounds)


def admit(comment: ProcessedComment, min_tokens: int = 20) -> bool:
    return len(comment.tokens) >= min_tokens


def process(comment_id, raw_text, label=None, tagger=None) -> ProcessedComment:
    """Run the full pipeline on one comment.

    *tagger* is a :class:`~wikinli.pos_tagger.TaggerModel`; the bundled
    bootstrap model is used when omitted.
    """
    from . import pos_tagger

    if tagger is None:
        tagger = pos_tagger.default_model()
    stream = tokenize(scrub_non_ascii(raw_text))
    tags = tuple(pos_tagger.tag(tagger, stream.tokens))
    return ProcessedComment(comment_id, label, mask_proper_nouns(stream, tags), tags, True)
