"""Language-skill metadata, signed talk-page comments and corpus filtering.

Users declare language skills through Babel categories such as ``User de-N``
or ``User fr-3``.  Talk pages carry comments terminated by a signature that
links back to the author.  This module turns both into :class:`UserProfile`
and :class:`Comment` records, filters users down to single-native-language
authors, and produces balanced, seeded train/dev/test splits.
"""

from __future__ import annotations

import enum
import json
import logging
import random
import re
import xml.etree.ElementTree as ET
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DataError

logger = logging.getLogger(__name__)


class Level(enum.Enum):
    NATIVE = "N"
    L1 = "1"
    L2 = "2"
    L3 = "3"
    L4 = "4"
    L5 = "5"


@dataclass(frozen=True)
class LanguageSkill:
    lang_code: str
    level: Level

    def __post_init__(self):
        code = self.lang_code
        if not code or not code.isascii() or code != code.lower():
            raise ValueError(f"language code must be non-empty lowercase ASCII: {code!r}")
        if not isinstance(self.level, Level):
            raise ValueError(f"bad level {self.level!r}")


@dataclass(frozen=True)
class UserProfile:
    user_id: str
    skills: frozenset = frozenset()
    malformed: int = 0
    duplicates: int = 0

    def __post_init__(self):
        if not self.user_id:
            raise ValueError("user_id must be non-empty")
        codes = [s.lang_code for s in self.skills]
        if len(codes) != len(set(codes)):
            raise ValueError(f"duplicate language codes for {self.user_id}")

    def level_of(self, code):
        for s in self.skills:
            if s.lang_code == code:
                return s.level
        return None

    def natives(self):
        return sorted(s.lang_code for s in self.skills if s.level is Level.NATIVE)


@dataclass(frozen=True)
class Comment:
    comment_id: str
    user_id: str
    page: str
    raw_text: str
    label: str | None = None

    def __post_init__(self):
        if not self.raw_text:
            raise ValueError(f"comment {self.comment_id} has empty text")

    def to_json(self):
        d = {"comment_id": self.comment_id, "user_id": self.user_id,
             "page": self.page, "text": self.raw_text}
        if self.label is not None:
            d["label"] = self.label
        return d

    @classmethod
    def from_json(cls, d):
        return cls(str(d["comment_id"]), str(d["user_id"]), str(d.get("page", "")),
                   d["text"], d.get("label"))


# --------------------------------------------------------------------------
# Babel categories

_BABEL_RE = re.compile(r"^\s*(?:Category:)?\s*User[ _]+([A-Za-z0-9-]+)\s*$")
_LEVELS = {"N": Level.NATIVE, "n": Level.NATIVE, "1": Level.L1, "2": Level.L2,
           "3": Level.L3, "4": Level.L4, "5": Level.L5}


def _parse_babel_one(s):
    m = _BABEL_RE.match(s)
    if not m:
        return None
    parts = m.group(1).split("-")
    level = Level.NATIVE
    if len(parts) > 1 and parts[-1] in _LEVELS:
        level = _LEVELS[parts.pop()]
    if not re.fullmatch(r"[A-Za-z]{2,3}", parts[0]):
        return None
    if any(not re.fullmatch(r"[A-Za-z0-9]{2,8}", p) for p in parts[1:]):
        return None
    return LanguageSkill("-".join(parts).lower(), level)


def parse_babel(category_strings: Iterable[str], user_id: str = "anonymous") -> UserProfile:
    """Build a profile from Babel category strings.

    A missing level or level ``N`` means native.  Malformed strings are
    skipped and counted in ``malformed``; a repeated language keeps the last
    claim and increments ``duplicates``.
    """
    skills = {}
    malformed = duplicates = 0
    for s in category_strings:
        skill = _parse_babel_one(s)
        if skill is None:
            malformed += 1
            continue
        if skill.lang_code in skills:
            duplicates += 1
        skills[skill.lang_code] = skill
    if malformed:
        logger.debug("%s: %d malformed babel strings", user_id, malformed)
    return UserProfile(user_id, frozenset(skills.values()), malformed, duplicates)


# --------------------------------------------------------------------------
# Signed comments

@dataclass(frozen=True)
class SignaturePattern:
    name: str
    regex: re.Pattern


def load_signature_patterns(path=None):
    if path is None:
        text = resources.files("wikinli").joinpath("data/signature_patterns.json").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    spec = json.loads(text)
    ts = spec["timestamp"]
    return [SignaturePattern(p["name"], re.compile(p["regex"].replace("{timestamp}", ts)))
            for p in spec["patterns"]]


_DEFAULT_PATTERNS = None


def _default_patterns():
    global _DEFAULT_PATTERNS
    if _DEFAULT_PATTERNS is None:
        _DEFAULT_PATTERNS = load_signature_patterns()
    return _DEFAULT_PATTERNS


def find_signatures(wikitext, patterns=None):
    """Yield ``(match, pattern)`` for non-overlapping signatures, earliest first.

    At each position the match starting earliest wins; equal starts go to the
    pattern listed first.
    """
    patterns = patterns or _default_patterns()
    pos = 0
    while pos < len(wikitext):
        best = None
        for pat in patterns:
            m = pat.regex.search(wikitext, pos)
            if m and (best is None or m.start() < best[0].start()):
                best = (m, pat)
        if best is None:
            return
        yield best
        pos = max(best[0].end(), best[0].start() + 1)


_HEADING_RE = re.compile(r"^\s*=+[^\n]*=+\s*$", re.M)
_INDENT_RE = re.compile(r"^[ \t]*[:*#]+", re.M)
_HTML_COMMENT_RE = re.compile(r"<!--.*?-->", re.S)
_TAG_RE = re.compile(r"</?[A-Za-z][^>]*>")
_TEMPLATE_RE = re.compile(r"\{\{[^{}]*\}\}")
_WIKILINK_RE = re.compile(r"\[\[(?:[^|\]]*\|)?([^\]]*)\]\]")
_EXTLINK_RE = re.compile(r"\[(?:https?:)?//\S+(?: ([^\]]*))?\]")
_QUOTES_RE = re.compile(r"'{2,}")


def clean_wikitext(text):
    """Strip the markup that matters for style counts; keep the prose."""
    text = _HTML_COMMENT_RE.sub(" ", text)
    text = _HEADING_RE.sub(" ", text)
    text = _INDENT_RE.sub(" ", text)
    prev = None
    while prev != text:
        prev, text = text, _TEMPLATE_RE.sub(" ", text)
    text = _WIKILINK_RE.sub(r"\1", text)
    text = _EXTLINK_RE.sub(lambda m: m.group(1) or " ", text)
    text = _TAG_RE.sub(" ", text)
    text = _QUOTES_RE.sub("", text)
    text = text.replace("--", " ").replace("&nbsp;", " ")
    return " ".join(text.split())


def normalize_username(name):
    name = " ".join(name.replace("_", " ").split())
    return name[:1].upper() + name[1:]


def extract_signed_comments(wikitext: str, page: str, patterns=None,
                            stats: Counter | None = None) -> list[Comment]:
    """Split a talk-page body into comments, one per detected signature.

    The text between the end of the previous signature and the start of the
    next one becomes the comment.  Text after the last signature is dropped
    (counted as ``dropped_trailing`` in *stats*); segments that clean to
    nothing are counted as ``empty_segments``.
    """
    stats = stats if stats is not None else Counter()
    comments = []
    prev_end = 0
    for m, pat in find_signatures(wikitext, patterns):
        body = clean_wikitext(wikitext[prev_end:m.start()])
        prev_end = m.end()
        stats["signatures"] += 1
        stats[f"pattern:{pat.name}"] += 1
        if not body:
            stats["empty_segments"] += 1
            continue
        user = normalize_username(m.group("user"))
        comments.append(Comment(f"{page}#{len(comments)}", user, page, body))
    if clean_wikitext(wikitext[prev_end:]):
        stats["dropped_trailing"] += 1
    return comments


def iter_dump_pages(path, namespace="1"):
    """Yield ``(title, text)`` for pages in a MediaWiki XML export."""
    for _, elem in ET.iterparse(str(path), events=("end",)):
        if elem.tag.rsplit("}", 1)[-1] != "page":
            continue
        ns = title = text = None
        for child in elem.iter():
            tag = child.tag.rsplit("}", 1)[-1]
            if tag == "ns":
                ns = (child.text or "").strip()
            elif tag == "title":
                title = child.text or ""
            elif tag == "text":
                text = child.text or ""
        if (namespace is None or ns == namespace) and title is not None:
            yield title, text or ""
        elem.clear()


# --------------------------------------------------------------------------
# User filtering

# Non-English native languages of the 20-class setup, as Babel codes.
DEFAULT_POPULAR_LANGS = (
    "de", "ja", "pl", "zh", "tr", "fi", "yue", "ar", "da", "hu",
    "es", "pt", "fr", "nl", "ko", "it", "sv", "no", "ru",
)
ENGLISH_US = "en-us"

LANGUAGE_NAMES = {
    "de": "German", "ja": "Japanese", "pl": "Polish", "zh": "Mandarin",
    "tr": "Turkish", "fi": "Finnish", "yue": "Cantonese", "ar": "Arabic",
    "da": "Danish", "hu": "Hungarian", "es": "Spanish", "pt": "Portuguese",
    "fr": "French", "nl": "Dutch", "ko": "Korean", "it": "Italian",
    "sv": "Swedish", "no": "Norwegian", "ru": "Russian", "en-us": "US English",
}

CODE_ALIASES = {"zh-yue": "yue", "cmn": "zh", "zh-cn": "zh", "zh-hans": "zh",
                "nb": "no", "nn": "no", "pt-br": "pt", "pt-pt": "pt"}


def _canonical(code, popular):
    if code in popular:
        return code
    if code in CODE_ALIASES and CODE_ALIASES[code] in popular:
        return CODE_ALIASES[code]
    primary = code.split("-")[0]
    if primary != "en" and primary in popular:
        return primary
    return None


def filter_users(profiles: Iterable[UserProfile],
                 popular_langs: Sequence[str] = DEFAULT_POPULAR_LANGS,
                 stats: Counter | None = None) -> list[tuple[str, str]]:
    """Label each user with a single native language, or drop them.

    * English natives are kept only if ``en-us`` is their sole native claim.
    * Other users keep the one picked language they are native in; users
      native in two or more picked languages are removed.
    """
    if len(popular_langs) != 19:
        logger.warning("expected 19 popular languages, got %d", len(popular_langs))
    popular = set(popular_langs)
    stats = stats if stats is not None else Counter()
    out = []
    for p in profiles:
        natives = p.natives()
        if not natives:
            stats["no_native"] += 1
            continue
        if any(c == "en" or c.startswith("en-") for c in natives):
            if natives == [ENGLISH_US]:
                out.append((p.user_id, ENGLISH_US))
            else:
                stats["english_not_us_only"] += 1
            continue
        picked = sorted({c for c in map(lambda c: _canonical(c, popular), natives) if c})
        if not picked:
            stats["not_popular"] += 1
        elif len(picked) > 1:
            stats["multi_native"] += 1
        else:
            out.append((p.user_id, picked[0]))
    return out


def label_comments(comments, user_labels, stats=None):
    """Attach class labels to comments of labeled users; drop the rest."""
    labels = dict(user_labels)
    out = []
    for c in comments:
        lab = labels.get(c.user_id)
        if lab is None:
            if stats is not None:
                stats["unlabeled_comments"] += 1
            continue
        out.append(replace(c, label=lab))
    return out


# --------------------------------------------------------------------------
# Balancing and splitting

SPLIT_FRACTIONS = (Fraction(7, 10), Fraction(1, 10), Fraction(2, 10))
SPLIT_NAMES = ("train", "dev", "test")


@dataclass
class CorpusManifest:
    class_labels: list
    counts: dict
    seed: int
    split_fractions: tuple = SPLIT_FRACTIONS
    assignments: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if sorted(self.counts) != sorted(self.class_labels):
            raise ValueError("manifest counts must cover exactly the class labels")
        if sum(self.split_fractions) != 1:
            raise ValueError("split fractions must sum to 1")

    def to_dict(self):
        d = {
            "class_labels": list(self.class_labels),
            "counts": {k: self.counts[k] for k in self.class_labels},
            "seed": self.seed,
            "split_fractions": [str(f) for f in self.split_fractions],
            "splits": [{"comment_id": cid, "split": s} for cid, s in self.assignments],
            "flags": list(self.flags),
        }
        d.update(self.extra)
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True, ensure_ascii=False) + "\n"


@dataclass
class Splits:
    train: list
    dev: list
    test: list
    manifest: CorpusManifest

    def __iter__(self):
        return iter((self.train, self.dev, self.test))


def _split_sizes(n, fractions):
    dev = int(n * fractions[1])
    test = int(n * fractions[2])
    return n - dev - test, dev, test


def balance_and_split(comments, seed: int, class_labels=None, balance=True,
                      fractions=SPLIT_FRACTIONS) -> Splits:
    """Balance classes by seeded subsampling, then split each class 70/10/20.

    Split sizes are floored for dev and test; the remainder goes to train.
    *comments* may be any objects with ``comment_id`` and ``label``.
    With ``balance=False`` every class keeps all of its comments.
    """
    by_class = defaultdict(list)
    for c in comments:
        if c.label is None:
            raise DataError(f"comment {c.comment_id} has no label")
        by_class[c.label].append(c)
    labels = sorted(class_labels) if class_labels is not None else sorted(by_class)
    for lab in labels:
        if not by_class.get(lab):
            raise DataError(f"class {lab!r} has no comments")
    extra_labels = set(by_class) - set(labels)
    if extra_labels:
        raise DataError(f"comments carry labels outside the class set: {sorted(extra_labels)}")
    ids = [c.comment_id for c in comments]
    if len(ids) != len(set(ids)):
        raise DataError("duplicate comment ids")

    rng = random.Random(seed)
    target = min(len(by_class[lab]) for lab in labels)
    train, dev, test, assignments = [], [], [], []
    counts = {}
    for lab in labels:
        items = sorted(by_class[lab], key=lambda c: c.comment_id)
        if balance and len(items) > target:
            items = rng.sample(items, target)
        rng.shuffle(items)
        n_train, n_dev, _ = _split_sizes(len(items), fractions)
        parts = (items[:n_train], items[n_train:n_train + n_dev], items[n_train + n_dev:])
        for name, part, dest in zip(SPLIT_NAMES, parts, (train, dev, test)):
            dest.extend(part)
            assignments.extend((c.comment_id, name) for c in part)
        counts[lab] = len(items)
    flags = []
    if len(labels) == 1:
        logger.warning("single class %r: a classifier trained on this is degenerate", labels[0])
        flags.append("single_class")
    manifest = CorpusManifest(labels, counts, seed, tuple(fractions), assignments, flags)
    return Splits(train, dev, test, manifest)


# --------------------------------------------------------------------------
# JSONL IO

def read_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                try:
                    yield json.loads(line)
                except json.JSONDecodeError as e:
                    raise DataError(f"{path}:{lineno}: {e}") from None


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n")


def read_comments(path):
    return [Comment.from_json(d) for d in read_jsonl(path)]


def read_users(path):
    return [parse_babel(d.get("babel", []), str(d["user_id"])) for d in read_jsonl(path)]
