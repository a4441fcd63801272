"""Experiment orchestration: class maps, runs, reports and plots."""

from __future__ import annotations

import configparser
import contextlib
import csv
import enum
import io
import json
import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import classifier, corpus_ingest, features, possim
from .classifier import EvalReport, Hyper
from .errors import ConfigError, DataError, StageError

logger = logging.getLogger(__name__)

DEFAULT_FRACTIONS = tuple(round(0.1 * i, 1) for i in range(1, 11))

POPULAR_SIX = ("en-us", "de", "es", "fr", "ru", "nl")

FAMILIES = {
    "north-germanic": ("de", "nl", "no", "sv", "da"),
    "roman": ("es", "fr", "pt", "it"),
    "uralic": ("ru", "pl", "fi", "hu"),
    "asian": ("zh", "ja", "ko"),
    "english": ("en-us",),
}
FAMILY_OF = {lang: fam for fam, langs in FAMILIES.items() for lang in langs}

ALL_LANGS = (corpus_ingest.ENGLISH_US,) + tuple(corpus_ingest.DEFAULT_POPULAR_LANGS)


def family_of(language):
    """Family label for a language code or English language name."""
    key = language.lower()
    if key not in FAMILY_OF:
        by_name = {v.lower(): k for k, v in corpus_ingest.LANGUAGE_NAMES.items()}
        by_name.update({"chinese": "zh", "english": "en-us"})
        key = by_name.get(key, key)
    if key not in FAMILY_OF:
        raise KeyError(language)
    return FAMILY_OF[key]


def preset_class_map(name):
    if name == "popular6":
        return {l: l for l in POPULAR_SIX}
    if name == "families":
        return dict(FAMILY_OF)
    if name == "native":
        return {l: ("native" if l == corpus_ingest.ENGLISH_US else "non-native") for l in ALL_LANGS}
    if name == "identity":
        return {l: l for l in ALL_LANGS}
    raise ConfigError(f"unknown class map preset {name!r}")


class Mode(enum.Enum):
    LOGREG = "logreg"
    POSSIM = "possim"


@dataclass
class ExperimentSpec:
    name: str
    class_map: dict
    fractions: tuple = DEFAULT_FRACTIONS
    seed: int = 0
    mode: Mode = Mode.LOGREG
    hyper: Hyper = Hyper()
    min_tokens: int = 20
    possim_cfg: possim.PosSimConfig = possim.PosSimConfig()

    def __post_init__(self):
        if not self.name:
            raise ConfigError("experiment needs a name")
        if not self.class_map:
            raise ConfigError("class map is empty")
        if not self.fractions:
            raise ConfigError("fractions must be non-empty")
        fr = [float(f) for f in self.fractions]
        if any(not 0 < f <= 1 for f in fr) or any(a >= b for a, b in zip(fr, fr[1:])):
            raise ConfigError(f"fractions must be increasing values in (0, 1]: {fr}")
        self.fractions = tuple(fr)

    @property
    def class_labels(self):
        return sorted(set(self.class_map.values()))

    @property
    def run_name(self):
        return f"{self.name}-seed{self.seed}"


def parse_fractions(text):
    try:
        return tuple(float(x) for x in text.replace(" ", "").split(",") if x)
    except ValueError:
        raise ConfigError(f"bad fractions {text!r}") from None


def load_spec(path, overrides=None) -> ExperimentSpec:
    """Read an INI experiment file.

    ``[experiment]`` holds name, mode, class_map (a preset or ``custom``),
    seed, fractions and min_tokens; ``[class_map]`` lists ``lang = class``
    pairs for custom maps; ``[classifier]`` and ``[possim]`` hold
    hyperparameters.  *overrides* (from the command line) win.
    """
    cp = configparser.ConfigParser()
    try:
        if not cp.read(path, encoding="utf-8"):
            raise ConfigError(f"cannot read config {path}")
    except configparser.Error as e:
        raise ConfigError(str(e)) from None
    if not cp.has_section("experiment"):
        raise ConfigError("config lacks an [experiment] section")
    exp = cp["experiment"]
    o = {k: v for k, v in (overrides or {}).items() if v is not None}
    try:
        preset = exp.get("class_map", "identity")
        if preset == "custom":
            if not cp.has_section("class_map"):
                raise ConfigError("class_map = custom needs a [class_map] section")
            cmap = dict(cp["class_map"])
        else:
            cmap = preset_class_map(preset)
        clf = cp["classifier"] if cp.has_section("classifier") else {}
        hyper = Hyper(float(clf.get("lr", 1.0)), float(clf.get("l2", 1e-4)),
                      int(clf.get("max_epochs", 500)), float(clf.get("tol", 1e-6)))
        ps = cp["possim"] if cp.has_section("possim") else {}
        pcfg = possim.PosSimConfig(
            order=int(ps.get("order", 4)),
            min_pos_ngrams=int(ps.get("min_pos_ngrams", 100)),
            cutoff=possim.Cutoff.parse(o.get("cutoff", ps.get("cutoff", "none"))),
            cascade=possim.Cascade(o.get("cascade", ps.get("cascade", "off"))),
            default_class=ps.get("default_class", possim.DEFAULT_CLASS),
        )
        fractions = o.get("fractions") or parse_fractions(exp.get("fractions", "")) or DEFAULT_FRACTIONS
        return ExperimentSpec(
            name=exp.get("name", Path(path).stem),
            class_map=cmap,
            fractions=fractions,
            seed=int(o.get("seed", exp.get("seed", 0))),
            mode=Mode(exp.get("mode", "logreg")),
            hyper=hyper,
            min_tokens=int(o.get("min_tokens", exp.get("min_tokens", 20))),
            possim_cfg=pcfg,
        )
    except (ValueError, KeyError) as e:
        raise ConfigError(f"{path}: {e}") from None


# --------------------------------------------------------------------------

@contextlib.contextmanager
def stage(name):
    try:
        yield
    except StageError:
        raise
    except (DataError, ValueError) as e:
        raise StageError(name, e) from e


def apply_class_map(corpus, class_map, stats=None):
    out = []
    for c in corpus:
        target = class_map.get(c.label)
        if target is None:
            if stats is not None:
                stats["unmapped"] += 1
            continue
        out.append(replace(c, label=target))
    return out


@dataclass
class RunResult:
    run_dir: Path
    report: EvalReport
    curve: list
    manifest: corpus_ingest.CorpusManifest
    schema: tuple = ()
    possim_report: possim.PosSimReport | None = None
    stats: dict = field(default_factory=dict)


def _write(path, text):
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def run_experiment(spec: ExperimentSpec, corpus, out_dir, stopwords=None) -> RunResult:
    """Run one experiment on processed comments labeled with native languages.

    Everything derived from data (distributions, standardization, weights)
    is built from the training split alone.
    """
    stats = Counter()
    with stage("admit"):
        admitted = [c for c in corpus if len(c.tokens) >= spec.min_tokens]
        stats["short_comments"] = len(corpus) - len(admitted)
    with stage("class_map"):
        labeled = apply_class_map(admitted, spec.class_map, stats)
    with stage("split"):
        splits = corpus_ingest.balance_and_split(labeled, spec.seed, spec.class_labels,
                                                 balance=spec.mode is Mode.LOGREG)
    run_dir = Path(out_dir) / spec.run_name
    run_dir.mkdir(parents=True, exist_ok=True)
    if spec.mode is Mode.POSSIM:
        return _run_possim(spec, splits, run_dir, stats)

    stopwords = stopwords if stopwords is not None else features.load_stopwords()
    labels = splits.manifest.class_labels

    def vectorizer(train_part):
        dists = features.build_class_dists(train_part, labels)
        return features.Featurizer(dists, stopwords, labels)

    with stage("freqdist"):
        featurizer = vectorizer(splits.train)
    with stage("featurize"):
        train, dev, test = ([(featurizer(c), c.label, c.comment_id) for c in part] for part in splits)
    with stage("train"):
        model = classifier.fit(train, dev, spec.hyper, spec.seed, labels)
    with stage("evaluate"):
        report = classifier.evaluate(model, test)
    with stage("learning_curve"):
        curve = classifier.learning_curve(splits.train, splits.dev, splits.test, spec.fractions,
                                          spec.seed, spec.hyper, vectorize=vectorizer, class_labels=labels)

    manifest = splits.manifest
    manifest.extra = {
        "experiment": spec.name,
        "mode": spec.mode.value,
        "feature_dim": len(featurizer.schema),
        "feature_schema": list(featurizer.schema),
        "class_map": dict(sorted(spec.class_map.items())),
        "stats": dict(sorted(stats.items())),
    }
    _write(run_dir / "manifest.json", manifest.to_json())
    model.save(run_dir / "model.json")
    emit_reports(report, curve, run_dir)
    return RunResult(run_dir, report, curve, manifest, featurizer.schema, None, dict(stats))


def _run_possim(spec, splits, run_dir, stats):
    cfg = spec.possim_cfg
    labels = splits.manifest.class_labels
    with stage("freqdist"):
        families = {lab: {n: features.build_freqdist([c for c in splits.train if c.label == lab],
                                                     features.Level.POS, n, lab)
                          for n in features.ORDERS}
                    for lab in labels}
        dists = possim.apply_cutoff({lab: families[lab][cfg.order] for lab in labels}, cfg.cutoff)
    with stage("evaluate"):
        train_labels = [c.label for c in splits.train]
        rep = possim.evaluate_possim(splits.test, dists, cfg, families, spec.seed, train_labels, labels)
        if rep.available == 0:
            raise DataError("no test comment passes the PoS n-gram length gate")
        report = EvalReport.from_pairs(tuple(labels), rep.truth, rep.predicted)
        tricky, ratio = possim.tricky_filter(splits.test, dists, cfg.order)
        tricky_rep = possim.evaluate_possim(tricky, dists, cfg, families, spec.seed, train_labels, labels)
    manifest = splits.manifest
    manifest.extra = {"experiment": spec.name, "mode": spec.mode.value,
                      "possim": {"order": cfg.order, "min_pos_ngrams": cfg.min_pos_ngrams,
                                 "cutoff": str(cfg.cutoff), "cascade": cfg.cascade.value,
                                 "default_class": cfg.default_class},
                      "class_map": dict(sorted(spec.class_map.items())),
                      "stats": dict(sorted(stats.items()))}
    _write(run_dir / "manifest.json", manifest.to_json())
    emit_reports(report, [], run_dir)
    _write(run_dir / "possim_summary.csv", possim.order_table([rep]))
    _write(run_dir / "possim_classes.csv", possim.class_table(rep, corpus_ingest.LANGUAGE_NAMES))
    _write(run_dir / "possim_tricky_classes.csv", possim.class_table(tricky_rep, corpus_ingest.LANGUAGE_NAMES))
    _write(run_dir / "possim_tricky.json", json.dumps(
        {"discard_ratio": ratio, "retained": len(tricky), "accuracy": tricky_rep.overall_acc},
        sort_keys=True, indent=1) + "\n")
    return RunResult(run_dir, report, [], manifest, (), rep, dict(stats))


def possim_study(train, test, seed=0, orders=(4, 3, 2, 1), thresholds=(50, 100, 150, 200),
                 cutoffs=("none", "top:100", "top:500", "top:2000", "top:5000",
                          "appears:10", "appears:15", "appears:20"),
                 cascades=("off", "tribi", "biuni", "both"), default_class=possim.DEFAULT_CLASS,
                 min_pos_ngrams=100):
    """The full grid of PoS-similarity tables as ``{filename: csv text}``."""
    labels = sorted({c.label for c in train})
    families = {lab: {n: features.build_freqdist([c for c in train if c.label == lab], features.Level.POS, n, lab)
                      for n in features.ORDERS} for lab in labels}
    train_labels = [c.label for c in train]

    def run(cfg):
        dists = possim.apply_cutoff({lab: families[lab][cfg.order] for lab in labels}, cfg.cutoff)
        return possim.evaluate_possim(test, dists, cfg, families, seed, train_labels, labels), dists

    base = possim.PosSimConfig(min_pos_ngrams=min_pos_ngrams, default_class=default_class)
    tables = {}
    by_order = [run(replace(base, order=n))[0] for n in orders]
    tables["table_orders.csv"] = possim.order_table(by_order)
    by_len = [run(replace(base, min_pos_ngrams=t))[0] for t in thresholds]
    tables["table_length_overall.csv"], tables["table_length_nonzero.csv"] = possim.length_tables(by_len)
    tables["table_cutoffs.csv"] = possim.cutoff_table(
        [run(replace(base, cutoff=possim.Cutoff.parse(c)))[0] for c in cutoffs])
    tables["table_cascade.csv"] = possim.cascade_table(
        [run(replace(base, cascade=possim.Cascade(c)))[0] for c in cascades])
    _, dists = run(base)
    tricky, ratio = possim.tricky_filter(test, dists, base.order)
    tricky_rep = possim.evaluate_possim(tricky, dists, base, families, seed, train_labels, labels)
    tables["table_tricky_classes.csv"] = possim.class_table(tricky_rep, corpus_ingest.LANGUAGE_NAMES)
    tables["tricky.json"] = json.dumps({"discard_ratio": ratio, "retained": len(tricky),
                                        "accuracy": tricky_rep.overall_acc}, sort_keys=True, indent=1) + "\n"
    return tables


# --------------------------------------------------------------------------
# Reports

def curve_csv(rows):
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["fraction", "n_train", "train_acc", "dev_acc", "test_acc"])
    for r in rows:
        w.writerow([f"{r.fraction:g}", r.n_train, f"{r.train_acc:.6f}",
                    "" if r.dev_acc is None else f"{r.dev_acc:.6f}", f"{r.test_acc:.6f}"])
    return out.getvalue()


def read_curve_csv(text):
    rows = []
    for d in csv.DictReader(io.StringIO(text)):
        rows.append(classifier.CurveRow(float(d["fraction"]), int(d["n_train"]), float(d["train_acc"]),
                                        float(d["dev_acc"]) if d["dev_acc"] else None, float(d["test_acc"])))
    return rows


_SERIES = (("train", "train_acc", "#1f77b4"), ("dev", "dev_acc", "#2ca02c"), ("test", "test_acc", "#d62728"))


def curve_svg(rows, title="learning curve"):
    """Self-contained SVG: training fraction on x, accuracy on y."""
    W, H, L, R, T, B = 480, 320, 56, 20, 30, 44
    pw, ph = W - L - R, H - T - B

    def x(f):
        return L + pw * f

    def y(a):
        return T + ph * (1 - a)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
             f'<rect width="{W}" height="{H}" fill="white"/>',
             f'<text x="{W / 2:.1f}" y="18" text-anchor="middle" font-size="13" font-family="sans-serif">{title}</text>',
             f'<line x1="{L}" y1="{T + ph}" x2="{L + pw}" y2="{T + ph}" stroke="black"/>',
             f'<line x1="{L}" y1="{T}" x2="{L}" y2="{T + ph}" stroke="black"/>']
    for i in range(6):
        v = i / 5
        parts.append(f'<text x="{x(v):.1f}" y="{T + ph + 16}" text-anchor="middle" font-size="10" '
                     f'font-family="sans-serif">{v:.1f}</text>')
        parts.append(f'<text x="{L - 6}" y="{y(v) + 3:.1f}" text-anchor="end" font-size="10" '
                     f'font-family="sans-serif">{v:.1f}</text>')
    parts.append(f'<text x="{L + pw / 2:.1f}" y="{H - 8}" text-anchor="middle" font-size="11" '
                 f'font-family="sans-serif">training fraction</text>')
    parts.append(f'<text x="14" y="{T + ph / 2:.1f}" text-anchor="middle" font-size="11" font-family="sans-serif" '
                 f'transform="rotate(-90 14 {T + ph / 2:.1f})">accuracy</text>')
    for k, (name, attr, color) in enumerate(_SERIES):
        pts = [(r.fraction, getattr(r, attr)) for r in rows if getattr(r, attr) is not None]
        if not pts:
            continue
        if len(pts) > 1:
            coords = " ".join(f"{x(f):.2f},{y(a):.2f}" for f, a in pts)
            parts.append(f'<polyline class="series {name}" fill="none" stroke="{color}" points="{coords}"/>')
        for f, a in pts:
            parts.append(f'<circle class="marker {name}" cx="{x(f):.2f}" cy="{y(a):.2f}" r="3" fill="{color}"/>')
        ly = T + 12 + 14 * k
        parts.append(f'<rect x="{L + pw - 60}" y="{ly - 8}" width="10" height="10" fill="{color}"/>')
        parts.append(f'<text x="{L + pw - 46}" y="{ly + 1}" font-size="10" font-family="sans-serif">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_reports(report: EvalReport, curve_rows, out_dir):
    """Write confusion.csv, metrics.json, curve.csv and curve.svg."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "confusion": out_dir / "confusion.csv",
        "metrics": out_dir / "metrics.json",
        "curve_csv": out_dir / "curve.csv",
        "curve_svg": out_dir / "curve.svg",
    }
    _write(paths["confusion"], report.confusion_csv())
    _write(paths["metrics"], report.to_json())
    _write(paths["curve_csv"], curve_csv(curve_rows))
    _write(paths["curve_svg"], curve_svg(curve_rows))
    return paths


def report_from_dict(d):
    cm = np.array(d["confusion"], dtype=np.int64)
    return EvalReport(tuple(d["class_labels"]), cm, d["accuracy"], d["per_class"])
