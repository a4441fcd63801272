"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import Counter
from pathlib import Path

from . import corpus_ingest, harness, pos_tagger, possim, preprocess
from .errors import ConfigError, DataError

log = logging.getLogger("wikinli")

EXIT_CONFIG = 2
EXIT_DATA = 3


def _stats_line(stats):
    return ", ".join(f"{k}={v}" for k, v in sorted(stats.items())) or "none"


def cmd_extract(args):
    patterns = corpus_ingest.load_signature_patterns(args.patterns) if args.patterns else None
    stats = Counter()
    records = []
    for path in args.inputs:
        path = Path(path)
        if not path.exists():
            raise DataError(f"no such input {path}")
        if path.suffix == ".xml":
            pages = corpus_ingest.iter_dump_pages(path, args.namespace)
        else:
            pages = [(path.stem, path.read_text(encoding="utf-8"))]
        for title, text in pages:
            stats["pages"] += 1
            for c in corpus_ingest.extract_signed_comments(text, title, patterns, stats):
                records.append(c.to_json())
    corpus_ingest.write_jsonl(args.out, records)
    log.info("extracted %d comments (%s)", len(records), _stats_line(stats))


def cmd_filter(args):
    profiles = corpus_ingest.read_users(args.users)
    langs = tuple(args.langs.split(",")) if args.langs else corpus_ingest.DEFAULT_POPULAR_LANGS
    stats = Counter()
    labels = corpus_ingest.filter_users(profiles, langs, stats)
    comments = corpus_ingest.label_comments(corpus_ingest.read_comments(args.comments), labels, stats)
    corpus_ingest.write_jsonl(args.out, [c.to_json() for c in comments])
    log.info("%d users, %d comments kept (%s)", len(labels), len(comments), _stats_line(stats))


def cmd_preprocess(args):
    tagger = pos_tagger.TaggerModel.load(args.tagger) if args.tagger else pos_tagger.default_model()
    out, short = [], 0
    for c in corpus_ingest.read_comments(args.input):
        pc = preprocess.process(c.comment_id, c.raw_text, c.label, tagger)
        if preprocess.admit(pc, args.min_tokens):
            out.append(pc.to_json())
        else:
            short += 1
    corpus_ingest.write_jsonl(args.out, out)
    log.info("kept %d comments, %d below %d tokens", len(out), short, args.min_tokens)


def cmd_train_tagger(args):
    if args.corpus:
        corpus = pos_tagger.read_tagged(Path(args.corpus).read_text(encoding="utf-8").splitlines())
    else:
        corpus = pos_tagger.bootstrap_corpus()
    model = pos_tagger.train_tagger(corpus, args.epochs, args.seed)
    model.save(args.out)
    log.info("per-epoch training accuracy: %s", " ".join(f"{a:.4f}" for a in model.epoch_accuracy))


def _read_processed(path):
    return [preprocess.ProcessedComment.from_json(d) for d in corpus_ingest.read_jsonl(path)]


def cmd_run(args):
    overrides = {"seed": args.seed, "min_tokens": args.min_tokens, "cutoff": args.cutoff,
                 "cascade": args.cascade,
                 "fractions": harness.parse_fractions(args.fractions) if args.fractions else None}
    spec = harness.load_spec(args.config, overrides)
    result = harness.run_experiment(spec, _read_processed(args.corpus), args.out_dir)
    print(f"{spec.run_name}: accuracy {result.report.accuracy:.4f} on {int(result.report.confusion.sum())} "
          f"test comments -> {result.run_dir}")


def cmd_possim(args):
    grid = {}
    if args.cutoff:
        grid["cutoffs"] = tuple(args.cutoff.split(";"))
        for c in grid["cutoffs"]:
            possim.Cutoff.parse(c)
    if args.cascade:
        grid["cascades"] = tuple(args.cascade.split(","))
        bad = [c for c in grid["cascades"] if c not in {m.value for m in possim.Cascade}]
        if bad:
            raise ConfigError(f"unknown cascade mode(s) {bad}")
    if args.min_pos_ngrams < 0:
        raise ConfigError("--min-pos-ngrams must be non-negative")
    corpus = [c for c in _read_processed(args.corpus) if c.label is not None]
    splits = corpus_ingest.balance_and_split(corpus, args.seed, balance=False)
    tables = harness.possim_study(splits.train, splits.test, seed=args.seed, default_class=args.default_class,
                                  min_pos_ngrams=args.min_pos_ngrams, **grid)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in tables.items():
        (out / name).write_text(text, encoding="utf-8", newline="\n")
    print(f"wrote {len(tables)} tables to {out}")


def cmd_report(args):
    run_dir = Path(args.run_dir)
    metrics = run_dir / "metrics.json"
    if not metrics.exists():
        raise DataError(f"{metrics} not found")
    report = harness.report_from_dict(json.loads(metrics.read_text(encoding="utf-8")))
    curve_path = run_dir / "curve.csv"
    rows = harness.read_curve_csv(curve_path.read_text(encoding="utf-8")) if curve_path.exists() else []
    paths = harness.emit_reports(report, rows, Path(args.out_dir) if args.out_dir else run_dir)
    print(report.confusion_csv(), end="")
    print(f"accuracy {report.accuracy:.4f}; wrote {', '.join(str(p) for p in paths.values())}")


def build_parser():
    p = argparse.ArgumentParser(prog="wikinli", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("extract", help="signed comments from talk pages (XML dump or .wiki files)")
    s.add_argument("inputs", nargs="+")
    s.add_argument("--out", required=True)
    s.add_argument("--patterns", help="signature pattern JSON replacing the bundled list")
    s.add_argument("--namespace", default="1")
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("filter", help="label comments by the author's single native language")
    s.add_argument("--users", required=True)
    s.add_argument("--comments", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--langs", help="comma-separated picked languages (default: the 19 bundled languages)")
    s.set_defaults(func=cmd_filter)

    s = sub.add_parser("preprocess", help="scrub, tokenize, tag and mask comments")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--tagger")
    s.add_argument("--min-tokens", type=int, default=20)
    s.set_defaults(func=cmd_preprocess)

    s = sub.add_parser("train-tagger", help="train the averaged-perceptron tagger")
    s.add_argument("--corpus", help="token/TAG corpus (default: bundled bootstrap corpus)")
    s.add_argument("--out", required=True)
    s.add_argument("--epochs", type=int, default=8)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_train_tagger)

    s = sub.add_parser("run", help="run one experiment from an INI config")
    s.add_argument("--config", required=True)
    s.add_argument("--corpus", required=True)
    s.add_argument("--out-dir", default="runs")
    s.add_argument("--seed", type=int)
    s.add_argument("--min-tokens", type=int)
    s.add_argument("--fractions")
    s.add_argument("--cutoff")
    s.add_argument("--cascade", choices=[c.value for c in possim.Cascade])
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("possim", help="PoS-similarity result tables")
    s.add_argument("--corpus", required=True)
    s.add_argument("--out-dir", default="possim")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--min-pos-ngrams", type=int, default=100)
    s.add_argument("--cutoff", help="';'-separated cutoffs, e.g. 'none;top:500;appears:15'")
    s.add_argument("--cascade", help="comma-separated cascade modes")
    s.add_argument("--default-class", default=corpus_ingest.ENGLISH_US)
    s.set_defaults(func=cmd_possim)

    s = sub.add_parser("report", help="re-emit reports of a finished run")
    s.add_argument("--run-dir", required=True)
    s.add_argument("--out-dir")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError, ValueError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
