import csv
import io
import json
from dataclasses import replace

import pytest

from wikinli import possim
from wikinli.classifier import CurveRow, EvalReport, Hyper
from wikinli.errors import ConfigError, DataError, StageError
from wikinli.harness import (
    FAMILIES,
    POPULAR_SIX,
    ExperimentSpec,
    Mode,
    apply_class_map,
    curve_svg,
    emit_reports,
    family_of,
    load_spec,
    possim_study,
    preset_class_map,
    read_curve_csv,
    curve_csv,
    run_experiment,
)
from wikinli.synthetic import generate_corpus

FAST = Hyper(max_epochs=200)


class TestClassMaps:
    def test_family_membership(self):
        assert family_of("Swedish") == "north-germanic"
        assert family_of("Hungarian") == "uralic"
        assert family_of("ko") == "asian"
        assert family_of("Portuguese") == "roman"
        assert family_of("en-us") == "english"
        with pytest.raises(KeyError):
            family_of("Klingon")

    def test_families_cover_seventeen_languages(self):
        langs = [l for v in FAMILIES.values() for l in v]
        assert len(langs) == len(set(langs)) == 17

    def test_presets(self):
        assert sorted(preset_class_map("popular6")) == sorted(POPULAR_SIX)
        native = preset_class_map("native")
        assert native["en-us"] == "native" and native["de"] == "non-native"
        assert len(native) == 20
        with pytest.raises(ConfigError):
            preset_class_map("bogus")

    def test_apply_class_map_drops_unmapped(self):
        corpus = generate_corpus(["de", "xx"], 2, seed=0)
        stats = {"unmapped": 0}
        out = apply_class_map(corpus, {"de": "non-native"}, stats)
        assert [c.label for c in out] == ["non-native"] * 2
        assert stats["unmapped"] == 2


class TestSpec:
    def write(self, tmp_path, text):
        p = tmp_path / "exp.ini"
        p.write_text(text)
        return p

    def test_load(self, tmp_path):
        p = self.write(tmp_path, "[experiment]\nname = x\nclass_map = families\nseed = 3\nfractions = 0.2, 1.0\n"
                                 "[possim]\ncutoff = top:50\ncascade = tribi\n")
        spec = load_spec(p)
        assert spec.run_name == "x-seed3"
        assert spec.fractions == (0.2, 1.0)
        assert spec.class_labels == sorted(FAMILIES)
        assert spec.possim_cfg.cutoff == possim.Cutoff("top", 50)
        assert spec.possim_cfg.cascade is possim.Cascade.TRIBI

    def test_overrides_win(self, tmp_path):
        p = self.write(tmp_path, "[experiment]\nname = x\nseed = 3\n")
        assert load_spec(p, {"seed": 9, "cutoff": None}).seed == 9

    def test_custom_map(self, tmp_path):
        p = self.write(tmp_path, "[experiment]\nname = x\nclass_map = custom\n[class_map]\nde = g\nnl = g\nfr = r\n")
        assert load_spec(p).class_map == {"de": "g", "nl": "g", "fr": "r"}

    @pytest.mark.parametrize("text", [
        "[other]\nname = x\n",
        "[experiment]\nname = x\nclass_map = nope\n",
        "[experiment]\nname = x\nfractions = 0.5, 0.2\n",
        "[experiment]\nname = x\nfractions = 0.5, abc\n",
        "[experiment]\nname = x\nseed = many\n",
        "[experiment]\nname = x\nmode = magic\n",
        "[experiment]\nname = x\n[possim]\ncutoff = top:-1\n",
        "[experiment]\nname = x\n[possim]\norder = 3\ncascade = both\n",
        "[experiment]\nname = x\nclass_map = custom\n",
        "not an ini file at all",
    ])
    def test_config_errors(self, tmp_path, text):
        with pytest.raises(ConfigError):
            load_spec(self.write(tmp_path, text))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_spec(tmp_path / "absent.ini")


def popular_corpus(n=40, seed=0, separation=1.0):
    return generate_corpus(list(POPULAR_SIX), n, separation=separation, seed=seed)


@pytest.fixture(scope="module")
def six_class_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("runs")
    spec = ExperimentSpec("six", preset_class_map("popular6"), (0.5, 1.0), seed=1, hyper=FAST)
    return run_experiment(spec, popular_corpus(), out)


class TestRunExperiment:
    def test_outputs(self, six_class_run):
        files = sorted(p.name for p in six_class_run.run_dir.iterdir())
        assert files == ["confusion.csv", "curve.csv", "curve.svg", "manifest.json", "metrics.json", "model.json"]
        assert six_class_run.run_dir.name == "six-seed1"

    def test_manifest_feature_dim(self, six_class_run):
        m = json.loads((six_class_run.run_dir / "manifest.json").read_text())
        assert m["feature_dim"] == 199
        assert len(m["feature_schema"]) == 199
        assert sum(n.startswith("sim[") for n in m["feature_schema"]) == 72
        assert m["class_labels"] == sorted(POPULAR_SIX)

    def test_confusion_sums_to_test_split(self, six_class_run):
        m = json.loads((six_class_run.run_dir / "manifest.json").read_text())
        n_test = sum(1 for d in m["splits"] if d["split"] == "test")
        assert int(six_class_run.report.confusion.sum()) == n_test

    def test_curve_rows(self, six_class_run):
        rows = read_curve_csv((six_class_run.run_dir / "curve.csv").read_text())
        assert [r.fraction for r in rows] == [0.5, 1.0]
        assert rows[0].n_train < rows[1].n_train

    def test_test_only_ngrams_do_not_leak(self, tmp_path):
        # rewriting only the test comments must not change anything trained
        corpus = popular_corpus(20, seed=3)
        spec = ExperimentSpec("leak", preset_class_map("popular6"), (1.0,), seed=2, hyper=FAST)
        a = run_experiment(spec, corpus, tmp_path / "a")
        test_ids = {cid for cid, split in a.manifest.assignments if split == "test"}
        canary = [replace(c, tokens=type(c.tokens)(("CANARYTOKEN",) * len(c.tokens), c.tokens.sentence_bounds),
                          pos_tags=("CANARYTAG",) * len(c.pos_tags))
                  if c.comment_id in test_ids else c for c in corpus]
        b = run_experiment(spec, canary, tmp_path / "b")
        assert (a.run_dir / "model.json").read_bytes() == (b.run_dir / "model.json").read_bytes()
        assert "CANARY" not in (b.run_dir / "model.json").read_text()
        assert [r.train_acc for r in a.curve] == [r.train_acc for r in b.curve]

    def test_byte_identical_rerun(self, tmp_path):
        corpus = popular_corpus(15, seed=4)
        spec = ExperimentSpec("det", preset_class_map("popular6"), (0.5, 1.0), seed=5, hyper=FAST)
        a = run_experiment(spec, corpus, tmp_path / "a").run_dir
        b = run_experiment(spec, list(reversed(corpus)), tmp_path / "b").run_dir
        for name in ("manifest.json", "model.json", "metrics.json", "confusion.csv", "curve.csv", "curve.svg"):
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_two_class_native_beats_baselines(self, tmp_path):
        # two styles; the non-native style is spread over five native languages
        styled = generate_corpus(["en-us", "other"], 150, separation=1.0, seed=8)
        langs = ["de", "fr", "ru", "nl", "es"]
        corpus = [c if c.label == "en-us" else replace(c, label=langs[i % 5])
                  for i, c in enumerate(styled)]
        spec = ExperimentSpec("nat", preset_class_map("native"), (1.0,), seed=0, hyper=FAST)
        res = run_experiment(spec, corpus, tmp_path)
        rows = list(csv.reader(io.StringIO((res.run_dir / "confusion.csv").read_text())))
        assert rows[0] == ["true\\predicted", "native", "non-native"]
        assert len(rows) == 3
        test_ids = {cid for cid, split in res.manifest.assignments if split == "test"}
        truth = [spec.class_map[c.label] for c in corpus if c.comment_id in test_ids]
        bmax, brand = possim.baselines(truth, ["native", "non-native"], 0)
        assert res.report.accuracy > max(bmax, brand)
        assert res.report.accuracy >= 0.8

    def test_empty_class_is_stage_error(self, tmp_path):
        corpus = generate_corpus(["de"], 30, seed=0)
        spec = ExperimentSpec("e", {"de": "de", "fr": "fr"}, (1.0,), hyper=FAST)
        with pytest.raises(StageError) as e:
            run_experiment(spec, corpus, tmp_path)
        assert e.value.stage == "split"
        assert isinstance(e.value, DataError)

    def test_possim_mode(self, tmp_path):
        corpus = popular_corpus(40, seed=6)
        cfg = possim.PosSimConfig(order=2, min_pos_ngrams=10)
        spec = ExperimentSpec("ps", preset_class_map("popular6"), (1.0,), seed=0, mode=Mode.POSSIM,
                              possim_cfg=cfg)
        res = run_experiment(spec, corpus, tmp_path)
        assert res.possim_report.available > 0
        assert (res.run_dir / "possim_summary.csv").exists()
        tricky = json.loads((res.run_dir / "possim_tricky.json").read_text())
        assert 0 <= tricky["discard_ratio"] <= 1


def test_possim_study_tables():
    corpus = popular_corpus(20, seed=7)
    train = [c for c in corpus if int(c.comment_id[-5:]) < 15]
    test = [c for c in corpus if int(c.comment_id[-5:]) >= 15]
    tables = possim_study(train, test, min_pos_ngrams=10, thresholds=(10, 20), cutoffs=("none", "top:50"),
                          cascades=("off", "both"))
    assert set(tables) == {"table_orders.csv", "table_length_overall.csv", "table_length_nonzero.csv",
                           "table_cutoffs.csv", "table_cascade.csv", "table_tricky_classes.csv", "tricky.json"}
    orders = tables["table_orders.csv"].splitlines()
    assert [l.split(",")[0] for l in orders[1:]] == ["4-grams", "tri-grams", "bi-grams", "uni-grams",
                                                     "baseline-max", "baseline-random"]
    assert tables["table_length_overall.csv"].splitlines()[0] == "accuracy,len>10,len>20"


class TestReports:
    def test_svg_single_point(self):
        svg = curve_svg([CurveRow(1.0, 10, 0.9, 0.8, 0.7)])
        assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
        assert svg.count('class="marker test"') == 1
        assert "<polyline" not in svg

    def test_svg_multi_point(self):
        rows = [CurveRow(f, 10, 0.5, None, 0.6) for f in (0.1, 0.5, 1.0)]
        svg = curve_svg(rows)
        assert svg.count('class="marker train"') == 3
        assert 'class="marker dev"' not in svg
        assert svg.count("<polyline") == 2

    def test_curve_csv_round_trip(self):
        rows = [CurveRow(0.5, 4, 0.75, None, 0.5), CurveRow(1.0, 8, 0.875, 0.5, 0.625)]
        assert read_curve_csv(curve_csv(rows)) == rows

    def test_emit_two_class(self, tmp_path):
        r = EvalReport.from_pairs(("native", "non-native"), ["native", "non-native"], ["native", "native"])
        paths = emit_reports(r, [], tmp_path)
        assert paths["confusion"].read_text() == "true\\predicted,native,non-native\nnative,1,0\nnon-native,1,0\n"
        assert json.loads(paths["metrics"].read_text())["accuracy"] == 0.5
