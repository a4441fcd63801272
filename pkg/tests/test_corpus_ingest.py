import itertools
import json
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from wikinli.corpus_ingest import (
    DEFAULT_POPULAR_LANGS,
    Comment,
    Level,
    LanguageSkill,
    UserProfile,
    balance_and_split,
    clean_wikitext,
    extract_signed_comments,
    filter_users,
    iter_dump_pages,
    label_comments,
    parse_babel,
)
from wikinli.errors import DataError


def skills(profile):
    return {s.lang_code: s.level for s in profile.skills}


class TestParseBabel:
    def test_native_and_graded(self):
        p = parse_babel(["User en-N", "User fr-3"], "u1")
        assert skills(p) == {"en": Level.NATIVE, "fr": Level.L3}

    def test_missing_level_means_native(self):
        assert skills(parse_babel(["User de"])) == {"de": Level.NATIVE}

    def test_empty(self):
        p = parse_babel([])
        assert p.skills == frozenset()
        assert p.malformed == 0

    def test_duplicate_last_wins(self):
        p = parse_babel(["User de-2", "User de-4"])
        assert skills(p) == {"de": Level.L4}
        assert p.duplicates == 1

    def test_all_malformed(self):
        p = parse_babel(["Babel", "User en-7", "Category:Cats", "User -3"])
        assert p.skills == frozenset()
        assert p.malformed == 4

    def test_region_subtag_and_category_prefix(self):
        p = parse_babel(["Category:User en-US", "User_pt-BR-2", "User en-GB-N"])
        assert skills(p) == {"en-us": Level.NATIVE, "pt-br": Level.L2, "en-gb": Level.NATIVE}

    def test_every_level(self):
        p = parse_babel([f"User x{c}-{lvl}" for c, lvl in zip("abcdef", "12345N")])
        assert sorted(s.level.value for s in p.skills) == sorted("12345N")

    def test_skill_invariants(self):
        with pytest.raises(ValueError):
            LanguageSkill("EN", Level.NATIVE)
        with pytest.raises(ValueError):
            UserProfile("u", frozenset({LanguageSkill("de", Level.L1), LanguageSkill("de", Level.L2)}))
        with pytest.raises(ValueError):
            UserProfile("", frozenset())


SIG = "[[User:Alice|Alice]] 12:01, 3 May"


class TestExtractSignedComments:
    def test_two_signatures_same_user(self):
        body = f"First remark about the lead. {SIG}\n:Second remark, also mine. {SIG}\n"
        out = extract_signed_comments(body, "Talk:X")
        assert [c.user_id for c in out] == ["Alice", "Alice"]
        assert out[0].raw_text == "First remark about the lead."
        assert out[1].raw_text == "Second remark, also mine."
        assert [c.comment_id for c in out] == ["Talk:X#0", "Talk:X#1"]

    def test_empty_page(self):
        assert extract_signed_comments("", "Talk:X") == []

    def test_no_signature(self):
        stats = Counter()
        assert extract_signed_comments("Just text, unsigned.", "T", stats=stats) == []
        assert stats["dropped_trailing"] == 1

    @pytest.mark.parametrize("sig,user", [
        ("[[User:Bob Smith|Bob]] ([[User talk:Bob Smith|talk]]) 21:11, 17 July 2013 (UTC)", "Bob Smith"),
        ("[[User talk:Carol|Carol]] 09:00, 1 January 2010 (UTC)", "Carol"),
        ("[[Special:Contributions/192.0.2.1|192.0.2.1]] 10:00, 2 February 2011 (UTC)", "192.0.2.1"),
        ("{{unsigned|Dave_Jones|10:00, 2 February 2011 (UTC)}}", "Dave Jones"),
        ("{{Unsigned2|10:00, 2 February 2011 (UTC)|Erin}}", "Erin"),
        ("[[User:frank]]", "Frank"),
    ])
    def test_pattern_variants(self, sig, user):
        out = extract_signed_comments(f"I think the section needs a source. {sig}\n", "T")
        assert len(out) == 1
        assert out[0].user_id == user
        assert out[0].raw_text == "I think the section needs a source."

    def test_mention_before_signature_is_not_attribution(self):
        body = f"As [[User:Bob|Bob]] said, the date is wrong. {SIG}"
        out = extract_signed_comments(body, "T")
        assert [(c.user_id, c.raw_text) for c in out] == [("Alice", "As Bob said, the date is wrong.")]

    def test_trailing_text_dropped_and_counted(self):
        stats = Counter()
        out = extract_signed_comments(f"Signed text. {SIG}\nUnsigned tail.", "T", stats=stats)
        assert len(out) == 1
        assert stats["dropped_trailing"] == 1

    def test_markup_cleaned(self):
        body = "== Heading ==\n:::See [[Berlin Wall|the wall]] and '''this''' {{cn}} <ref>x</ref>. " + SIG
        out = extract_signed_comments(body, "T")
        assert out[0].raw_text == "See the wall and this x ."

    def test_clean_wikitext_external_link(self):
        assert clean_wikitext("see [http://example.org the site] now") == "see the site now"


class TestFilterUsers:
    def test_single_native(self):
        p = parse_babel(["User de-N", "User en-3"], "u1")
        assert filter_users([p]) == [("u1", "de")]

    def test_two_picked_natives_excluded(self):
        stats = Counter()
        assert filter_users([parse_babel(["User de-N", "User fr-N"], "u")], stats=stats) == []
        assert stats["multi_native"] == 1

    def test_english_rules(self):
        us = parse_babel(["User en-US"], "us")
        gb = parse_babel(["User en-N", "User en-GB-N"], "gb")
        assert filter_users([us, gb]) == [("us", "en-us")]

    def test_rule_combinations(self):
        # hand-enumerated outcomes for every rule branch
        cases = [
            (["User en-US"], "en-us"),
            (["User en-N"], None),
            (["User en-US", "User en-GB-N"], None),
            (["User en-US", "User de-N"], None),
            (["User de-N", "User en-4"], "de"),
            (["User de-N", "User xx-N"], "de"),
            (["User de-N", "User ja-N"], None),
            (["User xx-N"], None),
            (["User de-3", "User en-4"], None),
            (["User zh-yue-N", "User en-2"], "yue"),
        ]
        profiles = [parse_babel(b, f"u{i}") for i, (b, _) in enumerate(cases)]
        got = dict(filter_users(profiles))
        want = {f"u{i}": lab for i, (_, lab) in enumerate(cases) if lab}
        assert got == want

    def test_no_native_counted(self):
        stats = Counter()
        filter_users([parse_babel(["User fr-2"], "u")], stats=stats)
        assert stats["no_native"] == 1

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.lists(st.sampled_from(
        ["User en-US", "User en-N", "User en-GB-N", "User de-N", "User fr-N", "User ja-N",
         "User fr-2", "User xx-N", "User ru-3", "User zh-yue-N"]), max_size=4), max_size=12))
    def test_idempotent(self, claims):
        profiles = [parse_babel(c, f"u{i}") for i, c in enumerate(claims)]
        once = filter_users(profiles)
        again = filter_users([UserProfile(uid, frozenset({LanguageSkill(lab, Level.NATIVE)}))
                              for uid, lab in once])
        assert again == once

    def test_default_languages(self):
        assert len(DEFAULT_POPULAR_LANGS) == 19
        assert "en" not in DEFAULT_POPULAR_LANGS

    def test_label_comments(self):
        cs = [Comment("a", "u1", "p", "x"), Comment("b", "u2", "p", "y")]
        stats = Counter()
        out = label_comments(cs, [("u1", "de")], stats)
        assert [(c.comment_id, c.label) for c in out] == [("a", "de")]
        assert stats["unlabeled_comments"] == 1


def corpus(sizes):
    return [Comment(f"{lab}-{i:04d}", "u", "p", "t", lab)
            for lab, n in sizes.items() for i in range(n)]


class TestBalanceAndSplit:
    def test_sizes(self):
        s = balance_and_split(corpus({"a": 100, "b": 80, "c": 120}), seed=7)
        assert s.manifest.counts == {"a": 80, "b": 80, "c": 80}
        for lab in "abc":
            assert [sum(c.label == lab for c in part) for part in s] == [56, 8, 16]

    def test_remainder_goes_to_train(self):
        s = balance_and_split(corpus({"a": 13}), seed=0)
        # dev floor(1.3) = 1, test floor(2.6) = 2
        assert [len(p) for p in s] == [10, 1, 2]

    def test_single_class_flagged(self):
        s = balance_and_split(corpus({"a": 10}), seed=0)
        assert s.manifest.flags == ["single_class"]

    def test_empty_class_named(self):
        with pytest.raises(DataError, match="'b'"):
            balance_and_split(corpus({"a": 10}), seed=0, class_labels=["a", "b"])

    def test_unlabeled(self):
        with pytest.raises(DataError):
            balance_and_split([Comment("x", "u", "p", "t")], seed=0)

    def test_deterministic_manifest(self):
        data = corpus({"a": 37, "b": 52})
        assert balance_and_split(data, 3).manifest.to_json() == balance_and_split(data, 3).manifest.to_json()
        assert balance_and_split(data, 3).manifest.to_json() != balance_and_split(data, 4).manifest.to_json()

    def test_input_order_irrelevant(self):
        data = corpus({"a": 37, "b": 52})
        assert (balance_and_split(data, 3).manifest.to_json()
                == balance_and_split(list(reversed(data)), 3).manifest.to_json())

    @settings(max_examples=60, deadline=None)
    @given(st.dictionaries(st.sampled_from("abcde"), st.integers(1, 60), min_size=1), st.integers(0, 2**32))
    def test_disjoint_cover(self, sizes, seed):
        data = corpus(sizes)
        s = balance_and_split(data, seed)
        ids = [c.comment_id for part in s for c in part]
        assert len(ids) == len(set(ids))
        m = min(sizes.values())
        assert len(ids) == m * len(sizes)
        assert set(s.manifest.counts.values()) == {m}
        assert sorted(cid for cid, _ in s.manifest.assignments) == sorted(ids)

    def test_manifest_json(self):
        m = json.loads(balance_and_split(corpus({"a": 10, "b": 10}), 1).manifest.to_json())
        assert m["class_labels"] == ["a", "b"]
        assert m["split_fractions"] == ["7/10", "1/10", "1/5"]
        assert {d["split"] for d in m["splits"]} == {"train", "dev", "test"}

    def test_unbalanced_mode_keeps_everything(self):
        s = balance_and_split(corpus({"a": 30, "b": 10}), 0, balance=False)
        assert s.manifest.counts == {"a": 30, "b": 10}


def test_dump_reader_filters_namespace(fixture_dir):
    pages = list(iter_dump_pages(fixture_dir.joinpath("talk_pages.xml")))
    assert [t for t, _ in pages] == ["Talk:Rhine", "Talk:Opera", "Talk:Bread"]


def test_fixture_extraction(fixture_dir):
    comments = list(itertools.chain.from_iterable(
        extract_signed_comments(text, title) for title, text in iter_dump_pages(fixture_dir.joinpath("talk_pages.xml"))))
    users = Counter(c.user_id for c in comments)
    assert len(comments) >= 12
    assert len(users) >= 3
    assert users["Alice"] == 8
