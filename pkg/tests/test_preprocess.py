import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctiharvest.preprocess import (
    DumpError,
    PhraseTable,
    build_phrase_table,
    normalize,
    parse_dump,
    tokenize_mwe,
)

# 20-sentence fixture; "mirai botnet" always co-occurs and neither word
# appears outside the bigram, so count(ab)=count(a)=count(b)=10.
PHRASE_SENTENCES = [s.split() for s in [
    "the mirai botnet hit the dns provider",
    "researchers tracked the mirai botnet for months",
    "a new mirai botnet variant appeared",
    "the mirai botnet used default passwords",
    "mirai botnet traffic flooded the network",
    "analysts say the mirai botnet is back",
    "the mirai botnet scanned open ports",
    "another mirai botnet wave was reported",
    "iot devices joined the mirai botnet again",
    "the mirai botnet made headlines",
    "buffer overflow in the router firmware",
    "the exploit kit was sold on a forum",
    "patch your router firmware now",
    "default passwords are a known risk",
    "the dns provider mitigated the attack",
    "open ports invite network scans",
    "the forum thread discussed the exploit kit",
    "firmware updates close known holes",
    "a zero day exploit appeared on the forum",
    "network traffic spiked during the attack",
]]
# frozen by the independent counting oracle over the fixture:
#   V = 66 distinct tokens, count(mirai)=count(botnet)=count(mirai botnet)=10
FIXTURE_V = 66
SCORE_MIRAI_BOTNET_D5 = 3.3  # (10-5)*66/(10*10)
KEPT_AT_D1_T10 = {
    ("default", "passwords"): 16.5,
    ("dns", "provider"): 16.5,
    ("exploit", "kit"): 11.0,
    ("open", "ports"): 16.5,
    ("router", "firmware"): 11.0,
}


class TestParseDump:
    def test_question_row_tags_split(self, dump_files):
        posts, _ = dump_files
        out = parse_dump(posts)
        q = next(p for p in out if p.post_id == "post-1")
        assert q.kind == "question"
        assert q.tags == ["ddos", "ip-spoofing"]

    def test_answer_row_no_tags(self, dump_files):
        posts, _ = dump_files
        a = next(p for p in parse_dump(posts) if p.post_id == "post-2")
        assert a.kind == "answer" and a.tags == []

    def test_fixture_counts_three_posts_two_comments(self, dump_files):
        posts, comments = dump_files
        out = parse_dump(posts, comments)
        # row PostTypeId=7 is skipped; 3 posts + 2 comments remain
        assert len(out) == 5
        assert sum(1 for p in out if p.kind == "comment") == 2

    def test_body_entities_decoded_and_normalized(self, dump_files):
        posts, _ = dump_files
        q = next(p for p in parse_dump(posts) if p.post_id == "post-1")
        assert q.body_text == "how do i stop a ddos"

    def test_anonymization_applied(self, dump_files):
        posts, comments = dump_files
        out = parse_dump(posts, comments)
        mirai = next(p for p in out if p.post_id == "post-3")
        assert "_user_" in mirai.body_text and "_url_" in mirai.body_text
        comment = next(p for p in out if p.post_id == "comment-11")
        assert comment.body_text.startswith("_user_ saw")

    def test_malformed_xml_reports_line(self, tmp_path):
        bad = tmp_path / "Posts.xml"
        bad.write_text("<posts>\n<row Id='1'\n</posts>", encoding="utf-8")
        with pytest.raises(DumpError, match=r"line \d+"):
            parse_dump(bad)

    def test_missing_file_is_error(self, tmp_path):
        with pytest.raises(DumpError, match="missing"):
            parse_dump(tmp_path / "nope.xml")


class TestNormalize:
    def test_fold_and_symbol_removal(self):
        assert normalize("Mirai BOTNET!!") == "mirai botnet"

    def test_mention_and_url(self):
        assert normalize("@alice check http://x.y") == "_user_ check _url_"

    def test_user_number_pattern(self):
        assert normalize("ask user12345 about it") == "ask _user_ about it"

    def test_intra_word_hyphen_kept(self):
        assert normalize("state-of-the-art DDoS - attack") == "state-of-the-art ddos attack"

    def test_html_stripped(self):
        assert normalize("<p>Hello <b>world</b></p>") == "hello world"

    @given(st.text(max_size=300))
    @settings(max_examples=300, deadline=None)
    def test_idempotent(self, text):
        once = normalize(text)
        assert normalize(once) == once

    @given(st.text(max_size=300))
    @settings(max_examples=300, deadline=None)
    def test_output_alphabet(self, text):
        allowed = set("abcdefghijklmnopqrstuvwxyz0123456789-_ ")
        assert set(normalize(text)) <= allowed


class TestPhraseTable:
    def test_mirai_botnet_score_exact(self):
        table = build_phrase_table(PHRASE_SENTENCES, threshold=3.0, delta=5.0)
        assert table.scores == {("mirai", "botnet"): pytest.approx(
            SCORE_MIRAI_BOTNET_D5, abs=1e-12)}

    def test_kept_set_and_scores_at_low_delta(self):
        table = build_phrase_table(PHRASE_SENTENCES, threshold=10.0, delta=1.0)
        assert set(table.scores) == set(KEPT_AT_D1_T10)
        for pair, expected in KEPT_AT_D1_T10.items():
            assert table.scores[pair] == pytest.approx(expected, abs=1e-12)

    def test_delta_at_least_count_excludes(self):
        # count(exploit kit)=2, delta=5 -> negative score -> excluded
        table = build_phrase_table(PHRASE_SENTENCES, threshold=0.0, delta=5.0)
        assert ("exploit", "kit") not in table.scores

    def test_never_adjacent_absent(self):
        table = build_phrase_table(PHRASE_SENTENCES, threshold=-1e9, delta=0.0)
        assert ("router", "botnet") not in table.scores

    def test_sentence_order_invariant(self):
        a = build_phrase_table(PHRASE_SENTENCES, threshold=3.0, delta=5.0)
        b = build_phrase_table(list(reversed(PHRASE_SENTENCES)), threshold=3.0, delta=5.0)
        assert a.scores == b.scores

    def test_empty_corpus_empty_table(self):
        assert build_phrase_table([], threshold=1.0, delta=1.0).scores == {}

    def test_tsv_round_trip(self, tmp_path):
        table = build_phrase_table(PHRASE_SENTENCES, threshold=3.0, delta=5.0)
        path = tmp_path / "phrases.tsv"
        table.save_tsv(path)
        back = PhraseTable.load_tsv(path)
        assert back.scores == table.scores


class TestTokenizeMwe:
    TABLE = PhraseTable(scores={("mirai", "botnet"): 9.9})

    def test_basic_merge(self):
        assert tokenize_mwe("the mirai botnet attack", self.TABLE) == [
            "the", "mirai_botnet", "attack"]

    def test_empty_table_plain_tokens(self):
        assert tokenize_mwe("a b c", PhraseTable()) == ["a", "b", "c"]

    def test_greedy_no_overlap(self):
        table = PhraseTable(scores={("a", "b"): 11.0, ("b", "c"): 11.0})
        assert tokenize_mwe("a b c", table) == ["a_b", "c"]

    def test_forced_phrase_merges_without_table(self):
        assert tokenize_mwe("stop ip spoofing now", None,
                            forced_phrases=["ip spoofing"]) == ["stop", "ip_spoofing", "now"]

    def test_forced_phrase_accepts_merged_form(self):
        assert tokenize_mwe("stop ip spoofing now", None,
                            forced_phrases=["ip_spoofing"]) == ["stop", "ip_spoofing", "now"]

    def test_longer_forced_phrase_wins(self):
        out = tokenize_mwe("denial of service attack", None,
                           forced_phrases=["denial of service", "denial of"])
        assert out == ["denial_of_service", "attack"]

    @given(st.lists(st.sampled_from(
        ["mirai", "botnet", "a", "b", "c", "ip", "spoofing", "x1"]), max_size=30))
    @settings(max_examples=300, deadline=None)
    def test_round_trip_property(self, tokens):
        table = PhraseTable(scores={("mirai", "botnet"): 11.0, ("a", "b"): 11.0})
        out = tokenize_mwe(tokens, table, forced_phrases=["ip spoofing"])
        unmerged = [part for tok in out for part in tok.split("_")]
        original = [part for tok in tokens for part in tok.split("_")]
        assert unmerged == original
