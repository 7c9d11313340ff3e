"""Vocabulary induction, greedy tokenization, and tag/feature alignment."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from jointnlu.features import FEATURE_DIM
from jointnlu.subwords import (
    BOS_TOKEN,
    CONTINUATION,
    EOS_TOKEN,
    PAD_TOKEN,
    RESERVED_TOKENS,
    UNK_TOKEN,
    AlignedSequence,
    WordPieceVocab,
    align,
    de_align,
    train_vocab,
)
from jointnlu.tagging import AlignmentError, O_TAG, SlotTag, X_TAG, parse_tags


def make_vocab(*extra: str) -> WordPieceVocab:
    return WordPieceVocab(RESERVED_TOKENS + extra)


def rand_features(rng, n):
    feats = np.zeros((n, FEATURE_DIM))
    for i in range(n):
        feats[i, rng.integers(0, 19)] = 1.0
        feats[i, 19 + rng.integers(0, 4)] = 1.0
    return feats


class TestVocab:
    def test_reserved_ids_are_first_four(self):
        v = make_vocab("play")
        assert v.ids[PAD_TOKEN] == 0 == v.pad_id
        assert v.ids[UNK_TOKEN] == 1 == v.unk_id
        assert v.ids[BOS_TOKEN] == 2 == v.bos_id
        assert v.ids[EOS_TOKEN] == 3 == v.eos_id

    def test_rejects_missing_reserved_prefix(self):
        with pytest.raises(ValueError):
            WordPieceVocab(("play", "##ed") + RESERVED_TOKENS)

    def test_rejects_duplicates(self):
        with pytest.raises(ValueError):
            make_vocab("play", "play")

    def test_save_load_round_trip(self, tmp_path):
        v = train_vocab(["play", "played", "plays"], 40)
        path = tmp_path / "vocab.txt"
        v.save(path)
        loaded = WordPieceVocab.load(path)
        assert loaded.pieces == v.pieces
        # line number equals id
        lines = path.read_text(encoding="utf-8").splitlines()
        assert all(lines[i] == v.piece(i) for i in range(len(v)))


class TestTrainVocab:
    def test_frequent_word_becomes_full_piece(self):
        v = train_vocab(["play", "played"], 300)
        assert "play" in v.ids

    def test_target_below_base_inventory_rejected(self):
        # alphabet {p,l,a,y,e,d} needs 12 character pieces + 4 reserved
        with pytest.raises(ValueError):
            train_vocab(["play", "played"], 15)

    def test_deterministic(self):
        corpus = ["book", "a", "flight", "to", "boston", "book", "flights"]
        assert train_vocab(corpus, 60).pieces == train_vocab(corpus, 60).pieces

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError):
            train_vocab([], 100)

    def test_accepts_multiset_counts(self):
        v1 = train_vocab({"play": 3, "played": 2}, 40)
        v2 = train_vocab(["play"] * 3 + ["played"] * 2, 40)
        assert v1.pieces == v2.pieces

    def test_alphabet_has_both_piece_forms(self):
        v = train_vocab(["ab"], 20)
        for c in "ab":
            assert c in v.ids and CONTINUATION + c in v.ids


class TestTokenize:
    def test_longest_match_splits(self):
        v = make_vocab("broad", "##rick", "b", "##r")
        assert v.tokenize_pieces("broadrick") == ["broad", "##rick"]

    def test_full_word_single_piece(self):
        v = make_vocab("play", "p", "##l", "##a", "##y")
        assert v.tokenize_pieces("play") == ["play"]

    def test_unseen_characters_collapse_to_unknown(self):
        v = make_vocab("play")
        assert v.tokenize_pieces("zzz") == [UNK_TOKEN]

    def test_partial_coverage_still_unknown(self):
        # known prefix does not rescue a word with an unknown tail
        v = make_vocab("play", "p", "##l", "##a", "##y")
        assert v.tokenize_pieces("playz") == [UNK_TOKEN]

    def test_ids_match_pieces(self):
        v = make_vocab("broad", "##rick")
        assert v.tokenize("broadrick") == [v.ids["broad"], v.ids["##rick"]]

    def test_empty_word_rejected(self):
        with pytest.raises(ValueError):
            make_vocab().tokenize("")

    @given(
        st.lists(st.text(alphabet="abcd", min_size=1, max_size=6), min_size=1, max_size=12),
        st.text(alphabet="abcd", min_size=1, max_size=10),
    )
    def test_total_over_known_alphabet(self, corpus, word):
        v = train_vocab(corpus + ["abcd"], 60)
        pieces = v.tokenize_pieces(word)
        rebuilt = "".join(p.removeprefix(CONTINUATION) for p in pieces)
        assert rebuilt == word
        assert pieces == v.tokenize_pieces(word)


class TestAlign:
    def _vocab(self):
        return make_vocab("play", "broad", "##rick", "music")

    def test_first_piece_carries_tag_rest_get_x(self):
        v = self._vocab()
        words = ["play", "broadrick"]
        tags = parse_tags(["O", "I-artist"])
        feats = np.zeros((2, FEATURE_DIM))
        feats[0, 0] = feats[1, 1] = 1.0
        seq = align(words, tags, feats, v, max_len=50)

        assert seq.piece_ids == (
            v.bos_id, v.ids["play"], v.ids["broad"], v.ids["##rick"], v.eos_id
        )
        assert [str(t) for t in seq.piece_tags] == ["X", "O", "I-artist", "X", "X"]
        assert seq.active == (False, True, True, False, False)
        assert seq.word_index == (None, 0, 1, 1, None)
        assert not seq.truncated

    def test_features_copied_to_every_piece(self):
        v = self._vocab()
        feats = np.zeros((1, FEATURE_DIM))
        feats[0, 5] = 1.0
        seq = align(["broadrick"], [O_TAG], feats, v, max_len=50)
        assert np.array_equal(seq.features[1], feats[0])
        assert np.array_equal(seq.features[2], feats[0])

    def test_markers_carry_zero_features_and_x(self):
        v = self._vocab()
        seq = align(["play"], [O_TAG], np.ones((1, FEATURE_DIM)), v, max_len=50)
        assert np.array_equal(seq.features[0], np.zeros(FEATURE_DIM))
        assert np.array_equal(seq.features[-1], np.zeros(FEATURE_DIM))
        assert seq.piece_tags[0] == X_TAG and seq.piece_tags[-1] == X_TAG

    def test_single_word_single_active(self):
        v = self._vocab()
        seq = align(["music"], [O_TAG], np.zeros((1, FEATURE_DIM)), v, max_len=50)
        assert sum(seq.active) == 1 == seq.word_count

    def test_truncation_drops_whole_trailing_word(self):
        v = self._vocab()
        words = ["play", "broadrick"]
        tags = [O_TAG, O_TAG]
        seq = align(words, tags, np.zeros((2, FEATURE_DIM)), v, max_len=4)
        assert seq.truncated
        assert seq.piece_ids == (v.bos_id, v.ids["play"], v.eos_id)
        assert seq.word_count == 1

    def test_exact_fit_is_not_truncated(self):
        v = self._vocab()
        words = ["play", "broadrick"]
        seq = align(words, [O_TAG, O_TAG], np.zeros((2, FEATURE_DIM)), v, max_len=5)
        assert not seq.truncated and len(seq) == 5

    def test_empty_utterance(self):
        v = self._vocab()
        seq = align([], [], np.zeros((0, FEATURE_DIM)), v, max_len=50)
        assert len(seq) == 2 and seq.word_count == 0
        assert de_align(seq, seq.piece_tags) == []

    def test_word_tag_length_mismatch(self):
        v = self._vocab()
        with pytest.raises(AlignmentError):
            align(["play"], [], np.zeros((1, FEATURE_DIM)), v, max_len=50)

    def test_bad_feature_shape(self):
        v = self._vocab()
        with pytest.raises(ValueError):
            align(["play"], [O_TAG], np.zeros((2, FEATURE_DIM)), v, max_len=50)

    def test_max_len_too_small(self):
        v = self._vocab()
        with pytest.raises(ValueError):
            align(["play"], [O_TAG], np.zeros((1, FEATURE_DIM)), v, max_len=2)


class TestDeAlign:
    def _aligned(self):
        v = make_vocab("play", "broad", "##rick")
        words = ["play", "broadrick"]
        tags = parse_tags(["B-song", "I-artist"])
        return align(words, tags, np.zeros((2, FEATURE_DIM)), v, max_len=50), tags

    def test_gold_pieces_round_trip(self):
        seq, tags = self._aligned()
        assert de_align(seq, seq.piece_tags) == tags

    def test_x_at_active_position_becomes_o(self):
        seq, _ = self._aligned()
        preds = [X_TAG] * len(seq)
        assert de_align(seq, preds) == [O_TAG, O_TAG]

    def test_inactive_predictions_ignored(self):
        seq, tags = self._aligned()
        preds = list(seq.piece_tags)
        for i, is_active in enumerate(seq.active):
            if not is_active:
                preds[i] = SlotTag("B", "noise")
        assert de_align(seq, preds) == tags

    def test_length_mismatch_rejected(self):
        seq, _ = self._aligned()
        with pytest.raises(AlignmentError):
            de_align(seq, seq.piece_tags[:-1])


class TestRoundTripOracle:
    TAGS = parse_tags(["O", "B-artist", "I-artist", "B-song", "I-song"])

    def test_thousand_random_utterances(self, rng):
        corpus = [
            "".join(rng.choice(list("abcdefg"), size=rng.integers(1, 8)))
            for _ in range(400)
        ]
        vocab = train_vocab(corpus, 120)
        for _ in range(1000):
            n = int(rng.integers(1, 13))
            words = [
                "".join(rng.choice(list("abcdefg"), size=rng.integers(1, 8)))
                for _ in range(n)
            ]
            tags = [self.TAGS[i] for i in rng.integers(0, len(self.TAGS), size=n)]
            feats = rand_features(rng, n)
            seq = align(words, tags, feats, vocab, max_len=200)
            assert not seq.truncated
            assert seq.word_count == n
            assert de_align(seq, seq.piece_tags) == tags
            active_rows = seq.features[np.array(seq.active)]
            assert np.array_equal(active_rows, feats)


class TestAlignedSequenceValidation:
    def test_field_length_disagreement(self):
        with pytest.raises(ValueError):
            AlignedSequence(
                piece_ids=(2, 3),
                piece_tags=(X_TAG,),
                active=(False, False),
                features=np.zeros((2, FEATURE_DIM)),
                word_index=(None, None),
            )

    def test_feature_width_enforced(self):
        with pytest.raises(ValueError):
            AlignedSequence(
                piece_ids=(2, 3),
                piece_tags=(X_TAG, X_TAG),
                active=(False, False),
                features=np.zeros((2, FEATURE_DIM + 1)),
                word_index=(None, None),
            )
