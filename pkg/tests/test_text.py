import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spongelab.nlp.corpus import WORDS, build_toy_vocab, natural_corpus, natural_sentence, random_corpus
from spongelab.nlp.text import (
    ALPHABET,
    EOS_ID,
    FALLBACK_CHAR,
    LETTERS,
    PAD_ID,
    UNK_ID,
    Vocab,
    bpe_encode,
    detokenize,
    encode_text,
    normalize,
)

alphabet_text = st.text(alphabet=ALPHABET, max_size=60)


def pieces(seq, vocab):
    return [vocab.pieces[i] for i in seq.ids]


class TestNormalize:
    def test_punctuation_split_and_case_fold(self):
        assert normalize("Hello, world") == ["hello", ",", "world"]

    def test_empty(self):
        assert normalize("") == []

    def test_whitespace_collapse(self):
        assert normalize("a  b") == ["a", "b"]
        assert normalize(" \t a\n\nb ") == ["a", "b"]

    def test_out_of_alphabet_becomes_fallback(self):
        assert normalize("café #1") == ["caf", FALLBACK_CHAR, FALLBACK_CHAR, FALLBACK_CHAR]

    def test_slashes(self):
        assert normalize("a/h/") == ["a", "/", "h", "/"]


class TestVocab:
    def test_reserved_ids(self, vocab):
        assert vocab.pieces[:3] == ["<pad>", "</s>", "<unk>"]
        assert (PAD_ID, EOS_ID, UNK_ID) == (0, 1, 2)

    def test_covers_alphabet(self, vocab):
        vocab.check_alphabet()
        assert 200 <= len(vocab) <= 500

    def test_missing_characters_reported(self):
        with pytest.raises(ValueError, match="##b"):
            Vocab(["a", "##a", "b"]).check_alphabet("ab")

    def test_duplicates_rejected(self):
        with pytest.raises(ValueError):
            Vocab(["a", "a"])

    def test_file_is_one_piece_per_line(self, vocab, tmp_path):
        vocab.save(tmp_path / "v.txt")
        lines = (tmp_path / "v.txt").read_text().splitlines()
        assert lines == vocab.pieces
        assert Vocab.load(tmp_path / "v.txt").pieces == vocab.pieces


class TestBpeEncode:
    def test_known_long_word(self, vocab):
        seq = bpe_encode("athazagoraphobia", vocab)
        assert pieces(seq, vocab) == ["ath", "##az", "##agor", "##aphobia"]
        assert seq.l_t == 4

    def test_corrupted_long_word(self, vocab):
        # greedy longest prefix: ath | az | agor | aph (aphobia no longer fits) | p | bi | a
        seq = bpe_encode("athazagoraphpbia", vocab)
        assert pieces(seq, vocab) == ["ath", "##az", "##agor", "##aph", "##p", "##bi", "##a"]
        assert seq.l_t == 7

    def test_single_characters(self, vocab):
        assert bpe_encode("a/h/z/g/r/p/p/i/", vocab).l_t == 16

    def test_whole_words_are_one_token(self, vocab):
        for w in WORDS:
            assert bpe_encode(w, vocab).l_t == 1, w

    def test_fallback_is_unk(self, vocab):
        assert bpe_encode("é", vocab).ids == (UNK_ID,)

    def test_word_list_input(self, vocab):
        assert bpe_encode(["the", "cat"], vocab).ids == encode_text("the cat", vocab).ids

    @settings(max_examples=300, deadline=None)
    @given(alphabet_text)
    def test_total(self, text):
        vocab = _VOCAB
        seq = encode_text(text, vocab)
        assert UNK_ID not in seq.ids
        assert seq.l_t == len(seq.ids)

    @settings(max_examples=300, deadline=None)
    @given(st.sampled_from(WORDS), st.data())
    def test_known_words_never_longer_than_corruptions(self, word, data):
        pos = data.draw(st.integers(0, len(word) - 1))
        ch = data.draw(st.sampled_from(LETTERS))
        corrupt = word[:pos] + ch + word[pos + 1:]
        assert bpe_encode(word, _VOCAB).l_t == 1 <= bpe_encode(corrupt, _VOCAB).l_t


_VOCAB = build_toy_vocab()


class TestDetokenize:
    @pytest.mark.parametrize("text", ["athazagoraphobia", "athazagoraphpbia", "a/h/z/g/r/p/p/i/"])
    def test_examples_round_trip(self, vocab, text):
        assert detokenize(bpe_encode(text, vocab), vocab) == " ".join(normalize(text))

    @settings(max_examples=300, deadline=None)
    @given(st.text(max_size=40))
    def test_round_trip_up_to_normalization(self, text):
        assert detokenize(encode_text(text, _VOCAB), _VOCAB) == " ".join(normalize(text))

    def test_drops_eos_and_pad(self, vocab):
        ids = encode_text("the cat", vocab).ids
        assert detokenize((PAD_ID, *ids, EOS_ID), vocab) == "the cat"

    def test_unknown_id(self, vocab):
        with pytest.raises(KeyError):
            detokenize([len(vocab)], vocab)


class TestCorpus:
    @pytest.mark.parametrize("length", [1, 2, 3, 8, 16, 50])
    def test_exact_length(self, length):
        for s in natural_corpus(50, length, seed=length):
            assert len(s) == length

    def test_only_known_words(self, vocab):
        for s in natural_corpus(100, 16, seed=0):
            for w in normalize(s):
                assert bpe_encode(w, vocab).l_t == 1

    def test_seeded(self):
        assert natural_corpus(5, 16, 3) == natural_corpus(5, 16, 3)
        assert random_corpus(5, 16, 3) == random_corpus(5, 16, 3)
        assert all(set(s) <= set(ALPHABET) for s in random_corpus(20, 16, 0))

    def test_length_must_be_positive(self):
        import numpy as np

        with pytest.raises(ValueError):
            natural_sentence(0, np.random.default_rng(0))
