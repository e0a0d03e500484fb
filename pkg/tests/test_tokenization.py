import pytest

from guidedec.tokenization import (
    ByteLevelBPETokenizer,
    WordTokenizer,
    complete_words,
    encode_tolerant,
    words_of,
)
from guidedec.types import Vocabulary


class TestWordTokenizer:
    def test_encode_decode_round_trip(self):
        tok = WordTokenizer(Vocabulary(["a", "b", "c"]))
        assert tok.encode("a c b") == [0, 2, 1]
        assert tok.decode([0, 2, 1]) == "a c b"

    def test_unknown_word_raises(self):
        tok = WordTokenizer(Vocabulary(["a"]))
        with pytest.raises(ValueError, match="unknown token"):
            tok.encode("a zzz")

    def test_encode_known_drops_unknown(self):
        tok = WordTokenizer(Vocabulary(["a", "b"]))
        assert tok.encode_known("a zzz b") == [0, 1]
        assert encode_tolerant(tok, "a zzz b") == [0, 1]

    def test_marks_word_per_token(self):
        assert WordTokenizer(Vocabulary(["a"])).word_per_token is True


def _tiny_bbpe() -> ByteLevelBPETokenizer:
    # Vocabulary built over {he, llo, world-ish pieces}; merges rank order
    # matters for segmentation.
    merges = ["h e", "l l", "he ll", "hell o", "Ġ w", "Ġw o"]
    tokens = [
        "h", "e", "l", "o", "w", "r", "d", "Ġ",
        "he", "ll", "hell", "hello", "Ġw", "Ġwo",
    ]
    return ByteLevelBPETokenizer(Vocabulary(tokens), merges)


class TestByteLevelBPE:
    def test_merges_apply_in_rank_order(self):
        tok = _tiny_bbpe()
        ids = tok.encode("hello")
        assert [tok.vocabulary.token(i) for i in ids] == ["hello"]

    def test_round_trip(self):
        tok = _tiny_bbpe()
        for text in ["hello", "hello world", "wold hell"]:
            assert tok.decode(tok.encode(text)) == text

    def test_space_prefix_tokens(self):
        tok = _tiny_bbpe()
        pieces = [tok.vocabulary.token(i) for i in tok.encode("hello wo")]
        assert pieces == ["hello", "Ġwo"]

    def test_unknown_byte_sequence_raises(self):
        tok = _tiny_bbpe()
        with pytest.raises(ValueError, match="unknown token"):
            tok.encode("zzz")

    def test_malformed_merge_rejected(self):
        with pytest.raises(ValueError, match="malformed merge"):
            ByteLevelBPETokenizer(Vocabulary(["a"]), ["bad"])


class TestWordHelpers:
    def test_words_of_handles_hyphens(self):
        assert words_of("a press-conference, today") == ["a", "press-conference", "today"]

    def test_complete_words_excludes_trailing_run(self):
        assert complete_words("the sun ri") == ["the", "sun"]

    def test_complete_words_with_final_boundary(self):
        assert complete_words("the sun. ") == ["the", "sun"]

    def test_complete_words_empty(self):
        assert complete_words("") == []
        assert complete_words("   ") == []
