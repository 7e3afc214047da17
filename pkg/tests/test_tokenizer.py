"""Tokenization rules, offset integrity, and vocabulary behavior."""
import pytest

from bioevent.corpus import Span
from bioevent.tokenizer import (
    SPECIAL_TOKENS,
    Vocab,
    build_vocab,
    normalize,
    tokenize,
    words,
)


def test_tokenize_offsets_hand_checked():
    assert tokenize("TCF-1 alpha") == [
        ("TCF-1", Span(0, 5)),
        ("alpha", Span(6, 11)),
    ]


def test_tokenize_splits_edge_punctuation():
    assert words("(IL-2).") == ["(", "IL-2", ")", "."]


def test_tokenize_keeps_internal_joiners():
    assert words("p50/p65 won't bind") == ["p50/p65", "won't", "bind"]


def test_tokenize_special_tokens_are_atomic():
    assert words("a <SEP> b <EVT> c") == ["a", "<SEP>", "b", "<EVT>", "c"]


def test_tokenize_extra_atomic_placeholders():
    extra = ("{Trigger}", "{Role_Theme}")
    toks = words("x {Trigger} <SEP> {Role_Theme}", extra)
    assert toks == ["x", "{Trigger}", "<SEP>", "{Role_Theme}"]
    # Without the atomic hint the braces split off.
    assert words("{Trigger}")[0] == "{"


def test_spans_slice_back_to_tokens():
    text = "NF-kB binds the IL-2 promoter."
    for token, span in tokenize(text):
        assert text[span.start : span.end] == token


def test_normalize_is_idempotent():
    text = "  GATA3   binding, (PromA). "
    once = normalize(text)
    assert normalize(once) == once
    assert once == "GATA3 binding , ( PromA ) ."


def test_build_vocab_order_reserved_then_placeholders_then_counts():
    vocab = build_vocab(
        ["b a a c b a"], placeholders=("{Trigger}", "{Role_X}", "{Trigger}")
    )
    tokens = vocab.tokens
    assert tuple(tokens[: len(SPECIAL_TOKENS)]) == SPECIAL_TOKENS
    n = len(SPECIAL_TOKENS)
    assert tokens[n : n + 2] == ["{Trigger}", "{Role_X}"]  # deduped, given order
    # a:3, b:2, c:1 -> count desc, ties lexicographic.
    assert tokens[n + 2 :] == ["a", "b", "c"]


def test_build_vocab_min_count_filters():
    vocab = build_vocab(["a a b"], min_count=2)
    assert "a" in vocab
    assert "b" not in vocab


def test_vocab_encode_decode_and_unk():
    vocab = build_vocab(["alpha beta"])
    ids, spans = vocab.encode("alpha gamma")
    assert vocab.decode(ids) == "alpha [UNK]"
    assert [s.start for s in spans] == [0, 6]


def test_vocab_encode_is_atomic_for_placeholders():
    vocab = build_vocab(["x"], placeholders=("{Role_Theme}",))
    ids, _ = vocab.encode("{Role_Theme} x")
    assert vocab.decode(ids) == "{Role_Theme} x"


def test_vocab_ids_are_dense_and_bijective():
    vocab = build_vocab(["one two three"])
    for idx in range(len(vocab)):
        assert vocab.id_of(vocab.token_of(idx)) == idx


def test_vocab_reserved_ids():
    vocab = build_vocab(["w"])
    assert vocab.pad_id == 0
    assert vocab.token_of(vocab.pad_id) == "[PAD]"
    assert vocab.token_of(vocab.unk_id) == "[UNK]"
    assert vocab.token_of(vocab.cls_id) == "[CLS]"
    assert vocab.token_of(vocab.sep_id) == "[SEP]"
    assert vocab.token_of(vocab.bos_id) == "<BOS>"
    assert vocab.token_of(vocab.eos_id) == "<EOS>"


def test_vocab_save_load_round_trip(tmp_path):
    vocab = build_vocab(["alpha beta gamma"], placeholders=("{Trigger}",))
    path = tmp_path / "vocab.txt"
    vocab.save(path)
    loaded = Vocab.load(path)
    assert loaded.tokens == vocab.tokens
    ids, _ = vocab.encode("alpha {Trigger}")
    loaded_ids, _ = loaded.encode("alpha {Trigger}")
    assert ids == loaded_ids


def test_vocab_load_rejects_wrong_header(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("not-a-vocab\n[PAD]\n", encoding="utf-8")
    with pytest.raises(ValueError):
        Vocab.load(path)


def test_vocab_rejects_duplicate_tokens():
    with pytest.raises(ValueError):
        Vocab(list(SPECIAL_TOKENS) + ["dup", "dup"])
