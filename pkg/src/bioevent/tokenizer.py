"""Deterministic word-level tokenizer with character offsets and a flat vocab.

Tokens are whitespace-delimited words with edge punctuation split off;
word-internal hyphens/slashes/apostrophes are kept so entity mentions
like "TCF-1" stay one token. Reserved tokens (separators, markers,
template placeholders) are matched atomically before the word rule.
"""
from __future__ import annotations

import re
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Span

PAD = "[PAD]"
UNK = "[UNK]"
CLS = "[CLS]"
SEP = "[SEP]"
BOS = "<BOS>"
EOS = "<EOS>"
TEMPLATE_SEP = "<SEP>"
EVENT_DELIM = "<EVT>"
TYPE_TAG = "<T>"

SPECIAL_TOKENS = (PAD, UNK, CLS, SEP, BOS, EOS, TEMPLATE_SEP, EVENT_DELIM, TYPE_TAG)

_WORD = r"\w+(?:[-'/]\w+)*"
_PUNCT = r"[^\w\s]"

VOCAB_FILE_HEADER = "bioevent-vocab v1"


def _compile(atomic: Sequence[str]) -> re.Pattern:
    # Longer atomic tokens first so "<SEP>" wins over "<" + "SEP" + ">".
    parts = [re.escape(t) for t in sorted(atomic, key=len, reverse=True)]
    parts += [_WORD, _PUNCT]
    return re.compile("|".join(parts))


_BASE_RE = _compile(SPECIAL_TOKENS)


def tokenize(text: str, extra_atomic: Sequence[str] = ()) -> list[tuple[str, Span]]:
    """Split text into (token, character span) pairs.

    extra_atomic lists additional strings (e.g. template placeholders)
    matched as single tokens.
    """
    pattern = _compile(tuple(SPECIAL_TOKENS) + tuple(extra_atomic)) if extra_atomic else _BASE_RE
    return [(m.group(0), Span(m.start(), m.end())) for m in pattern.finditer(text)]


def words(text: str, extra_atomic: Sequence[str] = ()) -> list[str]:
    return [tok for tok, _ in tokenize(text, extra_atomic)]


class Vocab:
    """Bijective token<->id map with dense ids, reserved tokens first."""

    def __init__(self, tokens: Sequence[str]):
        self._tokens = list(tokens)
        self._index = {t: i for i, t in enumerate(self._tokens)}
        if len(self._index) != len(self._tokens):
            raise ValueError("duplicate tokens in vocab")
        for reserved in SPECIAL_TOKENS:
            if reserved not in self._index:
                raise ValueError(f"vocab missing reserved token {reserved!r}")
        # Placeholders and specials form the atomic set for tokenization.
        self._atomic = tuple(
            t for t in self._tokens if t.startswith("{") and t.endswith("}")
        )
        self.pad_id = self._index[PAD]
        self.unk_id = self._index[UNK]
        self.cls_id = self._index[CLS]
        self.sep_id = self._index[SEP]
        self.bos_id = self._index[BOS]
        self.eos_id = self._index[EOS]

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def id_of(self, token: str) -> int:
        return self._index.get(token, self.unk_id)

    def token_of(self, idx: int) -> str:
        return self._tokens[idx]

    @property
    def tokens(self) -> list[str]:
        return list(self._tokens)

    def encode(self, text: str) -> tuple[list[int], list[Span]]:
        """Token ids plus the character span of each token in ``text``."""
        pairs = tokenize(text, self._atomic)
        return [self.id_of(t) for t, _ in pairs], [s for _, s in pairs]

    def decode(self, ids: Iterable[int]) -> str:
        return " ".join(self._tokens[i] for i in ids)

    def save(self, path) -> None:
        lines = [VOCAB_FILE_HEADER] + self._tokens
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocab":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if not lines or lines[0] != VOCAB_FILE_HEADER:
            raise ValueError(f"{path}: not a vocab file (bad header)")
        return cls(lines[1:])


def build_vocab(
    texts: Iterable[str],
    placeholders: Sequence[str] = (),
    min_count: int = 1,
) -> Vocab:
    """Count word tokens over the sources and build a deterministic vocab.

    Order: reserved tokens, placeholder tokens (given order, deduped,
    reserved ones dropped), then corpus tokens sorted by (count desc,
    lexicographic).
    """
    placeholders = [p for p in dict.fromkeys(placeholders) if p not in SPECIAL_TOKENS]
    counts: dict[str, int] = {}
    atomic = tuple(placeholders)
    skip = set(SPECIAL_TOKENS) | set(placeholders)
    for text in texts:
        for token in words(text, atomic):
            if token in skip:
                continue
            counts[token] = counts.get(token, 0) + 1
    ranked = sorted(
        (t for t, c in counts.items() if c >= min_count),
        key=lambda t: (-counts[t], t),
    )
    return Vocab(list(SPECIAL_TOKENS) + placeholders + ranked)


def normalize(text: str, extra_atomic: Sequence[str] = ()) -> str:
    """Single-space join of the token stream; idempotent."""
    return " ".join(words(text, extra_atomic))
