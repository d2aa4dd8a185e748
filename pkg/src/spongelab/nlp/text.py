"""Normalizer and greedy longest-prefix subword encoder.

Words are segmented left to right, always taking the longest vocabulary
piece that prefixes the remaining characters. Pieces that continue a word
are stored with a ``##`` prefix, so word boundaries survive a round trip
through token ids. Every alphabet character exists both as a word-initial
and as a continuation piece, which makes encoding total.
"""

from __future__ import annotations

import re
import string
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

LETTERS = string.ascii_lowercase
PUNCTUATION = ".,!?'-/:;"
ALPHABET = LETTERS + " " + PUNCTUATION
FALLBACK_CHAR = "�"
CONTINUATION = "##"

PAD, EOS, UNK = "<pad>", "</s>", "<unk>"
RESERVED = (PAD, EOS, UNK)
PAD_ID, EOS_ID, UNK_ID = 0, 1, 2

_WORD_RE = re.compile(rf"[{LETTERS}]+|[^\s{LETTERS}]")


def normalize(text: str, alphabet: str = ALPHABET) -> list[str]:
    """Case-fold, replace out-of-alphabet characters, split punctuation off words.

    >>> normalize("Hello, world")
    ['hello', ',', 'world']
    """
    folded = unicodedata.normalize("NFKC", text).casefold()
    allowed = set(alphabet)
    cleaned = "".join(
        ch if ch in allowed else (" " if ch.isspace() else FALLBACK_CHAR) for ch in folded
    )
    return _WORD_RE.findall(cleaned)


class Vocab:
    """Subword inventory with dense ids; ids 0-2 are PAD, EOS and UNK."""

    def __init__(self, pieces: Iterable[str]):
        pieces = list(pieces)
        if tuple(pieces[:3]) != RESERVED:
            pieces = list(RESERVED) + [p for p in pieces if p not in RESERVED]
        if len(set(pieces)) != len(pieces):
            raise ValueError("duplicate vocabulary pieces")
        self.pieces: list[str] = pieces
        self.ids: dict[str, int] = {p: i for i, p in enumerate(pieces)}
        self._max_len = max(len(p) for p in pieces)

    def __len__(self):
        return len(self.pieces)

    def __contains__(self, piece):
        return piece in self.ids

    def check_alphabet(self, alphabet: str = ALPHABET) -> None:
        missing = [
            c
            for ch in alphabet
            if not ch.isspace()
            for c in (ch, CONTINUATION + ch)
            if c not in self.ids
        ]
        if missing:
            raise ValueError(f"vocabulary lacks single-character pieces: {missing}")

    def is_word_initial(self, token_id: int) -> bool:
        piece = self.pieces[token_id]
        return not piece.startswith(CONTINUATION)

    def save(self, path) -> None:
        Path(path).write_text("\n".join(self.pieces) + "\n")

    @classmethod
    def load(cls, path) -> "Vocab":
        lines = Path(path).read_text().split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        return cls(lines)

    def segment(self, word: str) -> list[int]:
        if word == FALLBACK_CHAR:
            return [UNK_ID]
        out = []
        pos, prefix = 0, ""
        while pos < len(word):
            for end in range(min(len(word), pos + self._max_len), pos, -1):
                tid = self.ids.get(prefix + word[pos:end])
                if tid is not None:
                    out.append(tid)
                    pos = end
                    break
            else:
                out.append(UNK_ID)
                pos += 1
            prefix = CONTINUATION
        return out


@dataclass(frozen=True)
class TokenSequence:
    ids: tuple[int, ...]
    source_text: str = ""
    truncated: bool = False
    confidence: float | None = field(default=None, compare=False)

    @property
    def l_t(self) -> int:
        return len(self.ids)

    def __len__(self):
        return len(self.ids)


def bpe_encode(words: Sequence[str] | str, vocab: Vocab) -> TokenSequence:
    """Encode normalized words (or raw text) into subword ids."""
    if isinstance(words, str):
        source = words
        words = normalize(words)
    else:
        source = " ".join(words)
    ids: list[int] = []
    for w in words:
        ids.extend(vocab.segment(w))
    return TokenSequence(tuple(ids), source)


def encode_text(text: str, vocab: Vocab) -> TokenSequence:
    return bpe_encode(text, vocab)


def detokenize(tokens: TokenSequence | Sequence[int], vocab: Vocab) -> str:
    """Join subwords back into space-separated normalized words.

    EOS and PAD are dropped; an unknown id raises ``KeyError``.
    """
    ids = tokens.ids if isinstance(tokens, TokenSequence) else tokens
    words: list[str] = []
    for tid in ids:
        if not 0 <= tid < len(vocab):
            raise KeyError(f"unknown token id {tid}")
        if tid in (PAD_ID, EOS_ID):
            continue
        piece = FALLBACK_CHAR if tid == UNK_ID else vocab.pieces[tid]
        if piece.startswith(CONTINUATION):
            if words:
                words[-1] += piece[len(CONTINUATION):]
            else:
                words.append(piece[len(CONTINUATION):])
        else:
            words.append(piece)
    return " ".join(words)
