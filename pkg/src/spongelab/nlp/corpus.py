"""Toy vocabulary and a natural-like sentence generator.

Natural-like sentences are drawn only from whole words that are present in
the vocabulary, so each word encodes to one token, the way frequent words do
under a real subword dictionary.
"""

from __future__ import annotations

import numpy as np

from .text import ALPHABET, CONTINUATION, PUNCTUATION, RESERVED, Vocab

WORDS = """
a i am an as at be by do go he if in is it me my no of on or so to up us we
act add age ago air all and any are arm art ask bad bag bed big bit box boy
but buy can car cat cut day did dog dry eat egg end eye far few fly for fun
get got had has hat her him his hot how its job key kid law lay leg let lie
lot low man map may men mix new not now nut odd off oil old one our out own
pay put ran red run sad saw say sea see set she sit six sky son sun ten the
too top try two use war was way who why win yes yet you able area back bank
bear bird boat book call care city come cool data door draw east even fact
farm fear fire five foot four from game girl gold hair hand have hear help
high home hour into keep king lake last left like list long lose made make
mind more move must near next note only over park pass plan poor push read
rest ride rock rule said same seem ship show sign size snow some soon stay
stop sure talk team than them they this tree turn very walk want wash well
west when wife wind word yard your about after alone begin bread build child
clear could drink earth field floor fruit green heart house laugh light
month music night often other party plant quiet round since smile south
spend start stone study table their these think today until where while
whole write animal answer autumn before better bridge garden letter little
mother number people person school second simple sister spring summer system
winter yellow
""".split()

# Word-initial fragments, then continuation fragments (stored without the
# ``##`` marker here). "ath", "az", "agor", "aph", "aphobia" and "bi" are the
# pieces of the classic athazagoraphobia example.
INITIAL_FRAGMENTS = """
ath un re th st ch sh pr co de ex qu wh br cr fl gr tr pl sp str
""".split()
CONTINUATION_FRAGMENTS = """
az agor aph aphobia bi ing ed er ly es tion ment ness al an en on or ar le
re th st nd ou ea ic ive ous ful less est ter ent ion ow ight ook ame ll ss
""".split()


def build_toy_vocab(alphabet: str = ALPHABET) -> Vocab:
    pieces: list[str] = list(RESERVED)
    seen = set(pieces)

    def add(p):
        if p not in seen:
            seen.add(p)
            pieces.append(p)

    for ch in alphabet:
        if not ch.isspace():
            add(ch)
    for ch in alphabet:
        if not ch.isspace():
            add(CONTINUATION + ch)
    for w in WORDS:
        add(w)
    for f in INITIAL_FRAGMENTS:
        add(f)
    for f in CONTINUATION_FRAGMENTS:
        add(CONTINUATION + f)
    vocab = Vocab(pieces)
    vocab.check_alphabet(alphabet)
    return vocab


_BY_LEN: dict[int, list[str]] = {}
for _w in WORDS:
    _BY_LEN.setdefault(len(_w), []).append(_w)
_MAX_WORD = max(_BY_LEN)


def natural_sentence(length: int, rng: np.random.Generator) -> str:
    """A sentence of exactly ``length`` characters built from vocabulary words."""
    if length < 1:
        raise ValueError("length must be positive")
    body = length
    end = ""
    if length >= 3 and rng.random() < 0.5:
        end = "."
        body -= 1
    words = []
    remaining = body
    while remaining > 0:
        if remaining <= _MAX_WORD and (remaining in _BY_LEN) and (rng.random() < 0.35 or remaining <= 3):
            n = remaining
        else:
            # leave room for a separating space and at least a one-letter word
            top = min(_MAX_WORD, remaining - 2)
            if top < 1:
                n = remaining
            else:
                n = int(rng.integers(1, top + 1))
                n = max(n, min(2, top))
        choices = _BY_LEN[n]
        words.append(choices[int(rng.integers(len(choices)))])
        remaining -= n
        if remaining > 0:
            remaining -= 1
    sentence = " ".join(words) + end
    assert len(sentence) == length, (sentence, length)
    return sentence


def natural_corpus(n: int, length: int, seed: int = 0) -> list[str]:
    rng = np.random.default_rng(seed)
    return [natural_sentence(length, rng) for _ in range(n)]


def random_string(length: int, rng: np.random.Generator, alphabet: str = ALPHABET) -> str:
    idx = rng.integers(len(alphabet), size=length)
    return "".join(alphabet[i] for i in idx)


def random_corpus(n: int, length: int, seed: int = 0, alphabet: str = ALPHABET) -> list[str]:
    rng = np.random.default_rng(seed)
    return [random_string(length, rng, alphabet) for _ in range(n)]


__all__ = [
    "WORDS",
    "build_toy_vocab",
    "natural_sentence",
    "natural_corpus",
    "random_string",
    "random_corpus",
    "PUNCTUATION",
]
