"""Brute-force worst case over every string of a given length."""

from __future__ import annotations

import itertools

from ..energy import AsicCostModel
from ..nlp.text import Vocab
from ..nlp.translator import ToyTranslator
from .fitness import SimulatedEnergyFitness

SEARCH_LIMIT = 10**7


def exhaustive_worst_case(
    model: ToyTranslator,
    vocab: Vocab,
    alphabet: str,
    length: int,
    cost: AsicCostModel = AsicCostModel(),
    fitness: SimulatedEnergyFitness | None = None,
) -> tuple[str, float]:
    """Most expensive string of ``length`` characters; the first one found wins ties."""
    alphabet = "".join(dict.fromkeys(alphabet))
    if length < 1:
        raise ValueError("length must be positive")
    if len(alphabet) ** length > SEARCH_LIMIT:
        raise ValueError(f"{len(alphabet)}^{length} candidates exceed the {SEARCH_LIMIT} limit")
    fitness = fitness or SimulatedEnergyFitness(model, vocab, cost)
    best, best_e = None, -1.0
    for chars in itertools.product(alphabet, repeat=length):
        s = "".join(chars)
        if not s.strip():
            continue  # normalizes to nothing: there is no inference to price
        e = fitness(s).value
        if e > best_e:
            best, best_e = s, e
    if best is None:
        raise ValueError("alphabet yields no translatable string")
    return best, best_e
