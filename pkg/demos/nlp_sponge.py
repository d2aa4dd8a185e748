"""Evolve a 16-character sponge string against the toy translator.

Prints the best string, how it tokenizes, and how its simulated energy
compares with natural-like and random strings of the same length.
"""

import numpy as np

from spongelab.attacks.fitness import SimulatedEnergyFitness
from spongelab.attacks.ga import GaConfig, ga_run
from spongelab.nlp.corpus import build_toy_vocab, natural_corpus, random_corpus
from spongelab.nlp.text import detokenize, encode_text
from spongelab.nlp.translator import build_toy_translator, translate_text

vocab = build_toy_vocab()
model = build_toy_translator(vocab, seed=0)
energy = SimulatedEnergyFitness(model, vocab)

res = ga_run(
    GaConfig(pool_size=200, generations=10, seed=0),
    energy,
    "nlp",
    length=16,
    on_generation=lambda s: print(f"gen {s.generation:2d}  best {s.best:.3e} pJ  mean {s.mean:.3e} pJ"),
)
best = res.best.payload
toks = encode_text(best, vocab)
out = translate_text(model, vocab, best)
print(f"\nsponge      {best!r}")
print(f"tokens      {len(toks)}: {[vocab.pieces[i] for i in toks.ids]}")
print(f"decode      {out.dims.l_tout} steps -> {detokenize(out.output, vocab)!r}")

for name, texts in [("natural", natural_corpus(100, 16, 101)), ("random", random_corpus(100, 16, 202))]:
    e = np.mean([energy(t).value for t in texts])
    print(f"{name:8s}    mean {e:.3e} pJ   sponge is {energy(best).value / e:.1f}x")
