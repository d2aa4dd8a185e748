"""Profile natural inputs, then cut off anything costlier than their p99."""

import numpy as np

from spongelab.attacks.fitness import SimulatedEnergyFitness
from spongelab.attacks.ga import GaConfig, ga_run
from spongelab.defense import guarded_translate_text, profile_natural
from spongelab.nlp.corpus import build_toy_vocab, natural_corpus, random_corpus
from spongelab.nlp.translator import build_toy_translator

vocab = build_toy_vocab()
model = build_toy_translator(vocab, seed=0)
profile = profile_natural(model, vocab, natural_corpus(500, 16, seed=1), percentile=99.0)
print(f"threshold {profile.threshold:.3e} pJ (p99 of {len(profile.costs)} natural inputs)")

res = ga_run(GaConfig(pool_size=200, generations=8, seed=0), SimulatedEnergyFitness(model, vocab), "nlp", length=16)
sponges = list(dict.fromkeys(ind.payload for ind in res.pool))[:100]

for name, texts in [("natural", natural_corpus(500, 16, seed=2)), ("random", random_corpus(200, 16, seed=3)), ("sponge", sponges)]:
    out = [guarded_translate_text(model, vocab, t, profile) for t in texts]
    over = max(o.cost for o in out) / profile.threshold
    print(f"{name:8s} rejected {np.mean([o.rejected for o in out]):6.1%}   worst spend {over:.2f}x threshold")
