"""Attack the mock translation service through its socket only.

The GA sees nothing but client round-trip times. With the cache on and
elites re-evaluated, a cached elite answers fast and its fitness drops.
"""

import numpy as np

from spongelab.attacks.ga import GaConfig, ga_run
from spongelab.nlp.corpus import build_toy_vocab, natural_corpus
from spongelab.nlp.translator import build_toy_translator
from spongelab.service import BlackboxLatencyFitness, ServiceConfig, client_translate, serve

vocab = build_toy_vocab()
cfg = ServiceConfig(model=build_toy_translator(vocab, seed=0), vocab=vocab, cache_capacity=1000)

with serve(cfg) as handle:
    net = cfg.network(0)
    base = np.mean([client_translate(handle.endpoint, t, net)[1].duration for t in natural_corpus(50, 50, 101)])
    fit = BlackboxLatencyFitness(handle.endpoint, net, repeats=1)
    res = ga_run(GaConfig(pool_size=50, generations=15, seed=0, reevaluate_elites=True), fit, "nlp", length=50)
    fit.close()

print(f"natural mean round trip  {base * 1e3:.1f} ms")
for h in res.history:
    print(f"gen {h.generation:2d}  best {h.best * 1e3:6.1f} ms  ({h.best / base:.1f}x)")
print(f"cached answers seen by the attacker: {sum(e.cached for e in fit.log)}")
