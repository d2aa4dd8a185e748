"""Push the reference CNN toward dense activations, white-box and black-box.

L-BFGS maximizes the activation norm from random starts; the GA evolves
natural-like images for simulated energy. IBP gives the ceiling.
"""

import numpy as np

from spongelab.attacks.ga import FitnessValue, GaConfig, ga_run
from spongelab.attacks.lbfgs import lbfgs_attack
from spongelab.energy import simulate_energy
from spongelab.vision import build_reference_cnn, cnn_forward, ibp_max_density, natural_images, random_images

cnn = build_reference_cnn(seed=0)


def energy(img):
    r = cnn_forward(cnn, img)
    return FitnessValue(simulate_energy(r.trace).energy_optimized_pj, "simulated-energy"), int(np.argmax(r.logits))


init, _ = natural_images(100, seed=7)
ga = ga_run(GaConfig(pool_size=100, generations=20, seed=0), energy, "cv", initial=init)

sets = {
    "lbfgs": [lbfgs_attack(cnn, x) for x in random_images(50, seed=9)],
    "ga": [ind.payload for ind in ga.pool],
    "natural": natural_images(100, seed=11)[0],
    "random": random_images(100, seed=13),
}
print(f"{'class':8s} {'density':>8s} {'energy ratio':>13s}")
for name, imgs in sets.items():
    fw = [cnn_forward(cnn, x) for x in imgs]
    d = np.mean([f.density.overall_density for f in fw])
    r = np.mean([simulate_energy(f.trace).energy_ratio for f in fw])
    print(f"{name:8s} {d:8.4f} {r:13.4f}")
print(f"{'ibp max':8s} {ibp_max_density(cnn).overall_density:8.4f}")
