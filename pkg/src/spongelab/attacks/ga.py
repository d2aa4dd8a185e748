"""Genetic search for sponge inputs.

Each generation is evaluated, the top fraction is kept as parents, and the
rest of the pool is refilled with mutated crossovers of random parent pairs.
The best individual is carried over unmutated (and, for images, the best of
each predicted class), so the best fitness never drops between generations
unless elites are deliberately re-measured.

Payload sizes never change: text keeps its character count and images keep
their shape.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from ..nlp.text import ALPHABET

log = logging.getLogger(__name__)

SOURCES = ("simulated-energy", "measured-latency", "measured-energy", "estimated-ops")


@dataclass(frozen=True, order=False)
class FitnessValue:
    value: float
    source: str

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown fitness source {self.source!r}")
        if not math.isfinite(self.value) or self.value < 0:
            raise ValueError(f"fitness must be finite and nonnegative, got {self.value!r}")

    def _check(self, other):
        if not isinstance(other, FitnessValue):
            return NotImplemented
        if other.source != self.source:
            raise TypeError(f"cannot compare {self.source} fitness with {other.source} fitness")
        return None

    def __lt__(self, other):
        bad = self._check(other)
        return bad if bad is not None else self.value < other.value

    def __le__(self, other):
        bad = self._check(other)
        return bad if bad is not None else self.value <= other.value

    def __gt__(self, other):
        bad = self._check(other)
        return bad if bad is not None else self.value > other.value

    def __ge__(self, other):
        bad = self._check(other)
        return bad if bad is not None else self.value >= other.value


@dataclass
class Individual:
    payload: object
    fitness: FitnessValue | None = None
    label: int | None = None


@dataclass(frozen=True)
class GaConfig:
    pool_size: int = 1000
    generations: int = 1000
    selection_fraction: float = 0.10
    mutation_rate: float = 0.05
    flip_probability: float = 0.5
    dilution_fraction: float = 0.01
    min_classes_preserved: int = 20
    seed: int = 0
    reevaluate_elites: bool = False

    def __post_init__(self):
        if self.pool_size < 10:
            raise ValueError("pool_size must be at least 10")
        if self.generations < 1:
            raise ValueError("generations must be at least 1")
        for name in ("selection_fraction", "dilution_fraction"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1]")
        for name in ("mutation_rate", "flip_probability"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.min_classes_preserved < 0:
            raise ValueError("min_classes_preserved must be nonnegative")

    def config_hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


class GenerationStats(NamedTuple):
    generation: int
    best: float
    mean: float
    source: str
    best_payload_digest: str
    best_payload: object = None


class GaResult(NamedTuple):
    pool: list[Individual]  # final generation, best first
    history: list[GenerationStats]

    @property
    def best(self) -> Individual:
        return self.pool[0]


# -- operators ------------------------------------------------------------------


def crossover_nlp(a: str, b: str, rng: np.random.Generator, flip_probability: float = 0.5) -> str:
    """Left half of ``a`` joined to the right half of ``b``.

    The left half has ``len // 2`` characters. With probability
    ``flip_probability`` the halves trade places, giving right(b) + left(a).
    """
    if len(a) != len(b):
        raise ValueError(f"parent lengths differ: {len(a)} vs {len(b)}")
    cut = len(a) // 2
    if rng.random() < flip_probability:
        return b[cut:] + a[:cut]
    return a[:cut] + b[cut:]


def crossover_cv(a: np.ndarray, b: np.ndarray, rng: np.random.Generator, mask: np.ndarray | None = None) -> np.ndarray:
    """Per-pixel blend ``a * mask + b * (1 - mask)`` with a binary mask."""
    if a.shape != b.shape:
        raise ValueError(f"parent shapes differ: {a.shape} vs {b.shape}")
    if mask is None:
        mask = rng.random(a.shape) < 0.5
    return np.where(mask, a, b)


def mutate_nlp(s: str, rng: np.random.Generator, rate: float, alphabet: str = ALPHABET) -> str:
    if not 0.0 <= rate <= 1.0:
        raise ValueError("rate must lie in [0, 1]")
    hit = rng.random(len(s)) < rate
    if not hit.any():
        return s
    repl = rng.integers(len(alphabet), size=len(s))
    return "".join(alphabet[r] if h else ch for ch, h, r in zip(s, hit, repl))


def mutate_cv(image: np.ndarray, rng: np.random.Generator, fraction: float = 0.01) -> np.ndarray:
    """Resample exactly ``ceil(fraction * N)`` distinct pixels uniformly in [0, 1]."""
    out = np.array(image, dtype=np.float64, copy=True)
    flat = out.reshape(-1)
    k = math.ceil(fraction * flat.size - 1e-9)
    idx = rng.choice(flat.size, size=k, replace=False)
    flat[idx] = rng.random(k)
    return out


def select_top(pool: Sequence[Individual], config: GaConfig, domain: str = "nlp") -> list[Individual]:
    """Top ``ceil(fraction * len(pool))`` individuals, stable under ties.

    For images the best individual of each of the ``min_classes_preserved``
    best-scoring predicted classes is retained as well.
    """
    if any(ind.fitness is None for ind in pool):
        raise ValueError("every individual needs a fitness before selection")
    order = sorted(range(len(pool)), key=lambda i: -pool[i].fitness.value)
    n_keep = math.ceil(config.selection_fraction * len(pool) - 1e-9)
    keep = order[:n_keep]
    if domain == "cv" and config.min_classes_preserved > 0:
        best_of: dict = {}
        for i in order:
            lab = pool[i].label
            if lab is not None and lab not in best_of:
                best_of[lab] = i
        extra = list(best_of.values())[: config.min_classes_preserved]
        chosen = set(keep)
        keep += [i for i in extra if i not in chosen]
    return [pool[i] for i in keep]


# -- main loop ------------------------------------------------------------------


def _digest(payload) -> str:
    if isinstance(payload, str):
        data = payload.encode()
    else:
        data = np.ascontiguousarray(payload, dtype=np.float64).tobytes()
    return hashlib.sha256(data).hexdigest()[:12]


def _coerce(result, default_source: str | None):
    label = None
    if isinstance(result, tuple):
        result, label = result
    if not isinstance(result, FitnessValue):
        result = FitnessValue(float(result), default_source or "simulated-energy")
    return result, label


def ga_run(
    config: GaConfig,
    fitness_fn: Callable,
    domain: str = "nlp",
    *,
    length: int | None = None,
    alphabet: str = ALPHABET,
    initial: Sequence | None = None,
    image_shape: tuple[int, ...] | None = None,
    source: str | None = None,
    on_generation: Callable[[GenerationStats], None] | None = None,
) -> GaResult:
    """Evolve a pool for ``config.generations`` evaluated generations.

    ``fitness_fn(payload)`` returns a number, a :class:`FitnessValue`, or a
    ``(fitness, label)`` pair (images). Plain numbers are tagged with
    ``source``. A raising evaluation scores zero and is logged.
    """
    if domain not in ("nlp", "cv"):
        raise ValueError(f"unknown domain {domain!r}")
    rng = np.random.default_rng(config.seed)

    if initial is not None:
        payloads = list(initial)
        if len(payloads) < config.pool_size:
            raise ValueError("initial pool smaller than pool_size")
        payloads = payloads[: config.pool_size]
    elif domain == "nlp":
        if length is None or length < 1:
            raise ValueError("text search needs a positive length")
        payloads = [
            "".join(alphabet[i] for i in rng.integers(len(alphabet), size=length))
            for _ in range(config.pool_size)
        ]
    else:
        if image_shape is None:
            raise ValueError("image search needs image_shape or an initial pool")
        payloads = [rng.random(image_shape) for _ in range(config.pool_size)]
    if domain == "nlp":
        size = len(payloads[0])
        if any(len(p) != size for p in payloads):
            raise ValueError("initial payloads differ in length")
    else:
        payloads = [np.asarray(p, dtype=np.float64) for p in payloads]
        shape = payloads[0].shape
        if any(p.shape != shape for p in payloads):
            raise ValueError("initial payloads differ in shape")

    pool = [Individual(p) for p in payloads]
    fixed_source = source

    def evaluate(ind: Individual) -> None:
        nonlocal fixed_source
        try:
            fit, label = _coerce(fitness_fn(ind.payload), fixed_source)
        except Exception as exc:  # a broken candidate must not end the run
            log.warning("fitness evaluation failed (%s: %s); scoring 0", type(exc).__name__, exc)
            fit, label = FitnessValue(0.0, fixed_source or "simulated-energy"), None
        if fixed_source is None:
            fixed_source = fit.source
        elif fit.source != fixed_source:
            raise TypeError(f"fitness source changed from {fixed_source} to {fit.source}")
        ind.fitness, ind.label = fit, label

    history: list[GenerationStats] = []
    for gen in range(config.generations):
        for ind in pool:
            if ind.fitness is None or config.reevaluate_elites:
                evaluate(ind)
        values = np.array([ind.fitness.value for ind in pool])
        best_i = int(np.argmax(values))
        best_payload = pool[best_i].payload
        stats = GenerationStats(gen, float(values[best_i]), float(values.mean()), fixed_source, _digest(best_payload), best_payload)
        history.append(stats)
        if on_generation is not None:
            on_generation(stats)
        if gen == config.generations - 1:
            break

        parents = select_top(pool, config, domain)
        # elites: the overall best plus, for images, the per-class bests
        elites = [parents[0]]
        if domain == "cv":
            n_top = math.ceil(config.selection_fraction * len(pool) - 1e-9)
            elites += parents[n_top:]
        nxt = [Individual(e.payload, e.fitness, e.label) for e in elites]
        while len(nxt) < config.pool_size:
            i, j = rng.integers(len(parents), size=2)
            a, b = parents[i].payload, parents[j].payload
            if domain == "nlp":
                child = mutate_nlp(crossover_nlp(a, b, rng, config.flip_probability), rng, config.mutation_rate, alphabet)
            else:
                child = mutate_cv(crossover_cv(a, b, rng), rng, config.dilution_fraction)
            nxt.append(Individual(child))
        pool = nxt

    order = sorted(range(len(pool)), key=lambda i: -pool[i].fitness.value)
    return GaResult([pool[i] for i in order], history)


def history_rows(history: Sequence[GenerationStats]) -> list[tuple]:
    """``(generation, best, mean, source)`` rows for tabular export."""
    return [(h.generation, h.best, h.mean, h.source) for h in history]
