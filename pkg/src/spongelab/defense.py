"""Cost profiling on natural inputs and a cutoff guard.

A profile records the cost of every example in a natural corpus and fixes
a threshold at a percentile of those costs (nearest-rank: the smallest cost
such that at least that share of examples is at or below it). The guard
runs inference with a monitor that prices the trace as it grows and aborts
as soon as the running cost passes the threshold, so an input can overshoot
by at most one encoder pass or one decode step.

Two cost sources are supported: ``simulated-energy`` (optimized-ASIC energy
in pJ) and ``simulated-latency`` (seconds, ``overhead + step_time`` per
decode step, the same model the mock service uses).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .energy import AsicCostModel, energy_from_counts, simulate_energy
from .nlp.text import TokenSequence, Vocab, encode_text
from .nlp.translator import ToyTranslator, TranslationResult, translate

PROFILE_FORMAT = "spongelab-consumption-profile"
PROFILE_VERSION = 1
COST_SOURCES = ("simulated-energy", "simulated-latency")


@dataclass(frozen=True)
class LatencyCostModel:
    overhead_time: float = 0.005
    step_time: float = 0.002


@dataclass(frozen=True)
class ConsumptionProfile:
    costs: tuple[float, ...]
    percentile: float
    threshold: float
    source: str

    def __post_init__(self):
        if self.source not in COST_SOURCES:
            raise ValueError(f"unknown cost source {self.source!r}")
        if not 0.0 < self.percentile <= 100.0:
            raise ValueError("percentile must lie in (0, 100]")

    @classmethod
    def from_costs(cls, costs: Sequence[float], percentile: float = 99.0, source: str = "simulated-energy") -> "ConsumptionProfile":
        if len(costs) == 0:
            raise ValueError("cannot profile an empty corpus")
        if not 0.0 < percentile <= 100.0:
            raise ValueError("percentile must lie in (0, 100]")
        threshold = float(np.percentile(np.asarray(costs, dtype=np.float64), percentile, method="inverted_cdf"))
        return cls(tuple(float(c) for c in costs), float(percentile), threshold, source)

    def save(self, path) -> None:
        doc = {
            "format": PROFILE_FORMAT,
            "version": PROFILE_VERSION,
            "source": self.source,
            "percentile": self.percentile,
            "threshold": self.threshold,
            "costs": list(self.costs),
        }
        Path(path).write_text(json.dumps(doc, indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "ConsumptionProfile":
        doc = json.loads(Path(path).read_text())
        if doc.get("format") != PROFILE_FORMAT or doc.get("version") != PROFILE_VERSION:
            raise ValueError(f"{path}: not a version-{PROFILE_VERSION} consumption profile")
        return cls(tuple(doc["costs"]), doc["percentile"], doc["threshold"], doc["source"])


def inference_cost(result: TranslationResult, source: str, cost: AsicCostModel = AsicCostModel(), latency: LatencyCostModel = LatencyCostModel()) -> float:
    if source == "simulated-energy":
        return simulate_energy(result.trace, cost).energy_optimized_pj
    if source == "simulated-latency":
        return latency.overhead_time + latency.step_time * result.dims.l_tout
    raise ValueError(f"unknown cost source {source!r}")


def profile_natural(
    model: ToyTranslator,
    vocab: Vocab,
    corpus: Sequence[str],
    percentile: float = 99.0,
    source: str = "simulated-energy",
    cost: AsicCostModel = AsicCostModel(),
    latency: LatencyCostModel = LatencyCostModel(),
) -> ConsumptionProfile:
    if len(corpus) == 0:
        raise ValueError("cannot profile an empty corpus")
    costs = [inference_cost(translate(model, encode_text(t, vocab)), source, cost, latency) for t in corpus]
    return ConsumptionProfile.from_costs(costs, percentile, source)


class GuardOutcome(NamedTuple):
    rejected: bool
    result: TranslationResult | None
    cost: float  # cost actually spent, including the step that crossed the line
    steps: int  # decode steps executed
    threshold: float


class _Cutoff(Exception):
    pass


class _Meter:
    """Prices the trace incrementally, exactly as simulate_energy would price it."""

    def __init__(self, source, cost, latency, threshold):
        self.source, self.cost, self.latency, self.threshold = source, cost, latency, threshold
        self.mult = self.words = 0
        self.steps = 0
        self.spent = 0.0

    def __call__(self, entries):
        if self.source == "simulated-energy":
            for e in entries:
                self.mult += e.mult_nonzero if self.cost.zero_skip_enabled else e.mult_total
                self.words += e.dram_words_compressed if self.cost.dram_compress_enabled else e.dram_words_raw
            self.spent = energy_from_counts(self.mult, self.words, self.cost)
        if entries and entries[0].layer_name.startswith("dec"):
            self.steps += 1
        if self.source == "simulated-latency":
            self.spent = self.latency.overhead_time + self.latency.step_time * self.steps
        if self.spent > self.threshold:
            raise _Cutoff


def guarded_infer(
    model: ToyTranslator,
    tokens: TokenSequence,
    profile: ConsumptionProfile,
    cost: AsicCostModel = AsicCostModel(),
    latency: LatencyCostModel = LatencyCostModel(),
) -> GuardOutcome:
    """Translate, aborting once the running cost exceeds the profile threshold."""
    meter = _Meter(profile.source, cost, latency, profile.threshold)
    try:
        result = translate(model, tokens, monitor=meter)
    except _Cutoff:
        return GuardOutcome(True, None, meter.spent, meter.steps, profile.threshold)
    return GuardOutcome(False, result, meter.spent, meter.steps, profile.threshold)


def guarded_translate_text(model, vocab: Vocab, text: str, profile: ConsumptionProfile, **kw) -> GuardOutcome:
    return guarded_infer(model, encode_text(text, vocab), profile, **kw)


def max_unit_cost(result: TranslationResult, source: str, cost: AsicCostModel = AsicCostModel(), latency: LatencyCostModel = LatencyCostModel()) -> float:
    """Largest cost of one guard unit (the encoder or one decode step) in a full run."""
    if source == "simulated-latency":
        return max(latency.overhead_time, latency.step_time)
    units: dict[str, list] = {}
    for e in result.trace:
        key = e.layer_name.split(".", 1)[0]
        units.setdefault(key, []).append(e)
    best = 0.0
    for entries in units.values():
        m = sum(e.mult_nonzero if cost.zero_skip_enabled else e.mult_total for e in entries)
        w = sum(e.dram_words_compressed if cost.dram_compress_enabled else e.dram_words_raw for e in entries)
        best = max(best, energy_from_counts(m, w, cost))
    return best


__all__ = [
    "ConsumptionProfile",
    "GuardOutcome",
    "LatencyCostModel",
    "guarded_infer",
    "guarded_translate_text",
    "inference_cost",
    "max_unit_cost",
    "profile_natural",
]
