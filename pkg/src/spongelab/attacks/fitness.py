"""Fitness functions over the toy translator."""

from __future__ import annotations

from ..energy import AsicCostModel, EnergyReport, simulate_energy
from ..measurement import SimulatedClock, time_inference
from ..nlp.text import Vocab, encode_text
from ..nlp.translator import ToyTranslator, pipeline_cost_estimate, pipeline_traffic_estimate, translate
from .ga import FitnessValue


class SimulatedEnergyFitness:
    """Optimized-ASIC energy (pJ) of translating a string; memoized per token sequence.

    Strings that normalize to the same token ids cost the same, so the memo
    is keyed on ids rather than characters.
    """

    source = "simulated-energy"
    reentrant = True

    def __init__(self, model: ToyTranslator, vocab: Vocab, cost: AsicCostModel = AsicCostModel()):
        self.model, self.vocab, self.cost = model, vocab, cost
        self._memo: dict[tuple[int, ...], EnergyReport] = {}
        self.evaluations = 0

    def report(self, text: str) -> EnergyReport:
        ids = encode_text(text, self.vocab).ids
        rep = self._memo.get(ids)
        if rep is None:
            self.evaluations += 1
            rep = simulate_energy(translate(self.model, encode_text(text, self.vocab)).trace, self.cost)
            self._memo[ids] = rep
        return rep

    def __call__(self, text: str) -> FitnessValue:
        return FitnessValue(self.report(text).energy_optimized_pj, self.source)


class EstimatedOpsFitness:
    """Energy from shapes alone: closed-form multiplies and DRAM words, priced densely.

    Needs only the output length, so it runs the untraced decoder.
    """

    source = "estimated-ops"
    reentrant = True

    def __init__(self, model: ToyTranslator, vocab: Vocab, cost: AsicCostModel = AsicCostModel()):
        self.model, self.vocab, self.cost = model, vocab, cost

    def __call__(self, text: str) -> FitnessValue:
        dims = translate(self.model, encode_text(text, self.vocab), record=False).dims
        mults = pipeline_cost_estimate(dims, self.model)
        words = pipeline_traffic_estimate(dims, self.model)
        value = mults * self.cost.fp_mult_energy_pj + words * self.cost.dram_access_energy_pj
        return FitnessValue(value, self.source)


class SimulatedLatencyFitness:
    """Latency measured by the timing harness on a simulated clock.

    Running the model advances the clock by ``overhead_time + step_time``
    per decode step, so the measurement sees only elapsed time.
    """

    source = "measured-latency"
    reentrant = False

    def __init__(self, model: ToyTranslator, vocab: Vocab, overhead_time: float = 0.005, step_time: float = 0.002, warmup_count: int = 0):
        self.model, self.vocab = model, vocab
        self.overhead_time, self.step_time = overhead_time, step_time
        self.warmup_count = warmup_count
        self.clock = SimulatedClock()

    def __call__(self, text: str) -> FitnessValue:
        tokens = encode_text(text, self.vocab)

        def run():
            dims = translate(self.model, tokens, record=False).dims
            self.clock.advance(self.overhead_time + self.step_time * dims.l_tout)

        sample = time_inference(run, self.warmup_count, 1, self.clock, input_id=text)[0]
        if sample.error is not None:
            raise RuntimeError(sample.error)
        return FitnessValue(sample.duration, self.source)
