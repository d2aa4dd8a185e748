import math

import numpy as np
import pytest

from spongelab.attacks.exhaustive import exhaustive_worst_case
from spongelab.defense import (
    ConsumptionProfile,
    LatencyCostModel,
    guarded_infer,
    guarded_translate_text,
    inference_cost,
    max_unit_cost,
    profile_natural,
)
from spongelab.energy import simulate_energy
from spongelab.nlp.corpus import natural_corpus, random_corpus
from spongelab.nlp.text import encode_text
from spongelab.nlp.translator import translate_text
from spongelab.service import ServiceConfig, TranslationService


def nearest_rank(values, pct):
    s = sorted(values)
    return s[max(1, math.ceil(pct / 100 * len(s))) - 1]


@pytest.fixture(scope="module")
def profile(translator, vocab):
    return profile_natural(translator, vocab, natural_corpus(200, 16, seed=1), 99.0)


class TestProfile:
    def test_single_example(self, translator, vocab):
        p = profile_natural(translator, vocab, ["the cat ran"], 99.0)
        assert p.threshold == simulate_energy(translate_text(translator, vocab, "the cat ran").trace).energy_optimized_pj

    def test_percentile_100_is_max(self, translator, vocab):
        p = profile_natural(translator, vocab, natural_corpus(30, 16, seed=2), 100.0)
        assert p.threshold == max(p.costs)

    def test_p99_matches_sort_based_rank(self, profile):
        assert profile.threshold == nearest_rank(profile.costs, 99.0)
        for pct in (1, 10, 50, 73.5, 90, 99.9):
            assert ConsumptionProfile.from_costs(profile.costs, pct).threshold == nearest_rank(profile.costs, pct)

    def test_latency_source(self, translator, vocab):
        p = profile_natural(translator, vocab, natural_corpus(50, 16, seed=3), 99.0, "simulated-latency")
        steps = [translate_text(translator, vocab, s, record=False).dims.l_tout for s in natural_corpus(50, 16, seed=3)]
        assert p.threshold == pytest.approx(nearest_rank([0.005 + 0.002 * n for n in steps], 99.0))

    def test_deterministic(self, translator, vocab, profile):
        assert profile_natural(translator, vocab, natural_corpus(200, 16, seed=1), 99.0) == profile

    @pytest.mark.parametrize("kw", [{"costs": []}, {"costs": [1.0], "percentile": 0.0}, {"costs": [1.0], "percentile": 101.0}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ConsumptionProfile.from_costs(**kw)

    def test_unknown_source(self):
        with pytest.raises(ValueError):
            ConsumptionProfile.from_costs([1.0], 99.0, "vibes")

    def test_file_round_trip(self, tmp_path, profile):
        profile.save(tmp_path / "p.json")
        assert ConsumptionProfile.load(tmp_path / "p.json") == profile
        (tmp_path / "q.json").write_text('{"format": "x"}')
        with pytest.raises(ValueError):
            ConsumptionProfile.load(tmp_path / "q.json")


class TestGuard:
    def test_cheap_input_passes_unchanged(self, translator, vocab, profile):
        out = guarded_translate_text(translator, vocab, "the cat ran", profile)
        ref = translate_text(translator, vocab, "the cat ran")
        assert not out.rejected
        assert out.result.output == ref.output
        assert out.cost == simulate_energy(ref.trace).energy_optimized_pj

    def test_infinite_threshold(self, translator, vocab):
        p = ConsumptionProfile((1.0,), 99.0, math.inf, "simulated-energy")
        assert not any(guarded_translate_text(translator, vocab, s, p).rejected for s in random_corpus(20, 16, seed=4))

    def test_worst_case_rejected(self, translator, vocab):
        worst, _ = exhaustive_worst_case(translator, vocab, "qxz.", 3)
        p = profile_natural(translator, vocab, natural_corpus(200, 3, seed=5), 99.0)
        assert guarded_translate_text(translator, vocab, worst, p).rejected

    def test_overshoot_bounded(self, translator, vocab, profile):
        bound = 0.0
        for s in natural_corpus(50, 16, seed=6) + random_corpus(100, 16, seed=6):
            out = guarded_translate_text(translator, vocab, s, profile)
            step = max_unit_cost(translate_text(translator, vocab, s), "simulated-energy")
            assert out.cost <= profile.threshold + step
            if out.rejected:
                assert out.cost > profile.threshold and out.result is None
            bound = max(bound, out.cost)
        assert bound > profile.threshold  # some inputs were actually cut off

    def test_latency_guard_cuts_at_step(self, translator, vocab):
        p = ConsumptionProfile((0.02,), 100.0, 0.02, "simulated-latency")
        out = guarded_infer(translator, encode_text("qzxv wkjp", vocab), p)
        assert out.rejected
        assert out.steps == 8  # 0.005 + 0.002 * 8 = 0.021 is the first cost above 0.02
        assert out.cost <= p.threshold + max_unit_cost(None, "simulated-latency", latency=LatencyCostModel())

    def test_inference_cost(self, translator, vocab):
        r = translate_text(translator, vocab, "the cat ran")
        assert inference_cost(r, "simulated-latency") == pytest.approx(0.005 + 0.002 * r.dims.l_tout)
        with pytest.raises(ValueError):
            inference_cost(r, "vibes")

    def test_as_service_wrapper(self, translator, vocab, profile):
        svc = TranslationService(ServiceConfig(model=translator, vocab=vocab, guard=profile))
        assert svc.handle({"text": "the cat ran"})["ok"]
        rejected = [not svc.handle({"text": s})["ok"] for s in random_corpus(20, 16, seed=7)]
        assert np.mean(rejected) > 0.5
