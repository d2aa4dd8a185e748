import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spongelab.energy import simulate_energy
from spongelab.nlp.corpus import build_toy_vocab, natural_corpus, random_corpus
from spongelab.nlp.text import ALPHABET, EOS_ID, UNK_ID, TokenSequence, encode_text
from spongelab.nlp.translator import (
    MAX_POSITIONS,
    N_POS,
    ToyTranslator,
    build_toy_translator,
    cross_attention_mults,
    familiarity,
    pipeline_cost_estimate,
    pipeline_traffic_estimate,
    translate,
    translate_text,
)

_VOCAB = build_toy_vocab()
_MODEL = build_toy_translator(_VOCAB, seed=0)


def matmul_shapes(n, T, d=32, f=48, V=436):
    """Every (rows, inner, cols) product of an inference, listed layer by layer."""
    shapes = [(n, d, d)] * 3 + [(n, d, n), (n, n, d)]  # encoder q, k, v, scores, mix
    shapes += [(n, d, f), (n, f, d)]  # encoder ffn
    for t in range(T):
        h = t + 1
        shapes += [(1, d, d), (h, d, d), (h, d, d), (h, d, 1), (1, h, d)]  # decoder self-attention
        shapes += [(n, d, d), (n, d, d), (n, d, 1), (1, n, d)]  # cross-attention, memory re-projected
        shapes += [(1, N_POS, 1), (1, 1, d)]  # end-of-source slot
        shapes += [(1, d, f), (1, f, d)]  # ffn
        shapes += [(1, d, V), (1, d, 1)]  # output projection and advance gate
    return sum(a * b * c for a, b, c in shapes)


class TestHandCounts:
    def test_three_tokens_immediate_eos(self, vocab):
        model = build_toy_translator(vocab, seed=0, eos_bias=1e3)
        r = translate_text(model, vocab, "the cat ran")
        assert r.dims == (3, 1, 32, 32)
        assert r.trace.totals()["mult_total"] == 45580
        assert matmul_shapes(3, 1) == 45580

    def test_three_tokens_reference(self, vocab, translator):
        r = translate_text(translator, vocab, "the cat ran")
        assert r.dims == (3, 4, 32, 32)
        assert r.trace.totals()["mult_total"] == 137968
        assert matmul_shapes(3, 4) == 137968


class TestTranslate:
    def test_immediate_eos(self, vocab):
        model = build_toy_translator(vocab, seed=0, eos_bias=1e3)
        r = translate_text(model, vocab, "hello world, how are you")
        assert r.output.ids == (EOS_ID,)
        assert r.dims.l_tout == 1
        steps = {e.layer_name.split(".")[0] for e in r.trace if e.layer_name.startswith("dec")}
        assert steps == {"dec0"}

    def test_cross_attention_linear_in_input(self, vocab):
        model = build_toy_translator(vocab, seed=0, eos_bias=-1e3, max_decode_steps=6)
        short = translate(model, encode_text("the cat", vocab))
        long = translate(model, encode_text("the cat the dog", vocab))
        assert (short.dims.l_tin, long.dims.l_tin) == (2, 4)
        assert short.dims.l_tout == long.dims.l_tout == 6
        assert cross_attention_mults(long.trace) == 2 * cross_attention_mults(short.trace)

    def test_truncation_at_cap(self, vocab):
        model = build_toy_translator(vocab, seed=0, eos_bias=-1e3)
        r = translate_text(model, vocab, "the cat ran")
        assert r.output.truncated
        assert r.dims.l_tout == model.decode_cap(3) == 12
        assert EOS_ID not in r.output.ids

    def test_natural_input_terminates_with_eos(self, vocab, translator):
        for s in natural_corpus(20, 16, seed=5):
            r = translate_text(translator, vocab, s)
            assert not r.output.truncated
            assert r.output.ids[-1] == EOS_ID

    def test_argmax_ties_pick_lowest_id(self, translator):
        p = {k: np.array(v) for k, v in translator.params.items()}
        p["out_w"] = np.zeros_like(p["out_w"])
        p["out_b"] = np.zeros_like(p["out_b"])
        p["out_b"][:2] = -1.0  # PAD and EOS lose; every other id ties
        model = ToyTranslator(p, translator.vocab_size, max_decode_steps=3)
        r = translate(model, TokenSequence((10, 11)))
        assert r.output.ids == (UNK_ID,) * 3

    def test_deterministic_and_untraced_agree(self, vocab, translator):
        for s in random_corpus(10, 16, seed=2):
            a = translate_text(translator, vocab, s)
            b = translate_text(translator, vocab, s)
            c = translate_text(translator, vocab, s, record=False)
            assert a.output == b.output == c.output
            assert a.trace == b.trace
            assert a.dims == c.dims
            assert len(c.trace) == 0

    def test_confidence_in_unit_interval(self, vocab, translator):
        for s in natural_corpus(5, 16, seed=1) + random_corpus(5, 16, seed=1):
            conf = translate_text(translator, vocab, s).output.confidence
            assert 0.0 <= conf <= 1.0

    def test_random_inputs_cost_more(self, vocab, translator):
        nat = [simulate_energy(translate_text(translator, vocab, s).trace).energy_optimized_pj for s in natural_corpus(30, 16, 0)]
        rnd = [simulate_energy(translate_text(translator, vocab, s).trace).energy_optimized_pj for s in random_corpus(30, 16, 0)]
        assert np.mean(rnd) > 2 * np.mean(nat)

    def test_monitor_sees_every_entry_and_can_abort(self, vocab, translator):
        seen = []
        r = translate_text(translator, vocab, "the cat ran", monitor=seen.extend)
        assert seen == r.trace.layers

        class Stop(Exception):
            pass

        def stop_after_encoder(entries):
            if entries[0].layer_name.startswith("dec"):
                raise Stop

        with pytest.raises(Stop):
            translate_text(translator, vocab, "the cat ran", monitor=stop_after_encoder)
        with pytest.raises(ValueError, match="monitor"):
            translate_text(translator, vocab, "the cat", monitor=seen.extend, record=False)

    @pytest.mark.parametrize(
        "ids,msg",
        [((), "empty"), ((5,) * (MAX_POSITIONS + 1), "limit"), ((10_000,), "vocabulary"), ((-1,), "vocabulary")],
    )
    def test_invalid_input(self, translator, ids, msg):
        with pytest.raises(ValueError, match=msg):
            translate(translator, TokenSequence(ids))


class TestCostEstimate:
    def test_matches_trace_on_corpus(self, vocab, translator):
        texts = random_corpus(5, 16, seed=9) + natural_corpus(5, 16, seed=9)
        for s in texts:
            r = translate_text(translator, vocab, s)
            t = r.trace.totals()
            assert pipeline_cost_estimate(r.dims, translator) == t["mult_total"]
            assert pipeline_traffic_estimate(r.dims, translator) == t["dram_words_raw"]

    @settings(max_examples=60, deadline=None)
    @given(st.text(alphabet=ALPHABET, min_size=1, max_size=24).filter(str.strip))
    def test_matches_trace_property(self, text):
        r = translate_text(_MODEL, _VOCAB, text)
        assert pipeline_cost_estimate(r.dims, _MODEL) == r.trace.totals()["mult_total"]
        assert pipeline_traffic_estimate(r.dims, _MODEL) == r.trace.totals()["dram_words_raw"]

    def test_single_step(self, vocab):
        model = build_toy_translator(vocab, seed=3, eos_bias=1e3)
        r = translate_text(model, vocab, "a b c d e")
        assert r.dims.l_tout == 1
        assert pipeline_cost_estimate(r.dims, model) == r.trace.totals()["mult_total"] == matmul_shapes(5, 1)

    def test_scaling(self, translator):
        base = pipeline_cost_estimate((4, 10, 32, 32), translator)
        assert pipeline_cost_estimate((8, 10, 32, 32), translator) > base
        assert pipeline_cost_estimate((4, 20, 32, 32), translator) > 2 * base - pipeline_cost_estimate((4, 1, 32, 32), translator)


class TestModel:
    def test_checkpoint_round_trip(self, tmp_path, vocab, translator):
        translator.save(tmp_path / "m.json")
        loaded = ToyTranslator.load(tmp_path / "m.json")
        for s in ["the cat ran", "xq zv", "athazagoraphpbia"]:
            a, b = translate_text(translator, vocab, s), translate_text(loaded, vocab, s)
            assert a.output == b.output and a.trace == b.trace

    def test_checkpoint_format_checked(self, tmp_path):
        (tmp_path / "m.json").write_text('{"format": "other"}')
        with pytest.raises(ValueError, match="checkpoint"):
            ToyTranslator.load(tmp_path / "m.json")

    def test_shape_validation(self, translator):
        p = dict(translator.params)
        p["dec_w1"] = np.zeros((3, 3))
        with pytest.raises(ValueError, match="shape"):
            ToyTranslator(p, translator.vocab_size)

    def test_params_read_only(self, translator):
        with pytest.raises(ValueError):
            translator.params["out_w"][0, 0] = 1.0

    def test_familiarity(self, vocab):
        fam = familiarity(vocab)
        assert fam[vocab.ids["the"]] == 1.0
        assert fam[vocab.ids["."]] == 1.0
        assert fam[vocab.ids["##ing"]] == 0.6
        assert fam[vocab.ids["q"]] == 0.3
        assert fam[vocab.ids["##q"]] == 0.0
        assert fam[UNK_ID] == 0.0
