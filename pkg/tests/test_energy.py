import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spongelab.energy import (
    DENSE_ASIC,
    ActivationTrace,
    AsicCostModel,
    EnergyReport,
    LayerIO,
    LayerTraceEntry,
    PhysicalEnergyParams,
    TraceError,
    count_matmul,
    dram_traffic,
    physical_energy,
    simulate_energy,
)


def entry(name="l", mt=0, mz=0, at=0, az=0, raw=0, comp=0):
    return LayerTraceEntry(name, mt, mz, at, az, raw, comp)


@st.composite
def traces(draw, max_layers=6):
    layers = []
    for i in range(draw(st.integers(1, max_layers))):
        mt = draw(st.integers(0, 10**6))
        at = draw(st.integers(0, 10**5))
        raw = draw(st.integers(0, 10**6))
        layers.append(entry(f"l{i}", mt, draw(st.integers(0, mt)), at, draw(st.integers(0, at)), raw, draw(st.integers(0, raw))))
    return ActivationTrace(layers)


class TestCostModel:
    def test_defaults(self):
        c = AsicCostModel()
        assert c.dram_access_energy_pj == 1950.0
        assert c.fp_mult_energy_pj == 3.7
        assert c.zero_skip_enabled and c.dram_compress_enabled

    @pytest.mark.parametrize("kw", [{"dram_access_energy_pj": 0.0}, {"fp_mult_energy_pj": -1.0}])
    def test_rejects_nonpositive(self, kw):
        with pytest.raises(ValueError):
            AsicCostModel(**kw)


class TestSimulateEnergy:
    def test_all_multiplies_live(self):
        rep = simulate_energy(ActivationTrace([entry(mt=10, mz=10)]))
        assert rep.energy_optimized_pj == 37.0
        assert rep.energy_unoptimized_pj == 37.0
        assert rep.energy_ratio == 1.0

    def test_half_skipped(self):
        rep = simulate_energy(ActivationTrace([entry(mt=10, mz=5)]))
        assert rep.energy_optimized_pj == 18.5
        assert rep.energy_unoptimized_pj == 37.0
        assert rep.energy_ratio == 0.5

    def test_flags_off_price_raw_counts(self):
        t = ActivationTrace([entry(mt=10, mz=5, raw=4, comp=2)])
        assert simulate_energy(t, DENSE_ASIC).energy_optimized_pj == simulate_energy(t).energy_unoptimized_pj
        no_skip = AsicCostModel(zero_skip_enabled=False)
        assert simulate_energy(t, no_skip).energy_optimized_pj == 10 * 3.7 + 2 * 1950.0

    def test_totals_mirrored(self):
        t = ActivationTrace([entry("a", 4, 3, 5, 2, 9, 7), entry("b", 1, 1, 1, 0, 3, 3)])
        rep = simulate_energy(t)
        assert (rep.mult_total, rep.mult_nonzero, rep.act_total, rep.act_nonzero) == (5, 4, 6, 2)
        assert (rep.dram_words_raw, rep.dram_words_compressed) == (12, 10)

    @pytest.mark.parametrize(
        "bad,msg",
        [
            (entry("conv9", mt=3, mz=4), "mult_nonzero"),
            (entry("fc3", at=1, az=2), "act_nonzero"),
            (entry("pool", raw=1, comp=2), "compressed"),
            (entry("neg", mt=-1), "nonnegative"),
        ],
    )
    def test_invalid_trace_names_layer(self, bad, msg):
        with pytest.raises(TraceError, match=bad.layer_name) as exc:
            simulate_energy(ActivationTrace([entry("ok"), bad]))
        assert msg in str(exc.value)

    def test_empty_trace(self):
        rep = simulate_energy(ActivationTrace())
        assert rep.energy_optimized_pj == 0.0 and rep.energy_ratio == 1.0

    @settings(max_examples=200, deadline=None)
    @given(traces())
    def test_ratio_bounds(self, t):
        rep = simulate_energy(t)
        assert rep.energy_unoptimized_pj >= rep.energy_optimized_pj
        assert 0.0 <= rep.energy_ratio <= 1.0
        if rep.energy_unoptimized_pj > 0:
            assert rep.energy_ratio == rep.energy_optimized_pj / rep.energy_unoptimized_pj
        skippable = rep.mult_total - rep.mult_nonzero + rep.dram_words_raw - rep.dram_words_compressed
        assert (rep.energy_ratio == 1.0) == (skippable == 0 or rep.energy_unoptimized_pj == 0)

    @settings(max_examples=100, deadline=None)
    @given(traces(), st.data())
    def test_monotone_in_live_multiplies(self, t, data):
        i = data.draw(st.integers(0, len(t) - 1))
        e = t.layers[i]
        bump = data.draw(st.integers(0, e.mult_total - e.mult_nonzero))
        t2 = ActivationTrace(list(t.layers))
        t2.layers[i] = e._replace(mult_nonzero=e.mult_nonzero + bump)
        assert simulate_energy(t2).energy_optimized_pj >= simulate_energy(t).energy_optimized_pj

    @settings(max_examples=50, deadline=None)
    @given(traces())
    def test_equals_per_layer_sum(self, t):
        # pricing summed counts and summing per-layer prices agree (to rounding)
        per_layer = math.fsum(e.mult_nonzero * 3.7 + e.dram_words_compressed * 1950.0 for e in t)
        assert simulate_energy(t).energy_optimized_pj == pytest.approx(per_layer, rel=1e-12)

    def test_bit_identical_repeats(self, cnn):
        from spongelab.vision import cnn_forward

        x = np.random.default_rng(0).random(cnn.input_shape)
        first = simulate_energy(cnn_forward(cnn, x).trace)
        for _ in range(20):
            assert simulate_energy(cnn_forward(cnn, x).trace) == first


class TestSerialization:
    def test_trace_round_trip(self, tmp_path):
        t = ActivationTrace([entry("a", 4, 3, 5, 2, 9, 7), entry("b", 1, 1, 1, 0, 3, 3)])
        t.save(tmp_path / "t.txt")
        assert ActivationTrace.load(tmp_path / "t.txt") == t
        lines = (tmp_path / "t.txt").read_text().splitlines()
        assert lines[1].split("\t") == ["a", "4", "3", "5", "2", "9", "7"]

    def test_trace_load_validates(self):
        with pytest.raises(TraceError, match="bad"):
            ActivationTrace.loads("# spongelab-trace v1\nbad 1 2 0 0 0 0\n")
        with pytest.raises(TraceError, match="header"):
            ActivationTrace.loads("a 1 1 0 0 0 0\n")

    def test_report_round_trip(self, tmp_path):
        rep = simulate_energy(ActivationTrace([entry(mt=10, mz=5, raw=4, comp=2)]))
        rep.save(tmp_path / "r.json")
        assert EnergyReport.load(tmp_path / "r.json") == rep
        assert rep.energy_optimized_mj == pytest.approx(rep.energy_optimized_pj * 1e-9)


class TestDramTraffic:
    def test_linear_dense(self):
        # 4 -> 3 linear layer without bias: 4 inputs + 12 weights + 3 outputs
        assert dram_traffic([LayerIO((4,), (4,), 12, 3, 3)]) == [(19, 19)]

    def test_single_nonzero_input(self):
        raw, comp = dram_traffic([LayerIO((4,), (1,), 12, 3, 3)])[0]
        assert raw == 19
        assert comp == 2 + 12 + 3

    def test_sparse_output(self):
        assert dram_traffic([LayerIO((4,), (4,), 12, 3, 1)]) == [(19, 4 + 12 + 2)]

    def test_unknown_policy(self):
        with pytest.raises(ValueError, match="flush"):
            dram_traffic([], "write-back")

    def test_reference_conv_on_all_ones(self, cnn):
        # 1x8x8 input, four 3x3 filters with biases, 4x6x6 output, all positive
        from spongelab.vision import cnn_forward

        conv = cnn_forward(cnn, np.ones(cnn.input_shape)).trace.layers[1]
        assert conv.layer_name == "conv1"
        assert (conv.dram_words_raw, conv.dram_words_compressed) == (64 + 40 + 144, 64 + 40 + 144)


class TestCountMatmul:
    def test_against_loops(self, rng):
        x = rng.standard_normal((5, 7)) * (rng.random((5, 7)) < 0.4)
        w = rng.standard_normal((7, 3)) * (rng.random((7, 3)) < 0.6)
        live = sum(1 for i in range(5) for k in range(7) for j in range(3) if x[i, k] != 0 and w[k, j] != 0)
        assert count_matmul(x, w) == (105, live)
        assert count_matmul(x, w, (w != 0).sum(axis=1)) == (105, live)


def params(**kw):
    base = dict(i_s=1e-12, v_d=0.3, temperature_k=300.0, v_core=1.0, alpha=0.5, capacitance_f=1e-9, frequency_hz=1e9, duration_s=1.0)
    base.update(kw)
    return PhysicalEnergyParams(**base)


class TestPhysicalEnergy:
    def test_no_draw(self):
        assert physical_energy(params(alpha=0.0, i_s=0.0)) == 0.0

    def test_dynamic_only(self):
        assert physical_energy(params(alpha=1.0, i_s=0.0)) == pytest.approx(1.0, rel=1e-15)

    def test_formula(self):
        p = params()
        static = p.i_s * (math.exp(p.q * p.v_d / (p.k * p.temperature_k)) - 1) * p.v_core
        dynamic = p.alpha * p.capacitance_f * p.v_core**2 * p.frequency_hz
        assert physical_energy(p) == pytest.approx((static + dynamic) * p.duration_s, rel=1e-12)

    def test_linear_in_time(self):
        assert physical_energy(params(duration_s=2.0)) == 2 * physical_energy(params(duration_s=1.0))

    @pytest.mark.parametrize("name,lo,hi", [("alpha", 0.2, 0.8), ("frequency_hz", 1e8, 2e9), ("duration_s", 0.5, 3.0)])
    def test_increasing(self, name, lo, hi):
        assert physical_energy(params(**{name: hi})) > physical_energy(params(**{name: lo}))

    def test_temperature_dependence(self):
        # Under the diode law as written, leakage falls as T rises because T
        # only enters through the exponent's denominator.
        cold, hot = params(alpha=0.0, temperature_k=280.0), params(alpha=0.0, temperature_k=360.0)
        assert physical_energy(hot) < physical_energy(cold)

    def test_overflow_is_range_error(self):
        with pytest.raises(OverflowError):
            physical_energy(params(v_d=100.0, temperature_k=1.0))

    @pytest.mark.parametrize("kw", [{"alpha": 1.5}, {"v_core": 0.0}, {"duration_s": -1.0}, {"i_s": -1.0}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            params(**kw)
