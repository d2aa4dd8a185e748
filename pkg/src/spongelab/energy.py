"""Coarse-grained accelerator energy model.

Energy is charged per floating-point multiply and per 32-bit DRAM word,
using the 45nm figures of Horowitz (1950 pJ per DRAM word, 3.7 pJ per
multiply). An *optimized* accelerator skips multiplies with a zero operand
and stores activation tensors in a compressed (value, index) format; the
*unoptimized* one does neither. The ratio of the two is the headline
metric for how much an input defeats sparsity optimisations.

Memory model: every layer reads all of its inputs and weights from DRAM and
writes all of its outputs back (no inter-layer reuse).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

DRAM_ACCESS_PJ = 1950.0
FP_MULT_PJ = 3.7
FLUSH_POLICY = "per-layer-full-flush"

TRACE_HEADER = "# spongelab-trace v1"
REPORT_FORMAT = "spongelab-energy-report"
REPORT_VERSION = 1


class TraceError(ValueError):
    """A trace entry violates the count invariants."""


@dataclass(frozen=True)
class AsicCostModel:
    dram_access_energy_pj: float = DRAM_ACCESS_PJ
    fp_mult_energy_pj: float = FP_MULT_PJ
    zero_skip_enabled: bool = True
    dram_compress_enabled: bool = True

    def __post_init__(self):
        if not (self.dram_access_energy_pj > 0 and self.fp_mult_energy_pj > 0):
            raise ValueError("per-access and per-multiply energies must be positive")


DENSE_ASIC = AsicCostModel(zero_skip_enabled=False, dram_compress_enabled=False)


class LayerTraceEntry(NamedTuple):
    layer_name: str
    mult_total: int
    mult_nonzero: int
    act_total: int
    act_nonzero: int
    dram_words_raw: int
    dram_words_compressed: int

    def check(self) -> None:
        counts = self[1:]
        if any(int(c) != c or c < 0 for c in counts):
            raise TraceError(f"layer {self.layer_name!r}: counts must be nonnegative integers")
        if self.mult_nonzero > self.mult_total:
            raise TraceError(f"layer {self.layer_name!r}: mult_nonzero > mult_total")
        if self.act_nonzero > self.act_total:
            raise TraceError(f"layer {self.layer_name!r}: act_nonzero > act_total")
        if self.dram_words_compressed > self.dram_words_raw:
            raise TraceError(f"layer {self.layer_name!r}: compressed DRAM words exceed raw")


@dataclass
class ActivationTrace:
    """Ordered per-layer record of one inference."""

    layers: list[LayerTraceEntry] = field(default_factory=list)

    def append(self, entry: LayerTraceEntry) -> None:
        self.layers.append(entry)

    def extend(self, entries: Iterable[LayerTraceEntry]) -> None:
        self.layers.extend(entries)

    def __len__(self):
        return len(self.layers)

    def __iter__(self):
        return iter(self.layers)

    def validate(self) -> None:
        for entry in self.layers:
            entry.check()

    def totals(self) -> dict[str, int]:
        keys = LayerTraceEntry._fields[1:]
        sums = [0] * len(keys)
        for entry in self.layers:
            for i, v in enumerate(entry[1:]):
                sums[i] += v
        return dict(zip(keys, sums))

    def select(self, predicate) -> "ActivationTrace":
        return ActivationTrace([e for e in self.layers if predicate(e.layer_name)])

    # -- line-delimited serialization ------------------------------------
    def dumps(self) -> str:
        lines = [TRACE_HEADER]
        for e in self.layers:
            if any(ch.isspace() for ch in e.layer_name):
                raise TraceError(f"layer name {e.layer_name!r} contains whitespace")
            lines.append("\t".join([e.layer_name, *(str(int(c)) for c in e[1:])]))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "ActivationTrace":
        lines = text.splitlines()
        if not lines or lines[0].strip() != TRACE_HEADER:
            raise TraceError("missing trace header")
        layers = []
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 7:
                raise TraceError(f"line {lineno}: expected name and six counts")
            layers.append(LayerTraceEntry(parts[0], *(int(p) for p in parts[1:])))
        trace = cls(layers)
        trace.validate()
        return trace

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "ActivationTrace":
        return cls.loads(Path(path).read_text())


@dataclass(frozen=True)
class EnergyReport:
    energy_optimized_pj: float
    energy_unoptimized_pj: float
    energy_ratio: float
    mult_total: int
    mult_nonzero: int
    act_total: int
    act_nonzero: int
    dram_words_raw: int
    dram_words_compressed: int

    @property
    def energy_optimized_mj(self) -> float:
        return self.energy_optimized_pj * 1e-9

    @property
    def energy_unoptimized_mj(self) -> float:
        return self.energy_unoptimized_pj * 1e-9

    def to_dict(self) -> dict:
        d = {"format": REPORT_FORMAT, "version": REPORT_VERSION}
        d.update(asdict(self))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EnergyReport":
        if d.get("format") != REPORT_FORMAT or d.get("version") != REPORT_VERSION:
            raise ValueError("not a version-1 energy report")
        return cls(**{k: d[k] for k in cls.__dataclass_fields__})

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "EnergyReport":
        return cls.from_dict(json.loads(Path(path).read_text()))


def energy_from_counts(mult: int, dram_words: int, cost: AsicCostModel) -> float:
    return mult * cost.fp_mult_energy_pj + dram_words * cost.dram_access_energy_pj


def simulate_energy(trace: ActivationTrace, cost: AsicCostModel = AsicCostModel()) -> EnergyReport:
    """Energy of one traced inference on the optimized and unoptimized ASIC.

    Counts are summed exactly as integers before being priced, so the result
    is the per-layer sum in exact arithmetic and bit-identical across runs.
    """
    trace.validate()
    t = trace.totals()
    mult_eff = t["mult_nonzero"] if cost.zero_skip_enabled else t["mult_total"]
    dram_eff = t["dram_words_compressed"] if cost.dram_compress_enabled else t["dram_words_raw"]
    optimized = energy_from_counts(mult_eff, dram_eff, cost)
    unoptimized = energy_from_counts(t["mult_total"], t["dram_words_raw"], cost)
    if unoptimized == 0.0:
        ratio = 1.0
    else:
        ratio = optimized / unoptimized
    return EnergyReport(optimized, unoptimized, ratio, **t)


# -- DRAM traffic -------------------------------------------------------------


class LayerIO(NamedTuple):
    """Shapes (as element counts) and nonzero counts of one layer's tensors."""

    input_sizes: tuple[int, ...]
    input_nonzero: tuple[int, ...]
    weight_words: int
    output_size: int
    output_nonzero: int


def compressed_words(size: int, nonzero: int) -> int:
    # A tensor is stored as (value, index) pairs unless dense storage is smaller.
    return min(size, 2 * nonzero)


def layer_dram_words(io: LayerIO) -> tuple[int, int]:
    raw = sum(io.input_sizes) + io.weight_words + io.output_size
    comp = (
        sum(compressed_words(s, z) for s, z in zip(io.input_sizes, io.input_nonzero))
        + io.weight_words
        + compressed_words(io.output_size, io.output_nonzero)
    )
    return raw, comp


def dram_traffic(layers: Sequence[LayerIO], flush_policy: str = FLUSH_POLICY) -> list[tuple[int, int]]:
    """Per-layer ``(raw, compressed)`` DRAM word counts.

    Weights are never compressed. Activation tensors are compressed to one
    value word plus one index word per nonzero element.
    """
    if flush_policy != FLUSH_POLICY:
        raise ValueError(f"unsupported flush policy {flush_policy!r}; only {FLUSH_POLICY!r}")
    return [layer_dram_words(io) for io in layers]


def count_matmul(x: np.ndarray, w: np.ndarray, w_row_nonzero: np.ndarray | None = None) -> tuple[int, int]:
    """Total and zero-skipped multiply counts for ``x @ w``.

    A multiply ``x[i,k] * w[k,j]`` is skipped when either operand is exactly
    zero, so the surviving count is ``sum_k nnz(x[:,k]) * nnz(w[k,:])``.
    ``w_row_nonzero`` may carry the precomputed ``nnz(w[k,:])`` for a fixed
    weight matrix.
    """
    x2 = x.reshape(-1, x.shape[-1])
    total = x2.shape[0] * x2.shape[1] * w.shape[-1]
    if w_row_nonzero is None:
        w_row_nonzero = (w != 0).sum(axis=-1)
    nz = int((x2 != 0).sum(axis=0) @ w_row_nonzero)
    return total, nz


# -- physical power model -----------------------------------------------------

ELECTRON_CHARGE_C = 1.602176634e-19
BOLTZMANN_J_PER_K = 1.380649e-23


@dataclass(frozen=True)
class PhysicalEnergyParams:
    i_s: float
    v_d: float
    temperature_k: float
    v_core: float
    alpha: float
    capacitance_f: float
    frequency_hz: float
    duration_s: float
    q: float = ELECTRON_CHARGE_C
    k: float = BOLTZMANN_J_PER_K

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        for name in ("v_d", "temperature_k", "v_core", "capacitance_f", "frequency_hz", "duration_s", "q", "k"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.i_s < 0:
            raise ValueError("i_s must be nonnegative")


def static_power(p: PhysicalEnergyParams) -> float:
    exponent = p.q * p.v_d / (p.k * p.temperature_k)
    try:
        leak = math.expm1(exponent)
    except OverflowError:
        raise OverflowError(f"leakage exponent {exponent:.3g} overflows a double") from None
    return p.i_s * leak * p.v_core


def dynamic_power(p: PhysicalEnergyParams) -> float:
    return p.alpha * p.capacitance_f * p.v_core**2 * p.frequency_hz


def physical_energy(p: PhysicalEnergyParams) -> float:
    """Joules drawn over ``duration_s``: (static + dynamic power) * time."""
    return (static_power(p) + dynamic_power(p)) * p.duration_s
