"""Latency and energy measurement harness, plus rank statistics.

All timing goes through a clock object. :class:`SimulatedClock` only moves
when something advances it, which keeps every measurement in the test suite
hermetic; :class:`WallClock` uses ``time.perf_counter``.

Energy meters are optional. A meter exposes a cumulative counter in joules;
:class:`FileCounterMeter` reads the kind of cumulative microjoule text file
that kernel power-capping drivers export.
"""

from __future__ import annotations

import math
import threading
import time
from pathlib import Path
from typing import Callable, NamedTuple, Protocol, Sequence, runtime_checkable

import numpy as np

SMALLEST_P = 5e-324
DEFAULT_WARMUP = 100

_EXCLUSIVE = threading.Lock()


class SimulatedClock:
    def __init__(self, start: float = 0.0):
        self._t = float(start)
        self._lock = threading.Lock()

    def now(self) -> float:
        return self._t

    def advance(self, dt: float) -> None:
        if dt < 0:
            raise ValueError("time cannot run backwards")
        with self._lock:
            self._t += dt

    sleep = advance


class WallClock:
    def now(self) -> float:
        return time.perf_counter()

    def sleep(self, dt: float) -> None:
        time.sleep(dt)


@runtime_checkable
class MeterInterface(Protocol):
    def read_counter(self) -> float:
        """Cumulative energy in joules; never decreases within a session."""

    @property
    def capabilities(self) -> frozenset[str]: ...


class FileCounterMeter:
    """Cumulative microjoule counter read from a text file (one integer)."""

    def __init__(self, path):
        self.path = Path(path)
        self._last: float | None = None
        self.read_counter()

    @property
    def capabilities(self) -> frozenset[str]:
        return frozenset({"energy"})

    def read_counter(self) -> float:
        text = self.path.read_text().strip()
        try:
            joules = float(text) * 1e-6
        except ValueError:
            raise ValueError(f"{self.path}: not a numeric counter: {text[:40]!r}") from None
        if self._last is not None and joules < self._last:
            raise RuntimeError(f"{self.path}: counter went backwards (wrapped or reset)")
        self._last = joules
        return joules


def open_meter(path=None) -> FileCounterMeter | None:
    """A meter for ``path``, or ``None`` (latency-only mode) when there is none."""
    if path is None or not Path(path).exists():
        return None
    return FileCounterMeter(path)


class LatencySample(NamedTuple):
    duration: float
    input_id: object
    timestamp: float
    energy_j: float | None = None
    error: str | None = None


def time_inference(
    fn: Callable[[], object],
    warmup_count: int = DEFAULT_WARMUP,
    repetitions: int = 1,
    clock=None,
    meter: MeterInterface | None = None,
    input_id=None,
) -> list[LatencySample]:
    """Run ``fn`` ``warmup_count + repetitions`` times and keep the last ``repetitions``.

    Runs are exclusive across threads. A raising call yields a sample with
    ``error`` set instead of aborting the session.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")
    if warmup_count < 0:
        raise ValueError("warmup_count must be nonnegative")
    clock = clock or WallClock()
    samples = []
    with _EXCLUSIVE:
        for i in range(warmup_count + repetitions):
            e0 = meter.read_counter() if meter is not None else None
            t0 = clock.now()
            err = None
            try:
                fn()
            except Exception as exc:
                err = f"{type(exc).__name__}: {exc}"
            t1 = clock.now()
            energy = meter.read_counter() - e0 if meter is not None else None
            if i >= warmup_count:
                samples.append(LatencySample(t1 - t0, input_id, t0, energy, err))
    return samples


# -- Mann-Whitney U --------------------------------------------------------------


class MannWhitneyResult(NamedTuple):
    u: float  # U of the first sample: pairs with a > b, ties counted half
    pvalue: float  # one-sided, alternative "first sample tends to be larger"
    degenerate: bool = False


def _midranks(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    ranks = np.empty(len(x))
    bounds = np.flatnonzero(np.diff(xs)) + 1
    starts = np.concatenate([[0], bounds])
    ends = np.concatenate([bounds, [len(x)]])
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = (s + e + 1) / 2.0
    return ranks, ends - starts


def mann_whitney_u(a: Sequence[float], b: Sequence[float]) -> MannWhitneyResult:
    """One-sided rank test that ``a`` is stochastically larger than ``b``.

    Normal approximation with tie-corrected variance and a continuity
    correction of one half toward the null mean.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    n1, n2 = len(a), len(b)
    if n1 == 0 or n2 == 0:
        raise ValueError("both samples must be nonempty")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("samples must be finite")
    pooled = np.concatenate([a, b])
    ranks, ties = _midranks(pooled)
    u = float(ranks[:n1].sum() - n1 * (n1 + 1) / 2.0)
    n = n1 + n2
    mean = n1 * n2 / 2.0
    tie_term = float(np.sum(ties.astype(np.float64) ** 3 - ties)) / (n * (n - 1)) if n > 1 else 0.0
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term)
    if var <= 0.0:
        return MannWhitneyResult(u, 0.5, True)
    diff = u - mean
    diff = math.copysign(max(abs(diff) - 0.5, 0.0), diff)
    z = diff / math.sqrt(var)
    p = 0.5 * math.erfc(z / math.sqrt(2.0))
    return MannWhitneyResult(u, min(1.0, max(p, SMALLEST_P)))


class PairwiseTest(NamedTuple):
    larger: str
    smaller: str
    u: float
    pvalue: float
    degenerate: bool


class ClassComparison(NamedTuple):
    tests: list[PairwiseTest]
    p_trace: list[tuple[int, float, float, float]]  # (n, p12, p23, p13)
    n_needed: int | None
    alpha: float

    def all_significant(self, alpha: float | None = None) -> bool:
        alpha = self.alpha if alpha is None else alpha
        return all(t.pvalue < alpha for t in self.tests)


def compare_sample_classes(
    natural: Sequence[float],
    random: Sequence[float],
    sponge: Sequence[float],
    order: tuple[str, str, str] = ("sponge", "natural", "random"),
    alpha: float = 0.01,
    trace_steps: int = 20,
) -> ClassComparison:
    """One-sided tests first > second, second > third and first > third.

    ``p_trace`` repeats the three tests on the first ``n`` observations of
    each class for growing ``n``; ``n_needed`` is the smallest such ``n`` at
    which all three are significant at ``alpha``.
    """
    sets = {"natural": np.asarray(natural, float), "random": np.asarray(random, float), "sponge": np.asarray(sponge, float)}
    if sorted(order) != sorted(sets):
        raise ValueError(f"order must name natural, random and sponge, got {order}")
    if any(len(v) == 0 for v in sets.values()):
        raise ValueError("every sample class must be nonempty")
    pairs = [(order[0], order[1]), (order[1], order[2]), (order[0], order[2])]

    def run(k=None):
        out = []
        for hi, lo in pairs:
            r = mann_whitney_u(sets[hi][:k], sets[lo][:k])
            out.append(PairwiseTest(hi, lo, r.u, r.pvalue, r.degenerate))
        return out

    tests = run()
    n_max = min(len(v) for v in sets.values())
    sizes = np.unique(np.linspace(min(2, n_max), n_max, trace_steps).round().astype(int)).tolist()
    p_trace, n_needed = [], None
    for k in sizes:
        ps = [t.pvalue for t in run(k)]
        p_trace.append((k, *ps))
        if n_needed is None and all(p < alpha for p in ps):
            n_needed = k
    return ClassComparison(tests, p_trace, n_needed, alpha)


class SignTestResult(NamedTuple):
    wins: int
    losses: int
    ties: int
    pvalue: float


def sign_test(a: Sequence[float], b: Sequence[float]) -> SignTestResult:
    """Exact one-sided paired sign test that ``a`` tends to exceed ``b``; ties dropped."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("paired samples must have equal length")
    wins = int(np.sum(a > b))
    losses = int(np.sum(a < b))
    n = wins + losses
    if n == 0:
        return SignTestResult(0, 0, len(a), 1.0)
    tail = sum(math.comb(n, k) for k in range(wins, n + 1))
    return SignTestResult(wins, losses, len(a) - n, min(1.0, tail / 2**n))
