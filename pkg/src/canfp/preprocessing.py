"""Signal preprocessing: group separation, templates and signal deviation.

The sampled data field is split into three symbol groups: rising edges (g=1),
steady dominant levels (g=2) and falling edges (g=3). Per frame and group the
symbols are averaged elementwise; per ECU a template is built from the average
symbols of M reference frames; the signal deviation of a later frame is the
mean per-sample ratio of its average symbol to the template, minus one, so a
rising voltage level yields a positive deviation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    EmptyGroupError,
    EmptyInputError,
    InsufficientDataError,
    InsufficientFramesError,
    LengthMismatchError,
    NoCrossingFoundError,
    ZeroFactorError,
    ZeroTemplateSampleError,
)
from .signal_model import (
    EDGE_THRESHOLD_V,
    EcuId,
    Symbol,
    SymbolGroups,
    Template,
    VoltageFrame,
)

GROUPS = (1, 2, 3)

# Minimum template magnitude; below this the window reaches into the
# recessive region and ratios are meaningless.
MIN_TEMPLATE_V = 1e-3

# A first-order edge crossing the midpoint at tau*ln2 has decayed to <0.3%
# residual after 6*tau; a steady window starting at `settle` is clean when
# settle >= (6/ln2) * crossing offset.
SETTLED_FACTOR = 6.0 / math.log(2.0)


@dataclass(frozen=True)
class GroupConfig:
    """Window geometry for symbol extraction (defaults fit 40 samples/bit)."""

    l_edge: int = 20
    l_steady: int = 16
    settle: int = 12
    pre_samples: int = 4
    threshold_v: float = EDGE_THRESHOLD_V


def downsample(samples: np.ndarray, factor: int) -> np.ndarray:
    """Keep every factor-th sample starting at index 0 (length ceil(n/k))."""
    if int(factor) != factor or factor < 1:
        raise ZeroFactorError(f"downsampling factor must be a positive integer, got {factor}")
    return np.asarray(samples)[:: int(factor)]


def _find_crossing(samples: np.ndarray, start: int, stop: int, threshold: float, rising: bool) -> int:
    """Index of the first sample at/beyond the threshold inside [start, stop)."""
    window = samples[start:stop]
    hits = np.nonzero(window >= threshold if rising else window <= threshold)[0]
    if hits.size == 0:
        direction = "rising" if rising else "falling"
        raise NoCrossingFoundError(
            f"expected {direction} crossing of {threshold} V in samples [{start}, {stop})"
        )
    return start + int(hits[0])


def extract_groups(frame: VoltageFrame, config: GroupConfig = GroupConfig()) -> SymbolGroups:
    """Split one frame's samples into the three symbol groups.

    Edge symbols take `pre_samples` samples before the midpoint-threshold
    crossing and the remainder after it. Steady symbols start `settle`
    samples into a dominant bit; a dominant bit that begins a run qualifies
    only when its observed crossing offset implies the edge has settled by
    the window start. Groups may be empty for transition-free bit patterns.
    """
    spb = frame.samples_per_bit
    if config.l_edge > spb or config.settle + config.l_steady > spb:
        raise LengthMismatchError("symbol windows do not fit into one bit")
    samples = frame.samples
    bits = frame.data_bits
    rising_syms: list[Symbol] = []
    falling_syms: list[Symbol] = []
    steady_syms: list[Symbol] = []
    crossing_offset: dict[int, int] = {}

    for j in range(1, len(bits)):
        prev_bit, bit = bits[j - 1], bits[j]
        if prev_bit == bit:
            continue
        bit_start = j * spb
        rising = prev_bit == 1  # 1 -> 0 transition drives the line up to dominant
        cross = _find_crossing(samples, bit_start, bit_start + spb, config.threshold_v, rising)
        crossing_offset[j] = cross - bit_start
        win_start = cross - config.pre_samples
        win = samples[win_start : win_start + config.l_edge]
        if win_start < 0 or win.shape[0] < config.l_edge:
            raise NoCrossingFoundError(
                f"edge window at bit {j} (crossing {cross}) does not fit the trace"
            )
        symbol = Symbol(values=win, group=1 if rising else 3)
        (rising_syms if rising else falling_syms).append(symbol)

    for j, bit in enumerate(bits):
        if bit != 0:
            continue
        if j > 0 and bits[j - 1] == 0:
            settled = True
        elif j in crossing_offset:
            settled = crossing_offset[j] * SETTLED_FACTOR <= config.settle
        else:
            settled = False  # first bit of the field: no observable edge
        if not settled:
            continue
        start = j * spb + config.settle
        steady_syms.append(Symbol(values=samples[start : start + config.l_steady], group=2))

    symbols = {1: tuple(rising_syms), 2: tuple(steady_syms), 3: tuple(falling_syms)}
    average = {
        g: average_symbol(list(syms)) if syms else None for g, syms in symbols.items()
    }
    return SymbolGroups(symbols=symbols, average=average)


def average_symbol(symbols: Sequence[Symbol]) -> np.ndarray:
    """Elementwise mean over all K symbols of one group."""
    if not symbols:
        raise EmptyGroupError("cannot average an empty symbol group")
    length = symbols[0].values.shape[0]
    group = symbols[0].group
    for s in symbols:
        if s.values.shape[0] != length:
            raise LengthMismatchError("symbols in one group must share their length")
        if s.group != group:
            raise LengthMismatchError("symbols from different groups cannot be averaged")
    return np.mean([s.values for s in symbols], axis=0)


def build_template(avg_symbols: Sequence[np.ndarray]) -> np.ndarray:
    """Elementwise mean of M frames' average symbols (one group)."""
    if len(avg_symbols) == 0:
        raise EmptyInputError("template needs at least one average symbol")
    length = avg_symbols[0].shape[0]
    for v in avg_symbols:
        if v.shape[0] != length:
            raise LengthMismatchError("average symbols must share their length")
    return np.mean(avg_symbols, axis=0)


def build_templates(
    frames: Sequence[VoltageFrame],
    ecu: EcuId,
    m_count: int,
    config: GroupConfig = GroupConfig(),
) -> Template:
    """Template for one ECU from the first m_count of its frames in the trace."""
    own = [f for f in frames if f.true_ecu == ecu][:m_count]
    if len(own) < m_count:
        raise InsufficientFramesError(f"ECU {ecu}: {len(own)} frames available, {m_count} needed")
    per_group: dict[int, list[np.ndarray]] = {g: [] for g in GROUPS}
    for frame in own:
        groups = extract_groups(frame, config)
        for g in GROUPS:
            if groups.average[g] is not None:
                per_group[g].append(groups.average[g])
    vectors = {g: build_template(v) for g, v in per_group.items() if v}
    return Template(ecu=ecu, vectors=vectors, m_count=m_count)


def signal_deviation(avg: np.ndarray, tpl: np.ndarray) -> float:
    """Mean per-sample ratio of average symbol to template, minus one.

    Positive when the signal level rose above the template.
    """
    avg = np.asarray(avg, dtype=float)
    tpl = np.asarray(tpl, dtype=float)
    if avg.shape != tpl.shape:
        raise LengthMismatchError(f"length mismatch: {avg.shape} vs {tpl.shape}")
    if np.any(np.abs(tpl) < MIN_TEMPLATE_V):
        raise ZeroTemplateSampleError(
            "template sample below 1 mV; window reaches into the recessive region"
        )
    return float(np.mean(avg / tpl) - 1.0)


@dataclass(frozen=True)
class DeviationPoint:
    """One deviation observation: frame seq, sender, value and context."""

    seq: int
    ecu: EcuId
    group: int
    sd: float
    temperature_c: float
    trip: int


def deviation_series(
    frames: Sequence[VoltageFrame],
    group: int,
    m_count: int = 20,
    config: GroupConfig = GroupConfig(),
) -> dict[EcuId, list[DeviationPoint]]:
    """Per-ECU deviation time series against templates from the first M frames.

    The M template frames per ECU are excluded from the series; remaining
    frames appear in trace order. Frames whose bit pattern yields an empty
    group are skipped.
    """
    ecus = sorted({f.true_ecu for f in frames})
    templates = {e: build_templates(frames, e, m_count, config) for e in ecus}
    used = {e: 0 for e in ecus}
    series: dict[EcuId, list[DeviationPoint]] = {e: [] for e in ecus}
    for frame in frames:
        e = frame.true_ecu
        if used[e] < m_count:
            used[e] += 1
            continue
        tpl = templates[e].vectors.get(group)
        if tpl is None:
            continue
        groups = extract_groups(frame, config)
        avg = groups.average[group]
        if avg is None:
            continue
        series[e].append(
            DeviationPoint(
                seq=frame.seq,
                ecu=e,
                group=group,
                sd=signal_deviation(avg, tpl),
                temperature_c=frame.temperature_c,
                trip=frame.trip,
            )
        )
    return series


@dataclass(frozen=True)
class DeviationStats:
    """Per-ECU summary plus the pairwise correlation matrix."""

    ecus: tuple[EcuId, ...]
    mean: dict[EcuId, float]
    std: dict[EcuId, float]
    maximum: dict[EcuId, float]
    max_diff: dict[EcuId, float]
    correlation: np.ndarray  # len(ecus) x len(ecus), NaN where undefined


def _resample_trips(points: Sequence[DeviationPoint], points_per_trip: int) -> np.ndarray:
    """Linear resampling to a fixed number of points per trip, concatenated."""
    trips = sorted({p.trip for p in points})
    out = []
    for t in trips:
        vals = np.array([p.sd for p in points if p.trip == t])
        if vals.size < 2:
            raise InsufficientDataError(f"trip {t}: need at least 2 deviation points per ECU")
        pos = np.linspace(0, vals.size - 1, points_per_trip)
        out.append(np.interp(pos, np.arange(vals.size), vals))
    return np.concatenate(out)


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    sa, sb = np.std(a), np.std(b)
    if sa == 0.0 or sb == 0.0:
        return float("nan")
    return float(np.mean((a - np.mean(a)) * (b - np.mean(b))) / (sa * sb))


def deviation_statistics(
    series: Mapping[EcuId, Sequence[DeviationPoint]],
    points_per_trip: int = 200,
) -> DeviationStats:
    """Mean / std / max / max successive difference per ECU, plus correlations.

    Correlations are computed on a common per-trip resampling (default 200
    points per ECU per trip) so ECUs with different frame counts align.
    A constant series has zero variance and correlates as NaN.
    """
    ecus = tuple(sorted(series.keys()))
    for e in ecus:
        if len(series[e]) < 2:
            raise InsufficientDataError(f"ECU {e}: need at least 2 deviation points")
    mean, std, maximum, max_diff = {}, {}, {}, {}
    resampled = {}
    for e in ecus:
        vals = np.array([p.sd for p in series[e]])
        mean[e] = float(np.mean(vals))
        std[e] = float(np.std(vals))
        maximum[e] = float(np.max(vals))
        max_diff[e] = float(np.max(np.abs(np.diff(vals))))
        resampled[e] = _resample_trips(series[e], points_per_trip)
    n = len(ecus)
    corr = np.full((n, n), np.nan)
    for i, a in enumerate(ecus):
        for j, b in enumerate(ecus):
            corr[i, j] = _pearson(resampled[a], resampled[b])
    return DeviationStats(ecus=ecus, mean=mean, std=std, maximum=maximum, max_diff=max_diff, correlation=corr)


def temperature_correlation(series: Mapping[EcuId, Sequence[DeviationPoint]]) -> dict[EcuId, float]:
    """Pearson correlation between each ECU's deviation series and temperature.

    Constant temperature has zero variance; the correlation is reported NaN.
    """
    out = {}
    for e, points in sorted(series.items()):
        if len(points) < 2:
            raise InsufficientDataError(f"ECU {e}: need at least 2 deviation points")
        sd = np.array([p.sd for p in points])
        temp = np.array([p.temperature_c for p in points])
        out[e] = _pearson(sd, temp)
    return out
