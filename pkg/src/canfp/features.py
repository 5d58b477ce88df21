"""Fixed-length feature vectors from symbol groups, time and frequency domain.

Per group: eight moment/energy statistics on the concatenated raw samples,
four spectral statistics on the magnitude spectrum of the average symbol, and
one presence flag. Empty groups contribute zeros with flag 0, so the vector
length is constant regardless of the transmitted bit pattern.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InsufficientDataError
from .signal_model import SymbolGroups

_TIME_FEATURES = ("mean", "std", "var", "skew", "kurt", "rms", "max", "energy")
_SPEC_FEATURES = ("spec_mean", "spec_std", "spec_centroid", "spec_rolloff")
_GROUP_NAMES = {1: "rise", 2: "steady", 3: "fall"}

STD_FLOOR = 1e-9
ROLLOFF_FRACTION = 0.95


def feature_names() -> list[str]:
    names = []
    for g in (1, 2, 3):
        prefix = _GROUP_NAMES[g]
        names.extend(f"{prefix}_{f}" for f in _TIME_FEATURES)
        names.extend(f"{prefix}_{f}" for f in _SPEC_FEATURES)
        names.append(f"{prefix}_present")
    return names


FEATURE_COUNT = len(feature_names())  # 3 * (8 + 4 + 1) = 39


def _time_stats(values: np.ndarray) -> list[float]:
    n = values.size
    mean = float(np.mean(values))
    var = float(np.mean((values - mean) ** 2))
    std = float(np.sqrt(var))
    if std > 0.0:
        z = (values - mean) / std
        skew = float(np.mean(z**3))
        kurt = float(np.mean(z**4) - 3.0)  # excess kurtosis
    else:
        skew = 0.0
        kurt = 0.0
    energy = float(np.sum(values**2) / n)
    rms = float(np.sqrt(energy))
    return [mean, std, var, skew, kurt, rms, float(np.max(values)), energy]


def _spectral_stats(avg_symbol: np.ndarray) -> list[float]:
    mag = np.abs(np.fft.rfft(avg_symbol))
    total = float(np.sum(mag))
    spec_mean = float(np.mean(mag))
    spec_std = float(np.std(mag))
    if total > 0.0:
        bins = np.arange(mag.size, dtype=float)
        centroid = float(np.sum(bins * mag) / total)
        cumulative = np.cumsum(mag)
        rolloff = float(np.searchsorted(cumulative, ROLLOFF_FRACTION * total))
    else:
        centroid = 0.0
        rolloff = 0.0
    return [spec_mean, spec_std, centroid, rolloff]


def compute_features(groups: SymbolGroups) -> np.ndarray:
    """39-dimensional feature vector for one frame's symbol groups."""
    out: list[float] = []
    for g in (1, 2, 3):
        syms = groups.symbols.get(g, ())
        if syms:
            concatenated = np.concatenate([s.values for s in syms])
            out.extend(_time_stats(concatenated))
            out.extend(_spectral_stats(groups.average[g]))
            out.append(1.0)
        else:
            out.extend([0.0] * (len(_TIME_FEATURES) + len(_SPEC_FEATURES)))
            out.append(0.0)
    return np.array(out)


@dataclass(frozen=True)
class Standardizer:
    """Per-feature z-score transform fitted on training data.

    Standard deviations are floored at 1e-9 so constant features map to 0
    instead of blowing up.
    """

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mean, dtype=float)
        s = np.maximum(np.asarray(self.std, dtype=float), STD_FLOOR)
        m.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "std", s)


def fit_standardizer(vectors: Sequence[np.ndarray] | np.ndarray) -> Standardizer:
    matrix = np.asarray(vectors, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] < 2:
        raise InsufficientDataError("standardizer needs at least 2 training vectors")
    return Standardizer(mean=np.mean(matrix, axis=0), std=np.std(matrix, axis=0))


def apply_standardizer(std: Standardizer, vector: np.ndarray) -> np.ndarray:
    """z-score one vector or a matrix of row vectors."""
    return (np.asarray(vector, dtype=float) - std.mean) / std.std
