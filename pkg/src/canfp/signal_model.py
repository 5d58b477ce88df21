"""Domain types shared by the bus simulator and the IDS pipeline.

All types are immutable values after construction and safe to share across
concurrent readers. ECUs are identified by a small 0-based integer index.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

from .errors import (
    LengthMismatchError,
    NonFiniteSampleError,
    UnknownIdentifierError,
)

# 0-based ECU index; must stay below the ecu_count of the enclosing scenario.
EcuId = int

# Differential-voltage convention: recessive (logical 1) sits at 0 V nominal,
# dominant (logical 0) at 2 V nominal. Only the data field is modelled.
RECESSIVE_V = 0.0
DOMINANT_V = 2.0
EDGE_THRESHOLD_V = 1.0


@dataclass(frozen=True)
class AuthorizationTable:
    """Static map from message identifier to the single ECU allowed to send it."""

    entries: Mapping[int, EcuId]

    def __post_init__(self):
        object.__setattr__(self, "entries", dict(self.entries))

    def __contains__(self, claimed_id: int) -> bool:
        return claimed_id in self.entries

    def sender_of(self, claimed_id: int) -> EcuId:
        try:
            return self.entries[claimed_id]
        except KeyError:
            raise UnknownIdentifierError(f"identifier {claimed_id:#x} not authorized") from None

    def identifiers_of(self, ecu: EcuId) -> list[int]:
        return sorted(i for i, e in self.entries.items() if e == ecu)

    def ecus(self) -> list[EcuId]:
        return sorted(set(self.entries.values()))


@dataclass(frozen=True)
class VoltageFrame:
    """One transmitted frame: metadata plus the raw differential voltage trace.

    ``samples`` covers exactly the data field: ``len(data_bits)`` bits at
    ``sample_rate / bit_rate`` samples per bit. ``attack`` is ground-truth
    metadata for evaluation only; the IDS never reads it.
    """

    seq: int
    true_ecu: EcuId
    claimed_id: int
    authentic_tag: bool
    sample_rate: float
    bit_rate: float
    data_bits: tuple[int, ...]
    samples: np.ndarray
    trip: int
    temperature_c: float
    attack: bool = False
    mac_tag: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "data_bits", tuple(int(b) for b in self.data_bits))
        arr = np.asarray(self.samples, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @property
    def samples_per_bit(self) -> int:
        return int(round(self.sample_rate / self.bit_rate))


def validate_frame(frame: VoltageFrame, table: AuthorizationTable) -> VoltageFrame:
    """Return the frame unchanged if all invariants hold, else raise.

    Checks: sample count equals bits x samples-per-bit (an integer), every
    voltage finite, claimed identifier present in the authorization table.
    """
    ratio = frame.sample_rate / frame.bit_rate
    spb = int(round(ratio))
    if abs(ratio - spb) > 1e-9 or spb < 1:
        raise LengthMismatchError(
            f"sample_rate {frame.sample_rate} not an integer multiple of bit_rate {frame.bit_rate}"
        )
    expected = len(frame.data_bits) * spb
    if frame.samples.shape != (expected,):
        raise LengthMismatchError(
            f"frame {frame.seq}: {frame.samples.shape[0]} samples, expected {expected}"
        )
    if not np.all(np.isfinite(frame.samples)):
        raise NonFiniteSampleError(f"frame {frame.seq}: non-finite voltage sample")
    if frame.claimed_id not in table:
        raise UnknownIdentifierError(f"frame {frame.seq}: unknown identifier {frame.claimed_id:#x}")
    return frame


def authorized_sender(claimed_id: int, table: AuthorizationTable) -> EcuId:
    """The unique ECU authorized to send messages with this identifier."""
    return table.sender_of(claimed_id)


@dataclass(frozen=True)
class Symbol:
    """A fixed-length window of voltage samples covering one edge or steady level.

    group 1 = rising edge (recessive to dominant), group 2 = steady dominant,
    group 3 = falling edge.
    """

    values: np.ndarray
    group: int

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        if self.group not in (1, 2, 3):
            raise ValueError(f"group must be 1, 2 or 3, got {self.group}")


@dataclass(frozen=True)
class SymbolGroups:
    """Per-frame symbol groups and their average symbols.

    ``symbols[g]`` holds the K_g symbols of group g; ``average[g]`` is their
    elementwise mean, or None when the group is empty. K_g may differ per
    group and per frame depending on the transmitted bit pattern.
    """

    symbols: Mapping[int, tuple[Symbol, ...]]
    average: Mapping[int, np.ndarray | None]

    def __post_init__(self):
        object.__setattr__(self, "symbols", {g: tuple(s) for g, s in self.symbols.items()})
        object.__setattr__(self, "average", dict(self.average))

    def count(self, group: int) -> int:
        return len(self.symbols.get(group, ()))


@dataclass(frozen=True)
class Template:
    """Per-ECU reference shape: the mean of M frames' average symbols, per group."""

    ecu: EcuId
    vectors: Mapping[int, np.ndarray]
    m_count: int

    def __post_init__(self):
        object.__setattr__(self, "vectors", dict(self.vectors))


def frame_with(frame: VoltageFrame, **changes) -> VoltageFrame:
    """Functional update helper for immutable frames."""
    return replace(frame, **changes)


def check_finite(values: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(values)):
        raise NonFiniteSampleError(f"non-finite value in {what}")


def bits_from_bytes(payload: bytes) -> tuple[int, ...]:
    """MSB-first logical bits of a payload. No stuffing: bits are taken literally."""
    out: list[int] = []
    for byte in payload:
        for k in range(7, -1, -1):
            out.append((byte >> k) & 1)
    return tuple(out)


def count_transitions(data_bits: tuple[int, ...]) -> tuple[int, int]:
    """(rising, falling) edge counts: 1->0 transitions and 0->1 transitions."""
    rising = sum(1 for a, b in zip(data_bits, data_bits[1:]) if a == 1 and b == 0)
    falling = sum(1 for a, b in zip(data_bits, data_bits[1:]) if a == 0 and b == 1)
    return rising, falling
