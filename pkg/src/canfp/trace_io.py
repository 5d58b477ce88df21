"""Trace file format: JSON Lines, one frame per line, header line first.

The header carries scenario metadata (ecu_count, sample_rate, bit_rate,
authorization table, config hash, MAC key). Voltages are written as decimal
floats rounded to 1e-9 V; reading a written file back reproduces the stored
values bit-exactly, so repeated serialization is byte-stable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import ConfigParseError
from .signal_model import AuthorizationTable, VoltageFrame

FORMAT_VERSION = 1


@dataclass(frozen=True)
class TraceHeader:
    """Scenario metadata stored in the first line of a trace file."""

    ecu_count: int
    sample_rate: float
    bit_rate: float
    authorization: AuthorizationTable
    channel: str = "default"
    seed: int | None = None
    config_hash: str | None = None
    mac_key: str | None = None

    def to_json(self) -> str:
        payload = {
            "type": "header",
            "version": FORMAT_VERSION,
            "channel": self.channel,
            "ecu_count": self.ecu_count,
            "sample_rate": self.sample_rate,
            "bit_rate": self.bit_rate,
            "authorization": {str(k): v for k, v in sorted(self.authorization.entries.items())},
            "seed": self.seed,
            "config_hash": self.config_hash,
            "mac_key": self.mac_key,
        }
        return json.dumps(payload, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "TraceHeader":
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ConfigParseError(f"bad trace header: {exc}") from exc
        if obj.get("type") != "header":
            raise ConfigParseError("trace file does not start with a header line")
        return cls(
            ecu_count=int(obj["ecu_count"]),
            sample_rate=float(obj["sample_rate"]),
            bit_rate=float(obj["bit_rate"]),
            authorization=AuthorizationTable({int(k): int(v) for k, v in obj["authorization"].items()}),
            channel=obj.get("channel", "default"),
            seed=obj.get("seed"),
            config_hash=obj.get("config_hash"),
            mac_key=obj.get("mac_key"),
        )


def frame_to_json(frame: VoltageFrame) -> str:
    payload = {
        "seq": frame.seq,
        "true_ecu": frame.true_ecu,
        "claimed_id": frame.claimed_id,
        "authentic_tag": frame.authentic_tag,
        "mac_tag": frame.mac_tag,
        "attack": frame.attack,
        "trip": frame.trip,
        "temperature_c": frame.temperature_c,
        "sample_rate": frame.sample_rate,
        "bit_rate": frame.bit_rate,
        "data_bits": list(frame.data_bits),
        "samples": np.round(frame.samples, 9).tolist(),
    }
    return json.dumps(payload, separators=(",", ":"))


def frame_from_json(line: str) -> VoltageFrame:
    obj = json.loads(line)
    return VoltageFrame(
        seq=int(obj["seq"]),
        true_ecu=int(obj["true_ecu"]),
        claimed_id=int(obj["claimed_id"]),
        authentic_tag=bool(obj["authentic_tag"]),
        sample_rate=float(obj["sample_rate"]),
        bit_rate=float(obj["bit_rate"]),
        data_bits=tuple(obj["data_bits"]),
        samples=np.asarray(obj["samples"], dtype=float),
        trip=int(obj["trip"]),
        temperature_c=float(obj["temperature_c"]),
        attack=bool(obj.get("attack", False)),
        mac_tag=obj.get("mac_tag"),
    )


def write_trace(path: str | Path, header: TraceHeader, frames: Iterable[VoltageFrame]) -> int:
    """Write header plus frames; returns the number of frames written."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header.to_json() + "\n")
        for frame in frames:
            fh.write(frame_to_json(frame) + "\n")
            n += 1
    return n


def read_header(path: str | Path) -> TraceHeader:
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
    if not first:
        raise ConfigParseError(f"{path}: empty trace file")
    return TraceHeader.from_json(first)


def read_trace(path: str | Path) -> tuple[TraceHeader, list[VoltageFrame]]:
    header, frames = None, []
    with open(path, "r", encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            if i == 0:
                header = TraceHeader.from_json(line)
            else:
                frames.append(frame_from_json(line))
    if header is None:
        raise ConfigParseError(f"{path}: empty trace file")
    return header, frames


def iter_trace(path: str | Path) -> Iterator[VoltageFrame]:
    """Stream frames without materializing the whole trace."""
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
        TraceHeader.from_json(first)
        for line in fh:
            line = line.strip()
            if line:
                yield frame_from_json(line)
