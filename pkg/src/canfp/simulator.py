"""Synthetic analog CAN bus: per-ECU voltage traces with concept drift.

Each ECU has its own dominant-level offset, edge time constants, ringing and
thermal coefficient. Trips warm the electronics up (incremental drift),
standstills cool them down (recurring drift), and repair events re-randomize
the analog signature (abrupt drift). Measurement-point channels reshape the
same frames differently, and a configurable fraction of frames is turned into
identifier-spoofing attacks.
"""

from __future__ import annotations

import hashlib
import hmac
import json
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import ConfigParseError, NonDivisibleSampleRateError
from .signal_model import (
    DOMINANT_V,
    RECESSIVE_V,
    AuthorizationTable,
    EcuId,
    VoltageFrame,
)
from .trace_io import TraceHeader, write_trace

logger = logging.getLogger(__name__)

# Reference temperature for the thermal level shift: cooling below T_ref
# raises the dominant level (conductivity rises as components cool).
T_REF_C = 20.0


@dataclass(frozen=True)
class EcuProfile:
    """Analog signature parameters of one ECU.

    tau_rise/tau_fall are first-order edge time constants in seconds;
    alpha_thermal shifts the dominant level by volts per degree below T_ref;
    thermal_mass is the warm-up time constant of the node's electronics.
    """

    ecu: EcuId
    v_dominant_offset: float
    tau_rise: float
    tau_fall: float
    ring_amp: float
    ring_freq: float
    ring_damp: float
    alpha_thermal: float
    noise_sigma: float
    thermal_mass: float

    def __post_init__(self):
        if self.tau_rise <= 0 or self.tau_fall <= 0:
            raise ValueError("edge time constants must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if self.thermal_mass <= 0:
            raise ValueError("thermal_mass must be positive")

    def dominant_level(self, t_internal_c: float, t_ref_c: float = T_REF_C) -> float:
        return DOMINANT_V + self.v_dominant_offset + self.alpha_thermal * (t_ref_c - t_internal_c)


@dataclass(frozen=True)
class ChannelModel:
    """Measurement-point transfer: stretches edges, scales ringing and level."""

    name: str
    edge_stretch: float = 1.0
    ring_gain: float = 1.0
    level_gain: float = 1.0

    def __post_init__(self):
        if min(self.edge_stretch, self.ring_gain, self.level_gain) <= 0:
            raise ValueError("channel multipliers must be positive")


@dataclass(frozen=True)
class TripConfig:
    """One journey: frame budget, ambient conditions and drift events."""

    frame_count: int
    ambient_c: float
    standstill_before: float = 0.0
    consumers_noise_boost: float = 1.0
    repair_event: bool = False
    mac_frames_per_ecu: int = 0
    duration_s: float = 900.0

    def __post_init__(self):
        if self.frame_count <= 0:
            raise ValueError("frame_count must be positive")
        if self.consumers_noise_boost < 1.0:
            raise ValueError("consumers_noise_boost must be >= 1")


@dataclass(frozen=True)
class ThermalState:
    """Per-ECU internal temperatures plus the constants that drive them."""

    temps_c: tuple[float, ...]
    masses_s: tuple[float, ...]
    self_heating_c: float

    def temp_of(self, ecu: EcuId) -> float:
        return self.temps_c[ecu]


def init_thermal(profiles: Sequence[EcuProfile], ambient_c: float, self_heating_c: float) -> ThermalState:
    return ThermalState(
        temps_c=tuple(ambient_c for _ in profiles),
        masses_s=tuple(p.thermal_mass for p in profiles),
        self_heating_c=self_heating_c,
    )


def advance_thermal(thermal: ThermalState, dt: float, ambient_c: float, engine_on: bool) -> ThermalState:
    """Exponential relaxation toward ambient (+self-heating while running).

    dt=0 is the identity; two successive steps compose exactly like one
    (closed-form semigroup). dt must be non-negative.
    """
    if dt < 0:
        raise ValueError("dt must be non-negative")
    target = ambient_c + (thermal.self_heating_c if engine_on else 0.0)
    temps = tuple(
        target + (t - target) * math.exp(-dt / mass)
        for t, mass in zip(thermal.temps_c, thermal.masses_s)
    )
    return replace(thermal, temps_c=temps)


def synthesize_waveform(
    profile: EcuProfile,
    channel: ChannelModel,
    t_internal_c: float,
    data_bits: Sequence[int],
    sample_rate: float,
    bit_rate: float,
    rng: np.random.Generator,
    noise_boost: float = 1.0,
    t_ref_c: float = T_REF_C,
) -> np.ndarray:
    """Differential voltage samples for one data field.

    Each bit holds its nominal level (dominant level for 0, 0 V for 1); on a
    value change the waveform relaxes first-order with the ECU's tau stretched
    by the channel, plus a damped sinusoid ring in the direction of the edge.
    Zero-mean Gaussian noise is added to every sample. Deterministic given the
    rng state.
    """
    ratio = sample_rate / bit_rate
    spb = int(round(ratio))
    if abs(ratio - spb) > 1e-9 or spb < 1:
        raise NonDivisibleSampleRateError(
            f"sample_rate {sample_rate} is not an integer multiple of bit_rate {bit_rate}"
        )
    dt = 1.0 / sample_rate
    level = profile.dominant_level(t_internal_c, t_ref_c) * channel.level_gain
    ring_amp = profile.ring_amp * channel.ring_gain

    n_bits = len(data_bits)
    out = np.empty(n_bits * spb)
    t_bit = np.arange(spb) * dt

    prev_target = level if data_bits[0] == 0 else RECESSIVE_V
    v_start = prev_target  # first bit starts settled; edges only between data bits
    tau = profile.tau_rise * channel.edge_stretch
    for j, bit in enumerate(data_bits):
        target = level if bit == 0 else RECESSIVE_V
        seg = slice(j * spb, (j + 1) * spb)
        if target != prev_target:
            rising = target > prev_target
            tau = (profile.tau_rise if rising else profile.tau_fall) * channel.edge_stretch
            v_start = prev_target
            decay = np.exp(-t_bit / tau)
            wave = target + (v_start - target) * decay
            if ring_amp > 0.0:
                direction = 1.0 if rising else -1.0
                wave = wave + direction * ring_amp * np.exp(-profile.ring_damp * t_bit) * np.sin(
                    2.0 * math.pi * profile.ring_freq * t_bit
                )
            out[seg] = wave
            v_start = target + (v_start - target) * math.exp(-spb * dt / tau)
        else:
            # no transition: keep relaxing any residual toward the target
            residual = v_start - target
            if residual != 0.0:
                out[seg] = target + residual * np.exp(-t_bit / tau)
                v_start = target + residual * math.exp(-spb * dt / tau)
            else:
                out[seg] = target
        prev_target = target

    sigma = profile.noise_sigma * noise_boost
    if sigma > 0.0:
        out += rng.normal(0.0, sigma, out.shape)
    return out


def synthesize_frame(
    profile: EcuProfile,
    channel: ChannelModel,
    thermal: ThermalState,
    data_bits: Sequence[int],
    sample_rate: float,
    bit_rate: float,
    rng: np.random.Generator,
    *,
    seq: int = 0,
    claimed_id: int = 0,
    authentic_tag: bool = False,
    trip: int = 0,
    ambient_c: float = T_REF_C,
    noise_boost: float = 1.0,
    t_ref_c: float = T_REF_C,
) -> VoltageFrame:
    """One frame from one ECU under the given thermal state and channel."""
    samples = synthesize_waveform(
        profile, channel, thermal.temp_of(profile.ecu), data_bits,
        sample_rate, bit_rate, rng, noise_boost, t_ref_c,
    )
    return VoltageFrame(
        seq=seq,
        true_ecu=profile.ecu,
        claimed_id=claimed_id,
        authentic_tag=authentic_tag,
        sample_rate=sample_rate,
        bit_rate=bit_rate,
        data_bits=tuple(data_bits),
        samples=samples,
        trip=trip,
        temperature_c=ambient_c,
    )


def inject_attacks(
    frames: Iterable[VoltageFrame],
    rate: float,
    table: AuthorizationTable,
    rng: np.random.Generator,
) -> Iterator[VoltageFrame]:
    """Turn a fraction of frames into identifier-spoofing attacks.

    An attacked frame keeps its true sender's signal but claims an identifier
    authorized for a different ECU. Victims rotate per attacker so that every
    ordered (attacker, victim) pair occurs. Authenticated frames are never
    rewritten (their tag cannot be forged); attacked frames are flagged in
    metadata for evaluation only.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError("attack rate must lie in [0, 1]")
    ecus = table.ecus()
    rotation = {e: 0 for e in ecus}
    for frame in frames:
        if rate > 0.0 and not frame.authentic_tag and rng.random() < rate:
            others = [e for e in ecus if e != frame.true_ecu]
            if others:
                victim = others[rotation[frame.true_ecu] % len(others)]
                rotation[frame.true_ecu] += 1
                victim_id = table.identifiers_of(victim)[0]
                frame = replace(frame, claimed_id=victim_id, attack=True)
        yield frame


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to reproduce a data set: ECUs, trips, channels, seed."""

    ecu_count: int
    profiles: tuple[EcuProfile, ...]
    authorization: AuthorizationTable
    trips: tuple[TripConfig, ...]
    attack_rate: float = 0.0
    channels: tuple[ChannelModel, ...] = (ChannelModel(name="default"),)
    rng_seed: int = 0
    sample_rate: float = 20e6
    bit_rate: float = 500e3
    payload_bytes: int = 8
    payload_lead_zero_bytes: int = 0
    t_ref_c: float = T_REF_C
    self_heating_c: float = 15.0
    repair_offset_std_v: float = 0.015
    repair_tau_jitter: float = 0.10
    name: str = "scenario"

    def __post_init__(self):
        if not 0.0 <= self.attack_rate <= 1.0:
            raise ValueError("attack_rate must lie in [0, 1]")
        if not self.trips:
            raise ValueError("at least one trip required")
        if len(self.profiles) != self.ecu_count:
            raise ValueError("one profile per ECU required")
        if any(p.ecu != i for i, p in enumerate(self.profiles)):
            raise ValueError("profiles must be ordered by ECU index")

    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(scenario_to_dict(self), sort_keys=True).encode()).hexdigest()[:16]

    def mac_key(self) -> bytes:
        return hashlib.sha256(f"mac-key:{self.rng_seed}:{self.name}".encode()).digest()


def mac_tag_for(key: bytes, seq: int, ecu: EcuId) -> str:
    """Simulated MAC: keyed hash binding the frame sequence to its true sender."""
    return hmac.new(key, f"{seq}:{ecu}".encode(), hashlib.sha256).hexdigest()[:16]


def scenario_to_dict(config: ScenarioConfig) -> dict:
    return {
        "name": config.name,
        "rng_seed": config.rng_seed,
        "ecu_count": config.ecu_count,
        "sample_rate": config.sample_rate,
        "bit_rate": config.bit_rate,
        "payload_bytes": config.payload_bytes,
        "payload_lead_zero_bytes": config.payload_lead_zero_bytes,
        "t_ref_c": config.t_ref_c,
        "self_heating_c": config.self_heating_c,
        "attack_rate": config.attack_rate,
        "repair_offset_std_v": config.repair_offset_std_v,
        "repair_tau_jitter": config.repair_tau_jitter,
        "authorization": {str(k): v for k, v in sorted(config.authorization.entries.items())},
        "profiles": [
            {
                "ecu": p.ecu,
                "v_dominant_offset": p.v_dominant_offset,
                "tau_rise": p.tau_rise,
                "tau_fall": p.tau_fall,
                "ring_amp": p.ring_amp,
                "ring_freq": p.ring_freq,
                "ring_damp": p.ring_damp,
                "alpha_thermal": p.alpha_thermal,
                "noise_sigma": p.noise_sigma,
                "thermal_mass": p.thermal_mass,
            }
            for p in config.profiles
        ],
        "channels": [
            {
                "name": c.name,
                "edge_stretch": c.edge_stretch,
                "ring_gain": c.ring_gain,
                "level_gain": c.level_gain,
            }
            for c in config.channels
        ],
        "trips": [
            {
                "frame_count": t.frame_count,
                "ambient_c": t.ambient_c,
                "standstill_before": t.standstill_before,
                "consumers_noise_boost": t.consumers_noise_boost,
                "repair_event": t.repair_event,
                "mac_frames_per_ecu": t.mac_frames_per_ecu,
                "duration_s": t.duration_s,
            }
            for t in config.trips
        ],
    }


def scenario_from_dict(obj: dict) -> ScenarioConfig:
    try:
        profiles = tuple(
            EcuProfile(
                ecu=int(p["ecu"]),
                v_dominant_offset=float(p["v_dominant_offset"]),
                tau_rise=float(p["tau_rise"]),
                tau_fall=float(p["tau_fall"]),
                ring_amp=float(p["ring_amp"]),
                ring_freq=float(p["ring_freq"]),
                ring_damp=float(p["ring_damp"]),
                alpha_thermal=float(p["alpha_thermal"]),
                noise_sigma=float(p["noise_sigma"]),
                thermal_mass=float(p["thermal_mass"]),
            )
            for p in obj["profiles"]
        )
        channels = tuple(
            ChannelModel(
                name=str(c["name"]),
                edge_stretch=float(c.get("edge_stretch", 1.0)),
                ring_gain=float(c.get("ring_gain", 1.0)),
                level_gain=float(c.get("level_gain", 1.0)),
            )
            for c in obj.get("channels", [{"name": "default"}])
        )
        trips = tuple(
            TripConfig(
                frame_count=int(t["frame_count"]),
                ambient_c=float(t["ambient_c"]),
                standstill_before=float(t.get("standstill_before", 0.0)),
                consumers_noise_boost=float(t.get("consumers_noise_boost", 1.0)),
                repair_event=bool(t.get("repair_event", False)),
                mac_frames_per_ecu=int(t.get("mac_frames_per_ecu", 0)),
                duration_s=float(t.get("duration_s", 900.0)),
            )
            for t in obj["trips"]
        )
        return ScenarioConfig(
            ecu_count=int(obj["ecu_count"]),
            profiles=profiles,
            authorization=AuthorizationTable({int(k): int(v) for k, v in obj["authorization"].items()}),
            trips=trips,
            attack_rate=float(obj.get("attack_rate", 0.0)),
            channels=channels,
            rng_seed=int(obj.get("rng_seed", 0)),
            sample_rate=float(obj.get("sample_rate", 20e6)),
            bit_rate=float(obj.get("bit_rate", 500e3)),
            payload_bytes=int(obj.get("payload_bytes", 8)),
            payload_lead_zero_bytes=int(obj.get("payload_lead_zero_bytes", 0)),
            t_ref_c=float(obj.get("t_ref_c", T_REF_C)),
            self_heating_c=float(obj.get("self_heating_c", 15.0)),
            repair_offset_std_v=float(obj.get("repair_offset_std_v", 0.015)),
            repair_tau_jitter=float(obj.get("repair_tau_jitter", 0.10)),
            name=str(obj.get("name", "scenario")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigParseError(f"bad scenario config: {exc}") from exc


def load_scenario(path: str | Path) -> ScenarioConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigParseError(f"{path}: {exc}") from exc
    return scenario_from_dict(obj)


@dataclass
class _FrameSpec:
    """Channel-independent metadata of one scheduled frame."""

    seq: int
    ecu: EcuId
    claimed_id: int
    authentic: bool
    trip: int
    ambient_c: float
    t_internal_c: float
    data_bits: tuple[int, ...]


def _schedule_frames(config: ScenarioConfig) -> tuple[list[_FrameSpec], list[list[EcuProfile]]]:
    """Trip-by-trip emission plan: senders, payload bits and thermal history.

    MAC-tagged frames go out round-robin at the start of each trip; the rest
    of the trip picks senders uniformly at random. Repair events re-draw the
    dominant-level offsets (and jitter the edge taus) before the trip starts.
    Returns the frame specs plus the per-trip effective profiles.
    """
    seq_streams = np.random.SeedSequence(config.rng_seed).spawn(3)
    rng_sched = np.random.Generator(np.random.PCG64(seq_streams[0]))
    rng_bits = np.random.Generator(np.random.PCG64(seq_streams[1]))
    rng_repair = np.random.Generator(np.random.PCG64(seq_streams[2]))

    profiles = list(config.profiles)
    ecu_ids = [p.ecu for p in profiles]
    own_id = {e: config.authorization.identifiers_of(e)[0] for e in ecu_ids}
    # leading zeroed status bytes (common in periodic frames) keep every
    # symbol group populated regardless of the random payload tail
    lead = tuple([0] * (8 * min(config.payload_lead_zero_bytes, config.payload_bytes)))
    n_random = config.payload_bytes * 8 - len(lead)

    thermal = init_thermal(profiles, config.trips[0].ambient_c, config.self_heating_c)
    specs: list[_FrameSpec] = []
    repaired_profiles: list[list[EcuProfile]] = []
    seq = 0
    for trip_idx, trip in enumerate(config.trips):
        if trip.repair_event:
            for i, p in enumerate(profiles):
                d_off = rng_repair.normal(0.0, config.repair_offset_std_v)
                jit_r = 1.0 + rng_repair.uniform(-config.repair_tau_jitter, config.repair_tau_jitter)
                jit_f = 1.0 + rng_repair.uniform(-config.repair_tau_jitter, config.repair_tau_jitter)
                profiles[i] = replace(
                    p,
                    v_dominant_offset=p.v_dominant_offset + d_off,
                    tau_rise=p.tau_rise * jit_r,
                    tau_fall=p.tau_fall * jit_f,
                )
            logger.info("trip %d: repair event re-randomized ECU profiles", trip_idx)
        repaired_profiles.append(list(profiles))

        thermal = advance_thermal(thermal, trip.standstill_before, trip.ambient_c, engine_on=False)
        frame_dt = trip.duration_s / trip.frame_count

        # MAC frames per ECU go out in blocks so each classifier's trusted
        # batch completes (and any pending update can run) as early as possible
        mac_budget = trip.mac_frames_per_ecu * len(ecu_ids)
        for k in range(trip.frame_count):
            if k < mac_budget:
                ecu = ecu_ids[k // trip.mac_frames_per_ecu]
                authentic = True
            else:
                ecu = ecu_ids[int(rng_sched.integers(len(ecu_ids)))]
                authentic = False
            bits = lead + tuple(int(b) for b in rng_bits.integers(0, 2, n_random))
            specs.append(
                _FrameSpec(
                    seq=seq,
                    ecu=ecu,
                    claimed_id=own_id[ecu],
                    authentic=authentic,
                    trip=trip_idx,
                    ambient_c=trip.ambient_c,
                    t_internal_c=thermal.temp_of(ecu),
                    data_bits=bits,
                )
            )
            seq += 1
            thermal = advance_thermal(thermal, frame_dt, trip.ambient_c, engine_on=True)

    return specs, repaired_profiles


def run_scenario(config: ScenarioConfig, out_dir: str | Path) -> list[Path]:
    """Simulate the scenario and write one trace file per channel.

    All channels carry the same frames (sequence, sender, bits, attacks);
    only the voltage samples differ. Returns the written paths.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    specs, per_trip_profiles = _schedule_frames(config)
    noise_boost = {i: t.consumers_noise_boost for i, t in enumerate(config.trips)}
    key = config.mac_key()
    chash = config.config_hash()

    paths = []
    for ch_index, channel in enumerate(config.channels):
        rng_noise = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([config.rng_seed, 7001, ch_index]))
        )
        rng_attack = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([config.rng_seed, 7002]))
        )

        def build(channel=channel, rng_noise=rng_noise):
            for spec in specs:
                profile = per_trip_profiles[spec.trip][spec.ecu]
                samples = synthesize_waveform(
                    profile,
                    channel,
                    spec.t_internal_c,
                    spec.data_bits,
                    config.sample_rate,
                    config.bit_rate,
                    rng_noise,
                    noise_boost[spec.trip],
                    config.t_ref_c,
                )
                yield VoltageFrame(
                    seq=spec.seq,
                    true_ecu=spec.ecu,
                    claimed_id=spec.claimed_id,
                    authentic_tag=spec.authentic,
                    sample_rate=config.sample_rate,
                    bit_rate=config.bit_rate,
                    data_bits=spec.data_bits,
                    samples=samples,
                    trip=spec.trip,
                    temperature_c=spec.ambient_c,
                    mac_tag=mac_tag_for(key, spec.seq, spec.ecu) if spec.authentic else None,
                )

        frames = inject_attacks(build(), config.attack_rate, config.authorization, rng_attack)
        header = TraceHeader(
            ecu_count=config.ecu_count,
            sample_rate=config.sample_rate,
            bit_rate=config.bit_rate,
            authorization=config.authorization,
            channel=channel.name,
            seed=config.rng_seed,
            config_hash=chash,
            mac_key=key.hex(),
        )
        path = out_dir / f"{config.name}_{channel.name}.jsonl"
        n = write_trace(path, header, frames)
        logger.info("wrote %d frames to %s", n, path)
        paths.append(path)
    return paths
