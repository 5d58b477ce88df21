"""Generate the bundled scenario presets as JSON package data."""

import json
from pathlib import Path

from canfp.simulator import (
    ChannelModel,
    EcuProfile,
    ScenarioConfig,
    TripConfig,
    scenario_to_dict,
)
from canfp.signal_model import AuthorizationTable

PRESET_DIR = Path(__file__).resolve().parent.parent / "src" / "canfp" / "presets"

MV = 1e-3
NS = 1e-9

OFFSETS = [-72, -43, -14, 14, 43, 72]
TAU_R = [330, 420, 510, 375, 465, 555]
TAU_F = [485, 350, 575, 440, 530, 395]
RING_AMP = [70, 118, 54, 102, 38, 86]
RING_FREQ = [3.2e6, 4.85e6, 2.65e6, 4.3e6, 2.1e6, 3.75e6]
RING_DAMP = [4.9e6, 6.55e6, 4.35e6, 6.0e6, 3.8e6, 5.45e6]
ALPHA = [0.50, 0.65, 0.80, 0.95, 1.10, 1.25]
MASS = [540, 564, 588, 612, 636, 660]


def vehicle_profiles(noise=0.0048):
    return tuple(
        EcuProfile(
            ecu=e,
            v_dominant_offset=OFFSETS[e] * MV,
            tau_rise=TAU_R[e] * NS,
            tau_fall=TAU_F[e] * NS,
            ring_amp=RING_AMP[e] * MV,
            ring_freq=RING_FREQ[e],
            ring_damp=RING_DAMP[e],
            alpha_thermal=ALPHA[e] * MV,
            noise_sigma=noise,
            thermal_mass=float(MASS[e]),
        )
        for e in range(6)
    )


def vehicle_table():
    return AuthorizationTable({0x100 + 0x10 * e: e for e in range(6)})


SUMMER_TRIPS = (
    TripConfig(2000, 25.0, 0.0, 1.0, False, 16, 1800.0),
    TripConfig(600, 25.0, 900.0, 1.0, False, 16, 900.0),
    TripConfig(700, 32.0, 13500.0, 1.1, False, 16, 900.0),
    TripConfig(500, 36.0, 180.0, 1.0, False, 16, 900.0),
)

WINTER_TRIPS = (
    TripConfig(700, 10.0, 1.14e7, 1.15, True, 16, 900.0),
    TripConfig(600, 5.0, 6360.0, 1.15, False, 16, 900.0),
    TripConfig(1200, 5.0, 5700.0, 1.15, False, 16, 1800.0),
    TripConfig(600, 5.0, 79200.0, 1.15, False, 16, 900.0),
    TripConfig(600, 5.0, 5460.0, 1.15, False, 16, 900.0),
    TripConfig(600, 2.0, 64800.0, 1.15, False, 16, 900.0),
    TripConfig(600, 2.0, 14700.0, 1.15, False, 16, 900.0),
    TripConfig(600, 0.0, 72000.0, 1.15, False, 16, 900.0),
    TripConfig(600, 0.0, 72000.0, 1.15, False, 16, 900.0),
)


def composite():
    return ScenarioConfig(
        ecu_count=6,
        profiles=vehicle_profiles(),
        authorization=vehicle_table(),
        trips=SUMMER_TRIPS + WINTER_TRIPS,
        attack_rate=0.05,
        channels=(ChannelModel(name="obd"),),
        rng_seed=20260810,
        payload_bytes=5,
        payload_lead_zero_bytes=1,
        self_heating_c=8.0,
        repair_offset_std_v=0.018,
        repair_tau_jitter=0.10,
        name="composite",
    )


def summer():
    return ScenarioConfig(
        ecu_count=6,
        profiles=vehicle_profiles(),
        authorization=vehicle_table(),
        trips=SUMMER_TRIPS,
        attack_rate=0.05,
        channels=(ChannelModel(name="obd"),),
        rng_seed=20260811,
        payload_bytes=5,
        payload_lead_zero_bytes=1,
        self_heating_c=8.0,
        name="summer",
    )


def winter():
    trips = (WINTER_TRIPS[0],) + WINTER_TRIPS[1:]
    trips = (
        TripConfig(
            frame_count=trips[0].frame_count,
            ambient_c=trips[0].ambient_c,
            standstill_before=0.0,
            consumers_noise_boost=trips[0].consumers_noise_boost,
            repair_event=False,
            mac_frames_per_ecu=trips[0].mac_frames_per_ecu,
            duration_s=trips[0].duration_s,
        ),
    ) + trips[1:]
    return ScenarioConfig(
        ecu_count=6,
        profiles=vehicle_profiles(),
        authorization=vehicle_table(),
        trips=trips,
        attack_rate=0.05,
        channels=(ChannelModel(name="obd"),),
        rng_seed=20260812,
        payload_bytes=5,
        payload_lead_zero_bytes=1,
        self_heating_c=8.0,
        name="winter",
    )


def chamber():
    alphas = [0.5, 0.75, 1.0, 1.25]
    taus = [330, 430, 380, 460]
    profiles = tuple(
        EcuProfile(
            ecu=e,
            v_dominant_offset=(-30 + 20 * e) * MV,
            tau_rise=taus[e] * NS,
            tau_fall=(taus[e] + 35) * NS,
            ring_amp=(45 + 18 * e) * MV,
            ring_freq=2.2e6 + 0.7e6 * e,
            ring_damp=4.2e6 + 0.6e6 * e,
            alpha_thermal=alphas[e] * MV,
            noise_sigma=0.002,
            thermal_mass=200.0,
        )
        for e in range(4)
    )
    trips = tuple(
        TripConfig(250, -20.0 + 10.0 * k, 3600.0, 1.0, False, 0, 900.0)
        for k in range(9)
    )
    return ScenarioConfig(
        ecu_count=4,
        profiles=profiles,
        authorization=AuthorizationTable({0x200 + 0x10 * e: e for e in range(4)}),
        trips=trips,
        attack_rate=0.0,
        channels=(ChannelModel(name="chamber"),),
        rng_seed=20260813,
        payload_bytes=5,
        payload_lead_zero_bytes=1,
        self_heating_c=2.0,
        name="chamber",
    )


def twochannel():
    return ScenarioConfig(
        ecu_count=6,
        profiles=vehicle_profiles(),
        authorization=vehicle_table(),
        trips=(
            TripConfig(1800, 20.0, 0.0, 1.0, False, 16, 1800.0),
            TripConfig(700, 12.0, 43200.0, 1.1, False, 16, 900.0),
            TripConfig(700, 5.0, 43200.0, 1.1, False, 16, 900.0),
        ),
        attack_rate=0.05,
        channels=(
            ChannelModel(name="obd", edge_stretch=1.0, ring_gain=1.0, level_gain=1.0),
            ChannelModel(name="trunk", edge_stretch=1.25, ring_gain=0.7, level_gain=0.985),
        ),
        rng_seed=20260814,
        payload_bytes=5,
        payload_lead_zero_bytes=1,
        self_heating_c=8.0,
        name="twochannel",
    )


def main():
    PRESET_DIR.mkdir(parents=True, exist_ok=True)
    for build in (composite, summer, winter, chamber, twochannel):
        cfg = build()
        path = PRESET_DIR / f"{cfg.name}.json"
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(scenario_to_dict(cfg), fh, indent=2)
            fh.write("\n")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
