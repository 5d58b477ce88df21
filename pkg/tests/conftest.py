"""Shared fixtures: small scenarios for unit tests, cached preset runs for acceptance."""

from __future__ import annotations

import numpy as np
import pytest

from canfp.signal_model import AuthorizationTable
from canfp.simulator import (
    ChannelModel,
    EcuProfile,
    ScenarioConfig,
    TripConfig,
    run_scenario,
)
from canfp.trace_io import read_trace


def make_profile(ecu, **overrides):
    base = dict(
        ecu=ecu,
        v_dominant_offset=-0.04 + 0.027 * ecu,
        tau_rise=(340 + 60 * ecu) * 1e-9,
        tau_fall=(480 - 50 * ecu) * 1e-9,
        ring_amp=0.045 + 0.02 * ecu,
        ring_freq=2.4e6 + 0.8e6 * ecu,
        ring_damp=4.5e6 + 0.7e6 * ecu,
        alpha_thermal=(0.6 + 0.25 * ecu) * 1e-3,
        noise_sigma=0.004,
        thermal_mass=500.0,
    )
    base.update(overrides)
    return EcuProfile(**base)


def small_scenario(
    n_ecus=3,
    frames=240,
    noise=0.004,
    seed=11,
    attack_rate=0.0,
    trips=None,
    channels=(ChannelModel(name="obd"),),
    **overrides,
):
    profiles = tuple(make_profile(e, noise_sigma=noise) for e in range(n_ecus))
    table = AuthorizationTable({0x100 + 0x10 * e: e for e in range(n_ecus)})
    if trips is None:
        trips = (TripConfig(frame_count=frames, ambient_c=22.0, duration_s=600.0),)
    params = dict(
        ecu_count=n_ecus,
        profiles=profiles,
        authorization=table,
        trips=trips,
        attack_rate=attack_rate,
        channels=channels,
        rng_seed=seed,
        payload_bytes=3,
        payload_lead_zero_bytes=1,
        self_heating_c=8.0,
        name="unit",
    )
    params.update(overrides)
    return ScenarioConfig(**params)


@pytest.fixture(scope="session")
def unit_trace(tmp_path_factory):
    """A small clean 3-ECU trace shared by unit tests."""
    cfg = small_scenario(frames=420)
    out = tmp_path_factory.mktemp("unit_trace")
    paths = run_scenario(cfg, out)
    header, frames = read_trace(paths[0])
    return cfg, header, frames


@pytest.fixture(scope="session")
def trained_small(unit_trace):
    """Model trained on the first 60 frames per ECU of the unit trace."""
    from canfp import classifier as clf
    from canfp.cli import featurize_frames

    cfg, header, frames = unit_trace
    picks, count = [], {}
    for i, f in enumerate(frames):
        c = count.get(f.true_ecu, 0)
        if c < 60:
            picks.append(i)
            count[f.true_ecu] = c + 1
    feats = featurize_frames([frames[i] for i in picks])
    labels = [frames[i].true_ecu for i in picks]
    seqs = [frames[i].seq for i in picks]
    model = clf.train(feats, labels, training_seqs=seqs, trace_config_hash=header.config_hash)
    return model, header, frames
