"""Probe class separability across profile spacings and payload sizes."""

import sys
import numpy as np

from canfp.simulator import ChannelModel, EcuProfile, ScenarioConfig, TripConfig, run_scenario
from canfp.signal_model import AuthorizationTable
from canfp.trace_io import read_trace
from canfp.preprocessing import extract_groups
from canfp.features import compute_features
from canfp import classifier as clf


def make_profiles(n, spacing=1.0, noise=0.005):
    return tuple(
        EcuProfile(
            ecu=e,
            v_dominant_offset=(-0.055 + 0.022 * e) * spacing,
            tau_rise=330e-9 + 45e-9 * e,
            tau_fall=350e-9 + 45e-9 * e,
            ring_amp=0.038 + 0.016 * e,
            ring_freq=2.1e6 + 0.55e6 * e,
            ring_damp=3.8e6 + 0.55e6 * e,
            alpha_thermal=0.0006 + 0.00016 * e,
            noise_sigma=noise,
            thermal_mass=540.0 + 24.0 * e,
        )
        for e in range(n)
    )


def run(payload, spacing, noise, seed=7):
    table = AuthorizationTable({0x100 + 0x10 * e: e for e in range(6)})
    cfg = ScenarioConfig(
        ecu_count=6,
        profiles=make_profiles(6, spacing, noise),
        authorization=table,
        trips=(TripConfig(frame_count=1600, ambient_c=25.0, duration_s=900.0),),
        attack_rate=0.0,
        channels=(ChannelModel(name="obd"),),
        rng_seed=seed,
        payload_bytes=payload,
        name=f"sep{payload}",
    )
    paths = run_scenario(cfg, "/tmp/sep")
    header, frames = read_trace(paths[0])
    X = np.array([compute_features(extract_groups(f)) for f in frames])
    y = np.array([f.true_ecu for f in frames])
    train_idx, count = [], {e: 0 for e in range(6)}
    for i, lab in enumerate(y):
        if count[lab] < 200:
            train_idx.append(i)
            count[lab] += 1
    train_idx = np.array(train_idx)
    test_idx = np.setdiff1d(np.arange(len(y)), train_idx)
    model = clf.train(X[train_idx], y[train_idx])
    probs = clf.predict_proba(model, X[test_idx])
    pred = np.array([model.ecus[i] for i in np.argmax(probs, axis=1)])
    acc = float(np.mean(pred == y[test_idx]))
    ref = np.mean(list(model.reference_confidence.values()))
    pc = probs[np.arange(len(test_idx)), [list(model.ecus).index(t) for t in y[test_idx]]]
    print(
        f"payload={payload} spacing={spacing} noise={noise*1000:.0f}mV: "
        f"acc={acc:.4f} errors={int(np.sum(pred != y[test_idx]))}/{len(test_idx)} "
        f"ref={ref:.3f} p5={np.percentile(pc,5):.3f}"
    )


if __name__ == "__main__":
    for payload, spacing, noise in [(3, 1.0, 0.005), (4, 1.0, 0.005), (3, 1.3, 0.005), (4, 1.3, 0.005), (4, 1.0, 0.004)]:
        run(payload, spacing, noise)
