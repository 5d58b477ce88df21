"""Quick pipeline sanity check: simulate, featurize, train, classify."""

import time

import numpy as np

from canfp.simulator import (
    ChannelModel,
    EcuProfile,
    ScenarioConfig,
    TripConfig,
    run_scenario,
)
from canfp.signal_model import AuthorizationTable
from canfp.trace_io import read_trace
from canfp.preprocessing import extract_groups
from canfp.features import compute_features
from canfp import classifier as clf


def small_config(n_ecus=6, frames=1600, noise=0.005, seed=42):
    profiles = tuple(
        EcuProfile(
            ecu=e,
            v_dominant_offset=-0.045 + 0.018 * e,
            tau_rise=340e-9 + 40e-9 * e,
            tau_fall=360e-9 + 40e-9 * e,
            ring_amp=0.040 + 0.015 * e,
            ring_freq=2.2e6 + 0.5e6 * e,
            ring_damp=4.0e6 + 0.5e6 * e,
            alpha_thermal=0.0006 + 0.00015 * e,
            noise_sigma=noise,
            thermal_mass=600.0,
        )
        for e in range(n_ecus)
    )
    table = AuthorizationTable({0x100 + 0x10 * e: e for e in range(n_ecus)})
    return ScenarioConfig(
        ecu_count=n_ecus,
        profiles=profiles,
        authorization=table,
        trips=(TripConfig(frame_count=frames, ambient_c=25.0, duration_s=900.0),),
        attack_rate=0.0,
        channels=(ChannelModel(name="obd"),),
        rng_seed=seed,
        payload_bytes=3,
        name="sanity",
    )


def main():
    cfg = small_config()
    t0 = time.time()
    paths = run_scenario(cfg, "/tmp/sanity")
    t1 = time.time()
    header, frames = read_trace(paths[0])
    t2 = time.time()
    print(f"simulated {len(frames)} frames in {t1-t0:.2f}s, read in {t2-t1:.2f}s")
    import os
    print(f"file size: {os.path.getsize(paths[0])/1e6:.1f} MB")

    t0 = time.time()
    feats = []
    labels = []
    for f in frames:
        g = extract_groups(f)
        feats.append(compute_features(g))
        labels.append(f.true_ecu)
    X = np.array(feats)
    y = np.array(labels)
    t1 = time.time()
    print(f"featurized in {t1-t0:.2f}s ({(t1-t0)/len(frames)*1000:.2f} ms/frame)")

    # first 200 per ECU for training
    train_idx = []
    count = {e: 0 for e in range(cfg.ecu_count)}
    for i, lab in enumerate(y):
        if count[lab] < 200:
            train_idx.append(i)
            count[lab] += 1
    train_idx = np.array(train_idx)
    test_idx = np.setdiff1d(np.arange(len(y)), train_idx)

    t0 = time.time()
    model = clf.train(X[train_idx], y[train_idx])
    t1 = time.time()
    probs = clf.predict_proba(model, X[test_idx])
    pred = np.array([model.ecus[i] for i in np.argmax(probs, axis=1)])
    acc = float(np.mean(pred == y[test_idx]))
    pcorrect = probs[np.arange(len(test_idx)), [list(model.ecus).index(t) for t in y[test_idx]]]
    print(f"trained in {t1-t0:.2f}s; held-out identification {acc:.4f}")
    print(f"reference confidence: {model.reference_confidence}")
    print(f"held-out mean correct-class prob: {float(np.mean(pcorrect)):.4f}")

    # gradient magnitude at end of training (for partial_update fixed-point check)
    from canfp.classifier import _loss_and_grad, _one_hot
    from canfp.features import apply_standardizer
    xs = apply_standardizer(model.standardizer, X[train_idx])
    loss, gw, gb = _loss_and_grad(model.weights, model.biases, xs, _one_hot(y[train_idx], model.ecus), model.config.l2)
    gn = np.sqrt(np.sum(gw**2) + np.sum(gb**2))
    print(f"final train loss {loss:.6f}, grad norm {gn:.2e}")

    m2 = clf.partial_update(model, X[train_idx], y[train_idx])
    move = np.sqrt(np.sum((m2.weights - model.weights) ** 2) + np.sum((m2.biases - model.biases) ** 2))
    print(f"partial_update on same data: weight move {move:.2e}")


if __name__ == "__main__":
    main()
