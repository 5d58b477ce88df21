"""Diagnose which frames misclassify: class pairs, symbol counts, margins."""

import numpy as np

from canfp.simulator import ChannelModel, EcuProfile, ScenarioConfig, TripConfig, run_scenario
from canfp.signal_model import AuthorizationTable, count_transitions
from canfp.trace_io import read_trace
from canfp.preprocessing import extract_groups
from canfp.features import compute_features
from canfp import classifier as clf
from probe_sep import make_profiles


def main():
    table = AuthorizationTable({0x100 + 0x10 * e: e for e in range(6)})
    cfg = ScenarioConfig(
        ecu_count=6,
        profiles=make_profiles(6, 1.3, 0.005),
        authorization=table,
        trips=(TripConfig(frame_count=1600, ambient_c=25.0, duration_s=900.0),),
        attack_rate=0.0,
        channels=(ChannelModel(name="obd"),),
        rng_seed=7,
        payload_bytes=4,
        name="diag",
    )
    paths = run_scenario(cfg, "/tmp/diag")
    header, frames = read_trace(paths[0])
    X = np.array([compute_features(extract_groups(f)) for f in frames])
    y = np.array([f.true_ecu for f in frames])
    k1 = np.array([count_transitions(f.data_bits)[0] for f in frames])
    ndom = np.array([sum(1 for b in f.data_bits if b == 0) for f in frames])

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
    errs = np.nonzero(pred != y[test_idx])[0]
    print(f"errors: {len(errs)}/{len(test_idx)}")
    for i in errs:
        gi = test_idx[i]
        print(
            f"  frame seq {frames[gi].seq}: true {y[gi]} pred {pred[i]} "
            f"p_true {probs[i, list(model.ecus).index(y[gi])]:.3f} p_pred {np.max(probs[i]):.3f} "
            f"K1={k1[gi]} ndom={ndom[gi]}"
        )
    # margin distribution for correct frames
    pc = probs[np.arange(len(test_idx)), [list(model.ecus).index(t) for t in y[test_idx]]]
    print(f"correct-class prob percentiles: p1={np.percentile(pc,1):.3f} p5={np.percentile(pc,5):.3f} p50={np.percentile(pc,50):.3f}")
    print(f"K1 distribution: min {k1.min()}, p5 {np.percentile(k1,5):.0f}, mean {k1.mean():.1f}")


if __name__ == "__main__":
    import sys
    sys.path.insert(0, "scripts")
    main()
