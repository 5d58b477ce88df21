"""Probe partial_update: same-data fixed point and drift adaptation."""

import numpy as np

from canfp.trace_io import read_trace
from canfp.preprocessing import extract_groups
from canfp.features import compute_features
from canfp import classifier as clf


def main():
    header, frames = read_trace("/tmp/sanity/sanity_obd.jsonl")
    feats, labels = [], []
    for f in frames:
        feats.append(compute_features(extract_groups(f)))
        labels.append(f.true_ecu)
    X, y = np.array(feats), np.array(labels)

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
    print(f"held-out acc {float(np.mean(pred == y[test_idx])):.4f}")
    print(f"mean reference {np.mean(list(model.reference_confidence.values())):.4f}")

    m2 = clf.partial_update(model, X[train_idx], y[train_idx])
    move = float(np.sqrt(np.sum((m2.weights - model.weights) ** 2) + np.sum((m2.biases - model.biases) ** 2)))
    print(f"same-data move: {move:.2e}  (< 1e-3 wanted)")

    # emulate a level-drift of ECU 3: shift its level-sensitive raw features
    drift_ecu = 3
    names = __import__("canfp.features", fromlist=["feature_names"]).feature_names()
    level_idx = [i for i, n in enumerate(names) if n.split("_", 1)[1] in ("mean", "rms", "max", "spec_mean")]
    test_c = test_idx[y[test_idx] == drift_ecu]
    Xd = X[test_c].copy()
    Xd[:, level_idx] *= 1.02  # 2% level rise
    pre_probs = clf.predict_proba(model, Xd)
    ci = list(model.ecus).index(drift_ecu)
    pre = float(np.mean(pre_probs[:, ci]))
    pre_acc = float(np.mean(np.argmax(pre_probs, axis=1) == ci))
    upd = Xd[:16]
    m3 = clf.partial_update(model, upd, np.full(16, drift_ecu))
    post_probs = clf.predict_proba(m3, Xd)
    post = float(np.mean(post_probs[:, ci]))
    post_acc = float(np.mean(np.argmax(post_probs, axis=1) == ci))
    print(f"drifted ECU{drift_ecu}: pre prob {pre:.3f} acc {pre_acc:.3f} -> post prob {post:.3f} acc {post_acc:.3f}")

    # other classes' accuracy must not degrade
    others = test_idx[y[test_idx] != drift_ecu]
    probs_o = clf.predict_proba(m3, X[others])
    pred_o = np.array([m3.ecus[i] for i in np.argmax(probs_o, axis=1)])
    print(f"other-class acc after update: {float(np.mean(pred_o == y[others])):.4f}")

    # update-set probability must rise
    pre_upd = float(np.mean(clf.predict_proba(model, upd)[:, ci]))
    post_upd = float(np.mean(clf.predict_proba(m3, upd)[:, ci]))
    print(f"update-set prob: {pre_upd:.3f} -> {post_upd:.3f}")


if __name__ == "__main__":
    main()
