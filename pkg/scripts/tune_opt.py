"""Probe optimizer schedules: convergence, stability, held-out accuracy."""

import time

import numpy as np

from canfp.trace_io import read_trace
from canfp.preprocessing import extract_groups
from canfp.features import compute_features, fit_standardizer, apply_standardizer
from canfp import classifier as clf
from canfp.classifier import TrainConfig, _loss_and_grad, _one_hot


def load_features():
    header, frames = read_trace("/tmp/sanity/sanity_obd.jsonl")
    feats, labels = [], []
    for f in frames:
        feats.append(compute_features(extract_groups(f)))
        labels.append(f.true_ecu)
    return np.array(feats), np.array(labels)


def main():
    X, y = load_features()
    train_idx, count = [], {e: 0 for e in range(6)}
    for i, lab in enumerate(y):
        if count[lab] < 200:
            train_idx.append(i)
            count[lab] += 1
    train_idx = np.array(train_idx)
    test_idx = np.setdiff1d(np.arange(len(y)), train_idx)

    std = fit_standardizer(X[train_idx])
    Xs = apply_standardizer(std, X[train_idx])
    cov = Xs.T @ Xs / Xs.shape[0]
    eigs = np.linalg.eigvalsh(cov)
    print(f"feature cov eigs: max {eigs[-1]:.2f}, min {eigs[0]:.2e}")
    print(f"stability bound 2/L with L=0.25*max+l2: lr < {2/(0.25*eigs[-1]+1e-3):.3f}")

    for lr0, decay, l2, epochs in [
        (0.1, 0.01, 1e-3, 5000),
        (0.3, 0.0002, 1e-3, 5000),
        (0.5, 0.0002, 1e-3, 5000),
        (0.3, 0.0002, 3e-3, 5000),
        (0.5, 0.0, 1e-3, 5000),
    ]:
        cfg = TrainConfig(learning_rate=lr0, lr_decay=decay, l2=l2, max_epochs=epochs)
        t0 = time.time()
        try:
            model = clf.train(X[train_idx], y[train_idx], cfg)
        except AssertionError as exc:
            print(f"lr0={lr0} decay={decay} l2={l2}: UNSTABLE ({exc})")
            continue
        dt = time.time() - t0
        xs = apply_standardizer(model.standardizer, X[train_idx])
        loss, gw, gb = _loss_and_grad(
            model.weights, model.biases, xs, _one_hot(y[train_idx], model.ecus), l2
        )
        gn = float(np.sqrt(np.sum(gw**2) + np.sum(gb**2)))
        probs = clf.predict_proba(model, X[test_idx])
        pred = np.array([model.ecus[i] for i in np.argmax(probs, axis=1)])
        acc = float(np.mean(pred == y[test_idx]))
        ref = np.mean(list(model.reference_confidence.values()))
        m2 = clf.partial_update(model, X[train_idx], y[train_idx], cfg)
        move = float(
            np.sqrt(np.sum((m2.weights - model.weights) ** 2) + np.sum((m2.biases - model.biases) ** 2))
        )
        print(
            f"lr0={lr0} decay={decay} l2={l2}: {dt:.1f}s loss={loss:.4f} "
            f"grad={gn:.2e} acc={acc:.4f} ref={ref:.3f} same-move={move:.2e}"
        )


if __name__ == "__main__":
    main()
