"""One-vs-rest logistic regression for sender identification.

One binary classifier per ECU, trained from scratch by full-batch gradient
descent and adaptable in place with small trusted mini-batches. Per-ECU
sigmoid scores are normalized to a probability simplex for the downstream
threshold logic. Every update mixes in a bounded replay buffer so classifiers
of non-drifted ECUs are not forgotten.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    ConfigParseError,
    DegenerateFeaturesError,
    DimensionMismatchError,
    EmptyUpdateSetError,
    SingleClassError,
)
from .features import Standardizer, apply_standardizer
from .signal_model import EcuId

PROB_EPS = 1e-15


@dataclass(frozen=True)
class TrainConfig:
    """Gradient-descent schedule and regularization (all defaults overridable).

    Updates stop early once the gradient on the update batch falls below
    update_grad_tol: a batch the model already explains leaves the weights
    in place, while drifted data carries a far larger gradient and descends.
    """

    learning_rate: float = 0.35
    lr_decay: float = 0.0001
    l2: float = 1e-3
    max_epochs: int = 5000
    grad_tol: float = 1e-6
    update_learning_rate: float = 0.01
    update_max_epochs: int = 400
    update_grad_tol: float = 3e-3
    replay_per_ecu: int = 64


@dataclass(frozen=True)
class FingerprintModel:
    """Per-ECU linear classifiers plus the statistics needed to run and update them."""

    ecus: tuple[EcuId, ...]
    weights: np.ndarray  # (n_features, n_ecus)
    biases: np.ndarray  # (n_ecus,)
    standardizer: Standardizer
    reference_confidence: dict[EcuId, float]
    trained_frames_per_ecu: dict[EcuId, int]
    config: TrainConfig = field(default_factory=TrainConfig)
    replay_features: np.ndarray | None = None  # raw (unstandardized) rows
    replay_labels: np.ndarray | None = None
    training_seqs: tuple[int, ...] = ()
    trace_config_hash: str | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        b = np.asarray(self.biases, dtype=float)
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "biases", b)

    @property
    def n_features(self) -> int:
        return self.weights.shape[0]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _loss_and_grad(
    w: np.ndarray, b: np.ndarray, x: np.ndarray, y: np.ndarray, l2: float
) -> tuple[float, np.ndarray, np.ndarray]:
    """Summed per-class regularized cross-entropy and its gradient."""
    n = x.shape[0]
    p = _sigmoid(x @ w + b)
    pc = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    ce = -np.sum(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)) / n
    reg = 0.5 * l2 * float(np.sum(w * w))
    residual = p - y
    grad_w = x.T @ residual / n + l2 * w
    grad_b = np.mean(residual, axis=0)
    return ce + reg, grad_w, grad_b


def _descend(
    w: np.ndarray,
    b: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    l2: float,
    lr0: float,
    lr_decay: float,
    max_epochs: int,
    grad_tol: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Full-batch gradient descent with the fixed 1/(1+decay*epoch) schedule.

    The loss is asserted non-increasing every epoch (small float tolerance).
    """
    loss, grad_w, grad_b = _loss_and_grad(w, b, x, y, l2)
    for epoch in range(max_epochs):
        gnorm = np.sqrt(float(np.sum(grad_w**2) + np.sum(grad_b**2)))
        if gnorm <= grad_tol:
            break
        lr = lr0 / (1.0 + lr_decay * epoch)
        w = w - lr * grad_w
        b = b - lr * grad_b
        new_loss, grad_w, grad_b = _loss_and_grad(w, b, x, y, l2)
        assert new_loss <= loss + 1e-10 * max(1.0, abs(loss)), (
            f"loss increased at epoch {epoch}: {loss} -> {new_loss}"
        )
        loss = new_loss
    return w, b


def _one_hot(labels: np.ndarray, ecus: Sequence[EcuId]) -> np.ndarray:
    index = {e: i for i, e in enumerate(ecus)}
    y = np.zeros((labels.shape[0], len(ecus)))
    for row, lab in enumerate(labels):
        y[row, index[int(lab)]] = 1.0
    return y


def _normalized_probs(model: FingerprintModel, x_std: np.ndarray) -> np.ndarray:
    scores = _sigmoid(x_std @ model.weights + model.biases)
    scores = np.clip(scores, PROB_EPS, 1.0 - PROB_EPS)
    return scores / np.sum(scores, axis=-1, keepdims=True)


def _reference_confidence(
    model: FingerprintModel, x_raw: np.ndarray, labels: np.ndarray
) -> dict[EcuId, float]:
    x_std = apply_standardizer(model.standardizer, x_raw)
    probs = _normalized_probs(model, x_std)
    index = {e: i for i, e in enumerate(model.ecus)}
    out = {}
    for e in model.ecus:
        mask = labels == e
        if np.any(mask):
            out[e] = float(np.mean(probs[mask, index[e]]))
    return out


def train(
    features: np.ndarray,
    labels: Sequence[EcuId],
    config: TrainConfig = TrainConfig(),
    *,
    training_seqs: Sequence[int] = (),
    trace_config_hash: str | None = None,
) -> FingerprintModel:
    """Fit the per-ECU classifiers on raw (unstandardized) feature rows."""
    x_raw = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=int)
    ecus = tuple(sorted(set(int(e) for e in labels)))
    if len(ecus) < 2:
        raise SingleClassError("training data must contain at least two ECUs")
    if np.all(x_raw == x_raw[0]):
        raise DegenerateFeaturesError("all training rows are identical")

    from .features import fit_standardizer  # local import avoids cycle at module load

    standardizer = fit_standardizer(x_raw)
    x = apply_standardizer(standardizer, x_raw)
    y = _one_hot(labels, ecus)
    w0 = np.zeros((x.shape[1], len(ecus)))
    b0 = np.zeros(len(ecus))
    w, b = _descend(
        w0, b0, x, y, config.l2, config.learning_rate, config.lr_decay,
        config.max_epochs, config.grad_tol,
    )

    counts = {e: int(np.sum(labels == e)) for e in ecus}
    replay_x, replay_y = _trim_replay(x_raw, labels, ecus, config.replay_per_ecu)
    model = FingerprintModel(
        ecus=ecus,
        weights=w,
        biases=b,
        standardizer=standardizer,
        reference_confidence={},
        trained_frames_per_ecu=counts,
        config=config,
        replay_features=replay_x,
        replay_labels=replay_y,
        training_seqs=tuple(int(s) for s in training_seqs),
        trace_config_hash=trace_config_hash,
    )
    reference = _reference_confidence(model, x_raw, labels)
    return replace(model, reference_confidence=reference)


def _trim_replay(
    x: np.ndarray, labels: np.ndarray, ecus: Sequence[EcuId], per_ecu: int
) -> tuple[np.ndarray, np.ndarray]:
    keep: list[int] = []
    for e in ecus:
        rows = np.nonzero(labels == e)[0]
        keep.extend(rows[-per_ecu:])
    keep.sort()
    return x[keep], labels[keep]


def predict_proba(model: FingerprintModel, features: np.ndarray) -> np.ndarray:
    """Per-ECU probabilities (normalized sigmoid scores, summing to one)."""
    x = np.asarray(features, dtype=float)
    if x.shape[-1] != model.n_features:
        raise DimensionMismatchError(
            f"expected {model.n_features} features, got {x.shape[-1]}"
        )
    x_std = apply_standardizer(model.standardizer, x)
    return _normalized_probs(model, x_std)


def identify(model: FingerprintModel, features: np.ndarray) -> tuple[EcuId, float]:
    """Most probable sender; ties break toward the lowest ECU index."""
    probs = predict_proba(model, features)
    idx = int(np.argmax(probs))
    return model.ecus[idx], float(probs[idx])


def partial_update(
    model: FingerprintModel,
    features: np.ndarray,
    labels: Sequence[EcuId],
    config: TrainConfig | None = None,
) -> FingerprintModel:
    """Warm-start descent on the update set mixed with the replay buffer.

    Returns a new model; the input model is not modified. For every ECU that
    is absent from the update set, the replay buffer contributes its most
    recent trusted rows, so those classifiers stay anchored while the drifted
    ones adapt.
    """
    cfg = config or model.config
    x_new = np.atleast_2d(np.asarray(features, dtype=float))
    y_new = np.asarray(labels, dtype=int)
    if x_new.shape[0] == 0:
        raise EmptyUpdateSetError("update set is empty")
    if x_new.shape[1] != model.n_features:
        raise DimensionMismatchError(
            f"expected {model.n_features} features, got {x_new.shape[1]}"
        )
    unknown = set(int(e) for e in y_new) - set(model.ecus)
    if unknown:
        raise DimensionMismatchError(f"labels {sorted(unknown)} not covered by the model")

    covered = set(int(e) for e in y_new)
    if model.replay_features is not None and model.replay_features.size:
        anchor = np.isin(model.replay_labels, [e for e in model.ecus if e not in covered])
        x_all = np.vstack([model.replay_features[anchor], x_new])
        y_all = np.concatenate([model.replay_labels[anchor], y_new])
    else:
        x_all, y_all = x_new, y_new

    x_std = apply_standardizer(model.standardizer, x_all)
    y = _one_hot(y_all, model.ecus)
    w, b = _descend(
        model.weights.copy(), model.biases.copy(), x_std, y, cfg.l2,
        cfg.update_learning_rate, cfg.lr_decay, cfg.update_max_epochs, cfg.update_grad_tol,
    )
    replay_x, replay_y = _trim_replay(x_all, y_all, model.ecus, cfg.replay_per_ecu)
    updated = FingerprintModel(
        ecus=model.ecus,
        weights=w,
        biases=b,
        standardizer=model.standardizer,
        reference_confidence=dict(model.reference_confidence),
        trained_frames_per_ecu=dict(model.trained_frames_per_ecu),
        config=model.config,
        replay_features=replay_x,
        replay_labels=replay_y,
        training_seqs=model.training_seqs,
        trace_config_hash=model.trace_config_hash,
    )
    # re-measure the reference on the update set for the ECUs it covers
    new_reference = _reference_confidence(updated, x_new, y_new)
    merged = dict(updated.reference_confidence)
    merged.update(new_reference)
    return replace(updated, reference_confidence=merged)


def gradient_check(
    n_features: int,
    n_classes: int,
    rng: np.random.Generator,
    weight_scale: float = 1.0,
    n_rows: int = 8,
    step: float = 1e-5,
) -> float:
    """Max relative error between analytic and central finite-difference gradients."""
    x = rng.normal(0.0, 1.0, (n_rows, n_features))
    y = np.zeros((n_rows, n_classes))
    y[np.arange(n_rows), rng.integers(0, n_classes, n_rows)] = 1.0
    w = rng.normal(0.0, weight_scale, (n_features, n_classes)) if weight_scale > 0 else np.zeros(
        (n_features, n_classes)
    )
    b = rng.normal(0.0, weight_scale, n_classes) if weight_scale > 0 else np.zeros(n_classes)
    l2 = 1e-3

    _, grad_w, grad_b = _loss_and_grad(w, b, x, y, l2)
    worst = 0.0

    def loss_at(wm: np.ndarray, bm: np.ndarray) -> float:
        return _loss_and_grad(wm, bm, x, y, l2)[0]

    for i in range(n_features):
        for j in range(n_classes):
            wp, wm = w.copy(), w.copy()
            wp[i, j] += step
            wm[i, j] -= step
            numeric = (loss_at(wp, b) - loss_at(wm, b)) / (2 * step)
            denom = max(abs(grad_w[i, j]), abs(numeric), 1e-8)
            worst = max(worst, abs(grad_w[i, j] - numeric) / denom)
    for j in range(n_classes):
        bp, bm = b.copy(), b.copy()
        bp[j] += step
        bm[j] -= step
        numeric = (loss_at(w, bp) - loss_at(w, bm)) / (2 * step)
        denom = max(abs(grad_b[j]), abs(numeric), 1e-8)
        worst = max(worst, abs(grad_b[j] - numeric) / denom)
    return worst


def save_model(model: FingerprintModel, path: str | Path) -> None:
    payload = {
        "ecus": list(model.ecus),
        "weights": model.weights.tolist(),
        "biases": model.biases.tolist(),
        "standardizer_mean": model.standardizer.mean.tolist(),
        "standardizer_std": model.standardizer.std.tolist(),
        "reference_confidence": {str(k): v for k, v in sorted(model.reference_confidence.items())},
        "trained_frames_per_ecu": {str(k): v for k, v in sorted(model.trained_frames_per_ecu.items())},
        "config": {
            "learning_rate": model.config.learning_rate,
            "lr_decay": model.config.lr_decay,
            "l2": model.config.l2,
            "max_epochs": model.config.max_epochs,
            "grad_tol": model.config.grad_tol,
            "update_learning_rate": model.config.update_learning_rate,
            "update_max_epochs": model.config.update_max_epochs,
            "replay_per_ecu": model.config.replay_per_ecu,
        },
        "replay_features": None if model.replay_features is None else model.replay_features.tolist(),
        "replay_labels": None if model.replay_labels is None else model.replay_labels.tolist(),
        "training_seqs": list(model.training_seqs),
        "trace_config_hash": model.trace_config_hash,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_model(path: str | Path) -> FingerprintModel:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
        cfg = TrainConfig(**obj["config"])
        return FingerprintModel(
            ecus=tuple(int(e) for e in obj["ecus"]),
            weights=np.asarray(obj["weights"], dtype=float),
            biases=np.asarray(obj["biases"], dtype=float),
            standardizer=Standardizer(
                mean=np.asarray(obj["standardizer_mean"], dtype=float),
                std=np.asarray(obj["standardizer_std"], dtype=float),
            ),
            reference_confidence={int(k): float(v) for k, v in obj["reference_confidence"].items()},
            trained_frames_per_ecu={int(k): int(v) for k, v in obj["trained_frames_per_ecu"].items()},
            config=cfg,
            replay_features=None if obj["replay_features"] is None else np.asarray(obj["replay_features"]),
            replay_labels=None if obj["replay_labels"] is None else np.asarray(obj["replay_labels"], dtype=int),
            training_seqs=tuple(int(s) for s in obj["training_seqs"]),
            trace_config_hash=obj.get("trace_config_hash"),
        )
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise ConfigParseError(f"bad model file {path}: {exc}") from exc
