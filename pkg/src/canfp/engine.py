"""Online intrusion-detection pipeline with drift-aware model updates.

Per frame: preprocess, featurize, classify, then apply the dual-threshold
rule. A per-ECU EWMA of the authorized-class probability is compared against
the training reference; when it sags below the upper threshold a model update
is triggered from recently collected trusted frames. If not enough trusted
frames exist (abrupt drift), the engine requests MAC-authenticated frames and
freezes the model until they arrive, which blocks poisoning.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import classifier as clf
from .classifier import FingerprintModel
from .errors import (
    CanfpError,
    InsufficientTrustedFramesError,
    SeqMismatchError,
    ZeroRateError,
)
from .features import compute_features
from .preprocessing import GroupConfig, extract_groups
from .signal_model import AuthorizationTable, EcuId, VoltageFrame, validate_frame
from .simulator import mac_tag_for

logger = logging.getLogger(__name__)


class Decision(str, Enum):
    AUTHORIZED = "Authorized"
    SUSPICIOUS = "Suspicious"
    INTRUSION = "Intrusion"


class DriftKind(str, Enum):
    INCREMENTAL = "Incremental"
    ABRUPT = "Abrupt"


class TrustCriterion(str, Enum):
    HIGH_PROBABILITY = "HighProbability"
    MAC_AUTHENTICATED = "MacAuthenticated"


@dataclass(frozen=True)
class ThresholdConfig:
    """Dual decision thresholds on the probability simplex."""

    t_low: float = 0.2
    t_high: float = 0.8

    def __post_init__(self):
        if not (0.0 < self.t_low <= self.t_high < 1.0):
            raise ValueError("thresholds must satisfy 0 < t_low <= t_high < 1")


@dataclass(frozen=True)
class Verdict:
    """Per-frame IDS output."""

    seq: int
    predicted: EcuId | None
    probabilities: tuple[float, ...] | None
    decision: Decision
    authorized_ecu: EcuId | None
    p_authorized: float | None = None
    max_other: float | None = None
    annotation: str | None = None


@dataclass(frozen=True)
class DriftEvent:
    seq: int
    ecu: EcuId
    ewma: float
    kind: DriftKind


@dataclass(frozen=True)
class MacRequest:
    """Ask for MAC-authenticated frames of this ECU before updating."""

    ecu: EcuId
    seq: int


def decide(
    probabilities: Sequence[float],
    authorized_index: int,
    thresholds: ThresholdConfig,
) -> Decision:
    """Dual-threshold rule on one frame's probability simplex.

    Authorized when the eligible ECU's probability reaches t_low; Intrusion
    only when it stays below t_low while some other ECU exceeds t_high;
    Suspicious otherwise.
    """
    probs = np.asarray(probabilities, dtype=float)
    if probs[authorized_index] >= thresholds.t_low:
        return Decision.AUTHORIZED
    others = np.delete(probs, authorized_index)
    if others.size and float(np.max(others)) >= thresholds.t_high:
        return Decision.INTRUSION
    return Decision.SUSPICIOUS


def decide_argmax(probabilities: Sequence[float], authorized_index: int) -> Decision:
    """Threshold-free variant: any misidentified frame counts as an intrusion."""
    probs = np.asarray(probabilities, dtype=float)
    return Decision.AUTHORIZED if int(np.argmax(probs)) == authorized_index else Decision.INTRUSION


class ConfidenceMonitor:
    """Per-ECU EWMA of the authorized-class probability vs. its training reference."""

    def __init__(self, reference: Mapping[EcuId, float], beta: float = 0.05, warmup: int = 20):
        self.beta = beta
        self.warmup = warmup
        self.reference = dict(reference)
        self._ewma: dict[EcuId, float] = dict(reference)
        self._count: dict[EcuId, int] = {e: 0 for e in reference}

    def update(self, ecu: EcuId, p_authorized: float) -> float:
        prev = self._ewma.get(ecu, self.reference.get(ecu, 0.5))
        value = (1.0 - self.beta) * prev + self.beta * p_authorized
        self._ewma[ecu] = value
        self._count[ecu] = self._count.get(ecu, 0) + 1
        return value

    def value(self, ecu: EcuId) -> float:
        return self._ewma.get(ecu, self.reference.get(ecu, 0.5))

    def is_warm(self, ecu: EcuId) -> bool:
        return self._count.get(ecu, 0) >= self.warmup


@dataclass(frozen=True)
class UpdateEntry:
    features: np.ndarray
    label: EcuId
    criterion: TrustCriterion
    seq: int
    trip: int


class UpdateSet:
    """Per-ECU bounded FIFO of trusted (features, label) pairs.

    Only entries meeting a trust criterion are admitted. Entries are dropped
    when the trip changes: after a standstill the signal level rebounds, so
    frames collected in an earlier trip no longer describe the current one.
    """

    def __init__(self, capacity: int = 64):
        self.capacity = capacity
        self._entries: dict[EcuId, deque[UpdateEntry]] = {}

    def admit(self, entry: UpdateEntry) -> None:
        self._entries.setdefault(entry.label, deque(maxlen=self.capacity)).append(entry)

    def recent(self, ecu: EcuId, criterion: TrustCriterion, n: int) -> list[UpdateEntry]:
        pool = [e for e in self._entries.get(ecu, ()) if e.criterion == criterion]
        return pool[-n:]

    def count(self, ecu: EcuId, criterion: TrustCriterion) -> int:
        return sum(1 for e in self._entries.get(ecu, ()) if e.criterion == criterion)

    def clear(self) -> None:
        self._entries.clear()


@dataclass(frozen=True)
class IdsConfig:
    """Engine parameters; defaults mirror the evaluation setup."""

    thresholds: ThresholdConfig = field(default_factory=ThresholdConfig)
    ewma_beta: float = 0.05
    monitor_warmup: int = 20
    cooldown_frames: int = 200
    update_batch: int = 16
    update_set_capacity: int = 64
    enable_updates: bool = True
    use_thresholds: bool = True
    group_config: GroupConfig = field(default_factory=GroupConfig)


def handle_drift(
    event: DriftEvent,
    update_set: UpdateSet,
    model: FingerprintModel,
    batch: int = 16,
) -> FingerprintModel | MacRequest:
    """React to a drift event: incremental update or MAC request.

    Incremental drift is handled with the most recent high-probability
    entries for the ECU (escalating to a MAC request when fewer than `batch`
    exist). Abrupt drift always requires MAC-authenticated frames; the model
    stays untouched until the caller supplies them.
    """
    if event.kind == DriftKind.ABRUPT:
        return MacRequest(ecu=event.ecu, seq=event.seq)
    entries = update_set.recent(event.ecu, TrustCriterion.HIGH_PROBABILITY, batch)
    if len(entries) < batch:
        raise InsufficientTrustedFramesError(
            f"ECU {event.ecu}: {len(entries)} trusted frames, {batch} required"
        )
    x = np.vstack([e.features for e in entries])
    y = np.array([e.label for e in entries], dtype=int)
    return clf.partial_update(model, x, y)


def apply_mac_update(
    request: MacRequest,
    update_set: UpdateSet,
    model: FingerprintModel,
    batch: int = 16,
) -> FingerprintModel | None:
    """Run the pending update once enough MAC-authenticated frames exist."""
    entries = update_set.recent(request.ecu, TrustCriterion.MAC_AUTHENTICATED, batch)
    if len(entries) < batch:
        return None
    x = np.vstack([e.features for e in entries])
    y = np.array([e.label for e in entries], dtype=int)
    return clf.partial_update(model, x, y)


def estimate_update_bus_load(
    frames_per_sec: float, base_load_fraction: float, extra_frames: float
) -> float:
    """Added bus-load fraction of sending `extra_frames` within one second.

    Evaluated in decimal arithmetic so that round decimal inputs give the
    round decimal answers one computes by hand.
    """
    if frames_per_sec <= 0:
        raise ZeroRateError("frames_per_sec must be positive")
    result = (
        Decimal(str(extra_frames)) / Decimal(str(frames_per_sec))
    ) * Decimal(str(base_load_fraction))
    return float(result)


def fuse(verdict_a: Verdict, verdict_b: Verdict) -> Decision:
    """Two-point fusion: either point may veto, both must agree to authorize."""
    if verdict_a.seq != verdict_b.seq:
        raise SeqMismatchError(f"fusing seq {verdict_a.seq} with seq {verdict_b.seq}")
    decisions = (verdict_a.decision, verdict_b.decision)
    if Decision.INTRUSION in decisions:
        return Decision.INTRUSION
    if decisions == (Decision.AUTHORIZED, Decision.AUTHORIZED):
        return Decision.AUTHORIZED
    return Decision.SUSPICIOUS


class IdsEngine:
    """Single-channel online pipeline; the active model is swapped atomically.

    `featurizer` maps a validated frame to its feature vector; the default
    runs group extraction and feature computation. Callers that process one
    trace under several configurations can pass a caching featurizer.
    """

    def __init__(
        self,
        model: FingerprintModel,
        table: AuthorizationTable,
        config: IdsConfig = IdsConfig(),
        mac_key: bytes | None = None,
        featurizer: "Callable[[VoltageFrame], np.ndarray] | None" = None,
    ):
        self.model = model
        self.table = table
        self.config = config
        self.mac_key = mac_key
        self.featurizer = featurizer or (
            lambda frame: compute_features(extract_groups(frame, config.group_config))
        )
        self.monitor = ConfidenceMonitor(
            model.reference_confidence, beta=config.ewma_beta, warmup=config.monitor_warmup
        )
        self.update_set = UpdateSet(capacity=config.update_set_capacity)
        self.pending_mac: dict[EcuId, MacRequest] = {}
        self.drift_events: list[DriftEvent] = []
        self.update_log: list[dict] = []
        self._last_event_seq: dict[EcuId, int] = {}
        self._current_trip: int | None = None
        self._ecu_index = {e: i for i, e in enumerate(model.ecus)}

    # -- helpers -----------------------------------------------------------

    def _mac_trusted(self, frame: VoltageFrame) -> bool:
        if not frame.authentic_tag:
            return False
        if self.mac_key is None:
            return True
        return frame.mac_tag == mac_tag_for(self.mac_key, frame.seq, frame.true_ecu)

    def _swap_model(self, model: FingerprintModel, seq: int, ecu: EcuId, source: str) -> None:
        self.model = model  # atomic replacement
        self.update_log.append({"seq": seq, "ecu": ecu, "source": source})
        self._last_event_seq[ecu] = seq
        logger.info("model updated at seq %d for ECU %d (%s)", seq, ecu, source)

    def check_drift(self, ecu: EcuId, seq: int) -> DriftEvent | None:
        """Emit a drift event when the ECU's confidence EWMA sags below t_high.

        Upgraded to abrupt when the EWMA is below t_low or too few trusted
        high-probability frames exist. Rate-limited per ECU by the cooldown.
        """
        if not self.monitor.is_warm(ecu):
            return None
        last = self._last_event_seq.get(ecu)
        if last is not None and seq - last < self.config.cooldown_frames:
            return None
        ewma = self.monitor.value(ecu)
        thresholds = self.config.thresholds
        if ewma >= thresholds.t_high:
            return None
        kind = DriftKind.INCREMENTAL
        if ewma < thresholds.t_low:
            kind = DriftKind.ABRUPT
        elif self.update_set.count(ecu, TrustCriterion.HIGH_PROBABILITY) < self.config.update_batch:
            kind = DriftKind.ABRUPT
        return DriftEvent(seq=seq, ecu=ecu, ewma=ewma, kind=kind)

    def _handle_event(self, event: DriftEvent) -> None:
        self.drift_events.append(event)
        self._last_event_seq[event.ecu] = event.seq
        if event.kind == DriftKind.INCREMENTAL:
            try:
                result = handle_drift(event, self.update_set, self.model, self.config.update_batch)
            except InsufficientTrustedFramesError:
                result = MacRequest(ecu=event.ecu, seq=event.seq)
        else:
            result = handle_drift(event, self.update_set, self.model, self.config.update_batch)
        if isinstance(result, MacRequest):
            self.pending_mac.setdefault(event.ecu, result)
        else:
            self._swap_model(result, event.seq, event.ecu, "incremental")

    def _resolve_pending(self, seq: int) -> None:
        for ecu in sorted(self.pending_mac):
            request = self.pending_mac[ecu]
            updated = apply_mac_update(request, self.update_set, self.model, self.config.update_batch)
            if updated is not None:
                del self.pending_mac[ecu]
                self._swap_model(updated, seq, ecu, "mac")

    # -- main entry point ----------------------------------------------------

    def process_frame(self, frame: VoltageFrame) -> Verdict:
        if self._current_trip is None:
            self._current_trip = frame.trip
        elif frame.trip != self._current_trip:
            self.update_set.clear()
            self._current_trip = frame.trip

        authorized = (
            self.table.sender_of(frame.claimed_id) if frame.claimed_id in self.table else None
        )
        try:
            validate_frame(frame, self.table)
            feats = self.featurizer(frame)
        except CanfpError as exc:
            # fail safe: malformed signals are never authorized
            return Verdict(
                seq=frame.seq,
                predicted=None,
                probabilities=None,
                decision=Decision.SUSPICIOUS,
                authorized_ecu=authorized,
                annotation=f"{type(exc).__name__}: {exc}",
            )

        probs = clf.predict_proba(self.model, feats)
        pred_idx = int(np.argmax(probs))
        predicted = self.model.ecus[pred_idx]
        auth_idx = self._ecu_index[authorized]
        p_auth = float(probs[auth_idx])
        others = np.delete(probs, auth_idx)
        max_other = float(np.max(others)) if others.size else 0.0
        mac_trusted = self._mac_trusted(frame)
        annotation = None
        if mac_trusted:
            # an authenticated frame carries its sender identity out of band;
            # it is never misattributed or flagged, but its probabilities still
            # feed the confidence monitor below (they reflect model fit)
            predicted = frame.true_ecu
            decision = Decision.AUTHORIZED
            annotation = "mac-authenticated"
        elif self.config.use_thresholds:
            decision = decide(probs, auth_idx, self.config.thresholds)
        else:
            decision = decide_argmax(probs, auth_idx)

        # a frame flagged as intrusion carries another sender's signal, so its
        # authorized-class probability says nothing about the authorized ECU
        if decision != Decision.INTRUSION:
            self.monitor.update(authorized, p_auth)

        if self.config.enable_updates:
            if mac_trusted:
                self.update_set.admit(
                    UpdateEntry(
                        features=feats,
                        label=frame.true_ecu,
                        criterion=TrustCriterion.MAC_AUTHENTICATED,
                        seq=frame.seq,
                        trip=frame.trip,
                    )
                )
            elif float(probs[pred_idx]) >= self.config.thresholds.t_high and predicted == authorized:
                self.update_set.admit(
                    UpdateEntry(
                        features=feats,
                        label=authorized,
                        criterion=TrustCriterion.HIGH_PROBABILITY,
                        seq=frame.seq,
                        trip=frame.trip,
                    )
                )
            self._resolve_pending(frame.seq)
            event = self.check_drift(authorized, frame.seq)
            if event is not None:
                self._handle_event(event)
                self._resolve_pending(frame.seq)

        return Verdict(
            seq=frame.seq,
            predicted=predicted,
            probabilities=tuple(float(p) for p in probs),
            decision=decision,
            authorized_ecu=authorized,
            p_authorized=p_auth,
            max_other=max_other,
            annotation=annotation,
        )

    def run(self, frames: Iterable[VoltageFrame]) -> list[Verdict]:
        return [self.process_frame(f) for f in frames]


# -- evaluation -------------------------------------------------------------


@dataclass(frozen=True)
class GroundTruth:
    seq: int
    true_ecu: EcuId
    attack: bool


@dataclass(frozen=True)
class MetricsSummary:
    n_frames: int
    n_attacks: int
    identification_rate: float
    tp_rate: float
    tn_rate: float
    fp_count: int
    fn_count: int
    mean_confidence: float


@dataclass(frozen=True)
class MetricsRow:
    """One per-frame row of the cumulative and rolling curves (NaN = undefined)."""

    seq: int
    cum_identification: float
    cum_tp: float
    cum_tn: float
    cum_confidence: float
    roll_identification: float
    roll_tp: float
    roll_tn: float
    roll_confidence: float
    fp_count: int


def truth_from_frames(frames: Iterable[VoltageFrame]) -> list[GroundTruth]:
    return [GroundTruth(seq=f.seq, true_ecu=f.true_ecu, attack=f.attack) for f in frames]


def _rate(hits: float, total: float) -> float:
    return hits / total if total else float("nan")


def evaluate(
    verdicts: Sequence[Verdict],
    truths: Sequence[GroundTruth],
    window: int = 500,
) -> tuple[list[MetricsRow], MetricsSummary]:
    """Identification / true-positive / true-negative / confidence curves.

    Verdicts and ground truth must align by sequence number. Rates whose
    denominator is empty (e.g. the TP rate before the first attack) are NaN.
    """
    if len(verdicts) != len(truths):
        raise SeqMismatchError(f"{len(verdicts)} verdicts vs {len(truths)} truth records")
    rows: list[MetricsRow] = []
    recent: deque[tuple[bool, bool | None, bool | None, float]] = deque(maxlen=window)
    cum_ident = cum_conf = 0.0
    cum_tp = cum_fn = cum_fp = cum_tn = 0
    for verdict, truth in zip(verdicts, truths):
        if verdict.seq != truth.seq:
            raise SeqMismatchError(f"verdict seq {verdict.seq} vs truth seq {truth.seq}")
        correct = verdict.predicted == truth.true_ecu
        flagged = verdict.decision == Decision.INTRUSION
        confidence = (
            max(verdict.probabilities) if verdict.probabilities is not None else 0.0
        )
        cum_ident += 1.0 if correct else 0.0
        cum_conf += confidence
        tp_flag: bool | None = None
        tn_flag: bool | None = None
        if truth.attack:
            tp_flag = flagged
            cum_tp += int(flagged)
            cum_fn += int(not flagged)
        else:
            tn_flag = not flagged
            cum_tn += int(not flagged)
            cum_fp += int(flagged)
        recent.append((correct, tp_flag, tn_flag, confidence))

        n = len(rows) + 1
        roll_attacks = [t for _, t, _, _ in recent if t is not None]
        roll_legit = [t for _, _, t, _ in recent if t is not None]
        rows.append(
            MetricsRow(
                seq=verdict.seq,
                cum_identification=cum_ident / n,
                cum_tp=_rate(cum_tp, cum_tp + cum_fn),
                cum_tn=_rate(cum_tn, cum_tn + cum_fp),
                cum_confidence=cum_conf / n,
                roll_identification=float(np.mean([c for c, _, _, _ in recent])),
                roll_tp=_rate(sum(roll_attacks), len(roll_attacks)),
                roll_tn=_rate(sum(roll_legit), len(roll_legit)),
                roll_confidence=float(np.mean([c for _, _, _, c in recent])),
                fp_count=cum_fp,
            )
        )
    n = len(verdicts)
    summary = MetricsSummary(
        n_frames=n,
        n_attacks=cum_tp + cum_fn,
        identification_rate=_rate(cum_ident, n),
        tp_rate=_rate(cum_tp, cum_tp + cum_fn),
        tn_rate=_rate(cum_tn, cum_tn + cum_fp),
        fp_count=cum_fp,
        fn_count=cum_fn,
        mean_confidence=_rate(cum_conf, n),
    )
    return rows, summary
