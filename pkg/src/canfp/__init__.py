"""CAN physical-layer sender identification and intrusion detection toolkit.

Simulates per-ECU analog voltage traces with incremental and abrupt concept
drift, and runs an online IDS that fingerprints senders from the signals,
detects drift and updates its classifiers from trusted frames.
"""

from .signal_model import (
    AuthorizationTable,
    EcuId,
    Symbol,
    SymbolGroups,
    Template,
    VoltageFrame,
    authorized_sender,
    validate_frame,
)
from .simulator import (
    ChannelModel,
    EcuProfile,
    ScenarioConfig,
    ThermalState,
    TripConfig,
    advance_thermal,
    inject_attacks,
    run_scenario,
    synthesize_frame,
)
from .preprocessing import (
    GroupConfig,
    average_symbol,
    build_template,
    deviation_series,
    deviation_statistics,
    downsample,
    extract_groups,
    signal_deviation,
    temperature_correlation,
)
from .features import (
    FEATURE_COUNT,
    Standardizer,
    apply_standardizer,
    compute_features,
    feature_names,
    fit_standardizer,
)
from .classifier import (
    FingerprintModel,
    TrainConfig,
    gradient_check,
    identify,
    load_model,
    partial_update,
    predict_proba,
    save_model,
    train,
)
from .engine import (
    ConfidenceMonitor,
    Decision,
    DriftEvent,
    DriftKind,
    IdsConfig,
    IdsEngine,
    MacRequest,
    ThresholdConfig,
    TrustCriterion,
    UpdateSet,
    Verdict,
    decide,
    estimate_update_bus_load,
    evaluate,
    fuse,
    handle_drift,
)

__version__ = "0.1.0"
