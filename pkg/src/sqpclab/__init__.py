"""Simulation lab for semi-quantum private comparison protocols.

Two protocol variants (`jiang` and `improved`), the channel attacks against
them, an exact small-register quantum simulator underneath, and a Monte
Carlo harness that checks the analytic detection and leakage claims.
"""
from .qsim import (
    BellKind,
    CapacityExceeded,
    InvalidHandle,
    QsimError,
    QubitHandle,
    SameRegister,
    Simulator,
)
from .protocol import (
    AbortReason,
    ChannelEvent,
    Choice,
    ComparisonOutcome,
    KeyMaterial,
    Leg,
    MaskRecord,
    ProtocolConfig,
    RoundRecord,
    SecretInput,
    Transcript,
    TrialReport,
    Variant,
    compute_ma_jiang,
    compute_mask_improved,
    compute_r_improved,
    compute_r_jiang,
    run_protocol,
    table_case,
    verify_traps,
)
from .adversary import (
    AdversaryState,
    ChannelStrategy,
    make_strategy,
)
from .harness import (
    AggregateReport,
    ExperimentSpec,
    ValidationError,
    analytic_detection_outside,
    analytic_detection_participant,
    run_experiment,
    tp_inference_test,
    wrong_result_model_jiang_outside,
)

__all__ = [
    "AbortReason",
    "AdversaryState",
    "AggregateReport",
    "BellKind",
    "CapacityExceeded",
    "ChannelEvent",
    "ChannelStrategy",
    "Choice",
    "ComparisonOutcome",
    "ExperimentSpec",
    "InvalidHandle",
    "KeyMaterial",
    "Leg",
    "MaskRecord",
    "ProtocolConfig",
    "QsimError",
    "QubitHandle",
    "RoundRecord",
    "SameRegister",
    "SecretInput",
    "Simulator",
    "Transcript",
    "TrialReport",
    "ValidationError",
    "Variant",
    "analytic_detection_outside",
    "analytic_detection_participant",
    "compute_ma_jiang",
    "compute_mask_improved",
    "compute_r_improved",
    "compute_r_jiang",
    "make_strategy",
    "run_experiment",
    "run_protocol",
    "table_case",
    "tp_inference_test",
    "verify_traps",
    "wrong_result_model_jiang_outside",
]
