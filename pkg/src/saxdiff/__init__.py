"""Difficulty modeling for single-voice saxophone parts.

Learns maximum trill speeds for fingering transitions from recorded trill
pitch tracks, and decodes the optimal fingering path through a notated
part to report per-transition and per-note difficulty at a target tempo.
"""

from .instrument import (
    Fingering,
    FingeringChart,
    KeyTable,
    Mapping,
    Transition,
    load_chart,
    load_default_instrument,
    load_key_table,
    moving_fingers,
)
from .features import (
    FeatureScheme,
    SCHEME_NAMES,
    encode,
    scheme_from_name,
    slot_names,
)
from .trills import (
    F0Track,
    TrillResult,
    extract_trill_speed,
    flag_mismatch,
    verify_expected,
)
from .models import (
    CostModel,
    EvalReport,
    TrillObservation,
    anchor_floor,
    evaluate,
    load_model,
    load_observations,
    predict,
    save_model,
    save_observations,
    stratified_folds,
    train,
    train_linear,
    train_perceptron,
)
from .sampling import (
    BigramTable,
    SessionPlan,
    learning_curve,
    plan_sessions,
    sample_cluster,
    sample_empirical,
    sample_uniform,
)
from .engine import (
    DifficultyReport,
    NotatedPart,
    annotate,
    decode_fingerings,
    parse_part,
    render_annotations,
    transition_requirements,
)

__version__ = "0.1.0"
