"""Real-time exam monitoring: landmark-distance features, a from-scratch
fully-connected abnormal-behavior classifier, the proctoring state machine,
a multi-client monitoring server, and a load harness."""

from .landmarks import (
    DEFAULT_SELECTION,
    FeatureMode,
    FeatureVector,
    KeypointSelection,
    Label,
    LandmarkFrame,
    featurize,
    pairwise_distances,
    select_keypoints,
    validate_frame,
)
from .classifier import (
    ClassifierModel,
    Metrics,
    TrainConfig,
    evaluate,
    forward,
    init_model,
    load_model,
    predict,
    save_model,
    train,
)
from .dataset import Dataset, LabeledSample, SynthSpec, load_dataset, save_dataset, split, synthesize
from .session import (
    EventKind,
    ExamSession,
    SessionEvent,
    SessionState,
    Verdict,
    ViolationPolicy,
    new_session,
    observe,
    proctor_end,
    proctor_unlock,
    replay,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_SELECTION",
    "FeatureMode",
    "FeatureVector",
    "KeypointSelection",
    "Label",
    "LandmarkFrame",
    "featurize",
    "pairwise_distances",
    "select_keypoints",
    "validate_frame",
    "ClassifierModel",
    "Metrics",
    "TrainConfig",
    "evaluate",
    "forward",
    "init_model",
    "load_model",
    "predict",
    "save_model",
    "train",
    "Dataset",
    "LabeledSample",
    "SynthSpec",
    "load_dataset",
    "save_dataset",
    "split",
    "synthesize",
    "EventKind",
    "ExamSession",
    "SessionEvent",
    "SessionState",
    "Verdict",
    "ViolationPolicy",
    "new_session",
    "observe",
    "proctor_end",
    "proctor_unlock",
    "replay",
    "__version__",
]
