"""Toolkit for measuring when phone identity becomes linearly decodable
from frame-level speech encoder representations."""

from ._version import __version__
from .curves import (
    ComparisonReport,
    CurveMeta,
    DecodabilityCurve,
    PeakReport,
    compare_curves,
    compute_curve,
    decodability_onset,
    find_peak,
    normalize_curve,
)
from .errors import ComputationError, DecodewinError, FormatError, ValidationError
from .linclass import LinearClassifier, TrainConfig, train_softmax
from .tensorio import (
    FeatureMatrix,
    PhoneRecord,
    read_alignments,
    read_feature_file,
    write_alignments,
    write_feature_file,
)
from .windowing import (
    FoldPlan,
    OffsetDataset,
    WindowSpec,
    build_offset_dataset,
    filter_phones,
    make_folds,
    shift_onsets,
    subsample,
)

__all__ = [
    "__version__",
    "ComparisonReport",
    "ComputationError",
    "CurveMeta",
    "DecodabilityCurve",
    "DecodewinError",
    "FeatureMatrix",
    "FoldPlan",
    "FormatError",
    "LinearClassifier",
    "OffsetDataset",
    "PeakReport",
    "PhoneRecord",
    "TrainConfig",
    "ValidationError",
    "WindowSpec",
    "build_offset_dataset",
    "compare_curves",
    "compute_curve",
    "decodability_onset",
    "filter_phones",
    "find_peak",
    "make_folds",
    "normalize_curve",
    "read_alignments",
    "read_feature_file",
    "shift_onsets",
    "subsample",
    "train_softmax",
    "write_alignments",
    "write_feature_file",
]
