"""Decodability curves: per-offset cross-validated probe accuracy and the
analyses built on top (normalization, peaks, onsets, comparisons)."""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ComputationError, FormatError, ValidationError
from .linclass import LinearClassifier, TrainConfig, accuracy, train_softmax
from .windowing import FoldPlan, OffsetDataset, OffsetSamples

THREADS_ENV_VAR = "DECODEWIN_THREADS"

CSV_HEADER = "offset_ms,accuracy,n_samples"


@dataclass(frozen=True)
class CurveMeta:
    """Provenance carried along with a curve."""

    encoder_tag: str = ""
    layer: int | None = None
    phone_subset: str = "all"
    normalized: bool = False
    folds: int = 0
    seed: int = 0
    delay_ms: float = 0.0

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @staticmethod
    def from_dict(doc: dict[str, Any]) -> "CurveMeta":
        known = {f: doc[f] for f in _META_FIELDS if f in doc}
        return CurveMeta(**known)


_META_FIELDS = tuple(CurveMeta.__dataclass_fields__)


@dataclass(frozen=True, eq=False)
class DecodabilityCurve:
    """Accuracy as a function of signed offset from phone onset.

    ``accuracies[i]`` is None where the offset had too little data; the
    corresponding ``n_samples[i]`` still reports what was available.
    """

    offsets_ms: tuple[float, ...]
    accuracies: tuple[float | None, ...]
    n_samples: tuple[int, ...]
    meta: CurveMeta = CurveMeta()

    def __post_init__(self) -> None:
        if not (
            len(self.offsets_ms) == len(self.accuracies) == len(self.n_samples)
        ):
            raise ValidationError("curve columns have mismatched lengths")
        if len(self.offsets_ms) == 0:
            raise ValidationError("curve must have at least one offset")
        if any(b <= a for a, b in zip(self.offsets_ms, self.offsets_ms[1:])):
            raise ValidationError("offsets_ms must be strictly increasing")


@dataclass(frozen=True)
class PeakReport:
    """Location and height of a curve's maximum (earliest on ties)."""

    peak_time_ms: float
    peak_value: float
    meta: CurveMeta


@dataclass(frozen=True, eq=False)
class ComparisonReport:
    """Peak, onset, and per-offset deltas between two curves (a minus b)."""

    peak_delta_ms: float
    onset_delta_ms: float
    theta: float
    offsets_ms: tuple[float, ...]
    accuracy_deltas: tuple[float | None, ...]
    meta_a: CurveMeta
    meta_b: CurveMeta


def thread_count(threads: int | None = None) -> int:
    """Resolve the worker count: explicit argument, else the
    DECODEWIN_THREADS environment variable, else one per CPU."""
    if threads is None:
        env = os.environ.get(THREADS_ENV_VAR, "").strip()
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise ValidationError(
                    f"{THREADS_ENV_VAR} must be an integer, got {env!r}"
                ) from None
        else:
            threads = 0
    if threads < 0:
        raise ValidationError(f"thread count must be >= 0, got {threads}")
    return threads if threads > 0 else (os.cpu_count() or 1)


def batched_accuracy(
    clf: LinearClassifier,
    vectors: np.ndarray,
    class_ids: np.ndarray,
    batches: int,
) -> float:
    """Mean of per-batch accuracies over ``batches`` contiguous parts
    (empty parts are skipped)."""
    if batches < 1:
        raise ValidationError(f"batches must be >= 1, got {batches}")
    y = np.asarray(class_ids)
    if y.size == 0:
        raise ValidationError("cannot score an empty sample set")
    parts = np.array_split(np.arange(y.size), batches)
    scores = [
        accuracy(clf, vectors[p], y[p]) for p in parts if p.size > 0
    ]
    return float(np.mean(scores))


def _offset_accuracy(
    samples: OffsetSamples,
    folds: FoldPlan,
    n_classes: int,
    config: TrainConfig,
    batches: int,
    min_samples: int,
) -> float | None:
    if samples.count < min_samples:
        return None
    try:
        fold_ids = np.array(
            [folds.fold_of(u) for u in samples.utterance_ids], dtype=np.int64
        )
    except KeyError as exc:
        raise ValidationError(f"utterance {exc.args[0]!r} not in fold plan") from None
    fold_scores: list[float] = []
    for f in range(folds.n_folds):
        held_out = fold_ids == f
        train = ~held_out
        if not held_out.any() or not train.any():
            continue
        y_train = samples.class_ids[train]
        if len(np.unique(y_train)) < 2:
            continue
        clf = train_softmax(samples.vectors[train], y_train, n_classes, config)
        fold_scores.append(
            batched_accuracy(
                clf, samples.vectors[held_out], samples.class_ids[held_out], batches
            )
        )
    if not fold_scores:
        return None
    # Sorting makes the average bitwise invariant to fold relabeling.
    return float(np.mean(sorted(fold_scores)))


def compute_curve(
    dataset: OffsetDataset,
    folds: FoldPlan,
    config: TrainConfig = TrainConfig(),
    batches: int = 20,
    min_samples: int | None = None,
    meta: CurveMeta | None = None,
    threads: int | None = None,
) -> DecodabilityCurve:
    """Train one probe per offset with utterance-level cross-validation and
    report the averaged batched accuracy; offsets below ``min_samples``
    (default 10 * n_classes) are left missing."""
    n_classes = len(dataset.class_vocab)
    if n_classes < 2:
        raise ValidationError(
            f"dataset has {n_classes} class(es); need at least 2"
        )
    if min_samples is None:
        min_samples = 10 * n_classes
    if min_samples < 1:
        raise ValidationError(f"min_samples must be >= 1, got {min_samples}")
    if batches < 1:
        raise ValidationError(f"batches must be >= 1, got {batches}")

    offsets = dataset.spec.offsets
    workers = min(thread_count(threads), len(offsets))

    def job(j: int) -> float | None:
        return _offset_accuracy(
            dataset.per_offset[j], folds, n_classes, config, batches, min_samples
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(job, offsets))
    else:
        values = [job(j) for j in offsets]

    if all(v is None for v in values):
        raise ComputationError(
            "no decodable offsets: every offset is below min_samples "
            f"({min_samples}) or has no trainable fold split"
        )
    meta = replace(meta or CurveMeta(), folds=folds.n_folds, normalized=False)
    return DecodabilityCurve(
        offsets_ms=tuple(dataset.spec.offset_ms(j) for j in offsets),
        accuracies=tuple(values),
        n_samples=tuple(dataset.per_offset[j].count for j in offsets),
        meta=meta,
    )


def normalize_curve(curve: DecodabilityCurve) -> DecodabilityCurve:
    """Divide by the curve maximum so the peak sits at exactly 1.0."""
    present = [a for a in curve.accuracies if a is not None]
    if not present:
        raise ComputationError("cannot normalize a curve with no values")
    top = max(present)
    if top <= 0:
        raise ComputationError(
            f"cannot normalize a curve whose maximum is {top!r}"
        )
    return DecodabilityCurve(
        offsets_ms=curve.offsets_ms,
        accuracies=tuple(
            None if a is None else a / top for a in curve.accuracies
        ),
        n_samples=curve.n_samples,
        meta=replace(curve.meta, normalized=True),
    )


def find_peak(curve: DecodabilityCurve) -> PeakReport:
    """Earliest offset attaining the curve maximum."""
    best_idx: int | None = None
    for i, a in enumerate(curve.accuracies):
        if a is not None and (best_idx is None or a > curve.accuracies[best_idx]):
            best_idx = i
    if best_idx is None:
        raise ComputationError("curve has no values; cannot locate a peak")
    return PeakReport(
        peak_time_ms=curve.offsets_ms[best_idx],
        peak_value=curve.accuracies[best_idx],
        meta=curve.meta,
    )


def decodability_onset(curve: DecodabilityCurve, theta: float = 0.5) -> float:
    """Earliest offset where a normalized curve reaches ``theta``."""
    if not curve.meta.normalized:
        raise ValidationError("decodability onset is defined on normalized curves")
    if not (0 < theta <= 1):
        raise ValidationError(f"theta must be in (0, 1], got {theta!r}")
    for t, a in zip(curve.offsets_ms, curve.accuracies):
        if a is not None and a >= theta:
            return t
    raise ComputationError(f"curve never reaches threshold {theta}")


def compare_curves(
    a: DecodabilityCurve, b: DecodabilityCurve, theta: float = 0.5
) -> ComparisonReport:
    """Peak/onset deltas (a minus b) plus per-offset accuracy deltas on the
    overlapping range, resampling b to a's grid by nearest offset."""
    if not (0 < theta <= 1):
        raise ValidationError(f"theta must be in (0, 1], got {theta!r}")
    lo = max(a.offsets_ms[0], b.offsets_ms[0])
    hi = min(a.offsets_ms[-1], b.offsets_ms[-1])
    if lo > hi:
        raise ComputationError(
            f"curves do not overlap: [{a.offsets_ms[0]}, {a.offsets_ms[-1]}] ms "
            f"vs [{b.offsets_ms[0]}, {b.offsets_ms[-1]}] ms"
        )
    peak_delta = find_peak(a).peak_time_ms - find_peak(b).peak_time_ms
    norm_a = a if a.meta.normalized else normalize_curve(a)
    norm_b = b if b.meta.normalized else normalize_curve(b)
    onset_delta = decodability_onset(norm_a, theta) - decodability_onset(
        norm_b, theta
    )

    b_grid = np.asarray(b.offsets_ms)
    offsets: list[float] = []
    deltas: list[float | None] = []
    for t, av in zip(a.offsets_ms, a.accuracies):
        if t < lo or t > hi or av is None:
            continue
        bv = b.accuracies[int(np.argmin(np.abs(b_grid - t)))]
        offsets.append(t)
        deltas.append(None if bv is None else av - bv)
    return ComparisonReport(
        peak_delta_ms=peak_delta,
        onset_delta_ms=onset_delta,
        theta=theta,
        offsets_ms=tuple(offsets),
        accuracy_deltas=tuple(deltas),
        meta_a=a.meta,
        meta_b=b.meta,
    )


def curve_to_json_dict(curve: DecodabilityCurve) -> dict[str, Any]:
    return {
        "offsets_ms": [float(t) for t in curve.offsets_ms],
        "accuracies": [
            None if a is None else float(a) for a in curve.accuracies
        ],
        "n_samples": [int(n) for n in curve.n_samples],
        "meta": curve.meta.to_dict(),
    }


def curve_from_json_dict(doc: dict[str, Any]) -> DecodabilityCurve:
    try:
        meta = CurveMeta.from_dict(doc.get("meta", {}))
        return DecodabilityCurve(
            offsets_ms=tuple(float(t) for t in doc["offsets_ms"]),
            accuracies=tuple(
                None if a is None else float(a) for a in doc["accuracies"]
            ),
            n_samples=tuple(int(n) for n in doc["n_samples"]),
            meta=meta,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed curve document: {exc}") from exc


def write_curve_json(curve: DecodabilityCurve, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(curve_to_json_dict(curve), sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )


def read_curve_json(path: str | Path) -> DecodabilityCurve:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: curve document must be a JSON object")
    try:
        return curve_from_json_dict(doc)
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_curve_csv(curve: DecodabilityCurve, path: str | Path) -> None:
    """Three-column CSV; missing accuracies become empty fields. Metadata
    lives only in the JSON form."""
    lines = [CSV_HEADER]
    for t, a, n in zip(curve.offsets_ms, curve.accuracies, curve.n_samples):
        acc = "" if a is None else repr(float(a))
        lines.append(f"{float(t)!r},{acc},{int(n)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_curve_csv(path: str | Path) -> DecodabilityCurve:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise FormatError(f"{path}: line 1: expected header {CSV_HEADER!r}")
    offsets: list[float] = []
    accuracies: list[float | None] = []
    counts: list[int] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != 3:
            raise FormatError(
                f"{path}: line {lineno}: expected 3 fields, got {len(fields)}"
            )
        try:
            offsets.append(float(fields[0]))
            accuracies.append(None if fields[1] == "" else float(fields[1]))
            counts.append(int(fields[2]))
        except ValueError as exc:
            raise FormatError(f"{path}: line {lineno}: {exc}") from exc
    try:
        return DecodabilityCurve(
            offsets_ms=tuple(offsets),
            accuracies=tuple(accuracies),
            n_samples=tuple(counts),
        )
    except ValidationError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def read_curve(path: str | Path) -> DecodabilityCurve:
    """Load a curve from .json or .csv based on the file extension."""
    suffix = Path(path).suffix.lower()
    if suffix == ".json":
        return read_curve_json(path)
    if suffix == ".csv":
        return read_curve_csv(path)
    raise FormatError(f"{path}: unknown curve format {suffix!r} (want .json/.csv)")


def peak_to_json_dict(report: PeakReport) -> dict[str, Any]:
    return {
        "peak_time_ms": float(report.peak_time_ms),
        "peak_value": float(report.peak_value),
        "meta": report.meta.to_dict(),
    }


def comparison_to_json_dict(report: ComparisonReport) -> dict[str, Any]:
    return {
        "peak_delta_ms": float(report.peak_delta_ms),
        "onset_delta_ms": float(report.onset_delta_ms),
        "theta": float(report.theta),
        "offsets_ms": [float(t) for t in report.offsets_ms],
        "accuracy_deltas": [
            None if d is None else float(d) for d in report.accuracy_deltas
        ],
        "meta_a": report.meta_a.to_dict(),
        "meta_b": report.meta_b.to_dict(),
    }
