"""Gather frames at signed offsets around phone onsets into per-offset datasets."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .tensorio import FeatureMatrix, PhoneRecord

PLOSIVES = ("B", "D", "G", "K", "P", "T")

_NAMED_SUBSETS: dict[str, tuple[str, ...] | None] = {
    "all": None,
    "plosive": PLOSIVES,
}

# Guards against 0.06 * 50 == 2.999...996 style float artifacts when an
# onset lands exactly on a frame boundary.
_FLOOR_EPS = 1e-9


def frame_index(time_s: float, frame_rate_hz: float) -> int:
    """Index of the frame covering ``time_s`` at ``frame_rate_hz``."""
    return int(math.floor(time_s * frame_rate_hz + _FLOOR_EPS))


@dataclass(frozen=True)
class WindowSpec:
    """A symmetric window of frame offsets around a phone onset.

    ``window_ms`` is the total span covered by the offsets; the number of
    offsets is the window length in frames rounded half up, centered so
    that offset 0 is the onset frame.
    """

    window_ms: float
    frame_rate_hz: float

    def __post_init__(self) -> None:
        if not (self.window_ms > 0) or not math.isfinite(self.window_ms):
            raise ValidationError(f"window_ms must be positive, got {self.window_ms!r}")
        if not (self.frame_rate_hz > 0) or not math.isfinite(self.frame_rate_hz):
            raise ValidationError(
                f"frame_rate_hz must be positive, got {self.frame_rate_hz!r}"
            )
        if self.n_offsets < 1:
            raise ValidationError(
                f"window of {self.window_ms} ms covers no frame at "
                f"{self.frame_rate_hz} Hz"
            )

    @property
    def n_offsets(self) -> int:
        return int(math.floor(self.window_ms * self.frame_rate_hz / 1000.0 + 0.5))

    @property
    def offsets(self) -> tuple[int, ...]:
        n = self.n_offsets
        lo = -(n // 2)
        return tuple(range(lo, lo + n))

    def offset_ms(self, offset: int) -> float:
        return offset * 1000.0 / self.frame_rate_hz


@dataclass(frozen=True, eq=False)
class OffsetSamples:
    """All gathered samples for one signed frame offset."""

    vectors: np.ndarray  # (n, dim) float32
    class_ids: np.ndarray  # (n,) int64
    utterance_ids: tuple[str, ...]
    onsets_s: np.ndarray  # (n,) float64

    @property
    def count(self) -> int:
        return self.vectors.shape[0]


@dataclass(frozen=True, eq=False)
class OffsetDataset:
    """Per-offset training material around phone onsets.

    ``instances`` lists each contributing phone instance once, as
    (utterance_id, onset_s, phone); an instance appears at an offset only
    when the offset frame falls inside its utterance.
    """

    spec: WindowSpec
    class_vocab: tuple[str, ...]
    per_offset: Mapping[int, OffsetSamples]
    instances: tuple[tuple[str, float, str], ...]

    @property
    def counts(self) -> dict[int, int]:
        return {j: s.count for j, s in self.per_offset.items()}


def _empty_samples(dim: int) -> OffsetSamples:
    return OffsetSamples(
        vectors=np.empty((0, dim), dtype=np.float32),
        class_ids=np.empty(0, dtype=np.int64),
        utterance_ids=(),
        onsets_s=np.empty(0, dtype=np.float64),
    )


def build_offset_dataset(
    features: Iterable[FeatureMatrix],
    phones: Sequence[PhoneRecord],
    spec: WindowSpec,
) -> OffsetDataset:
    """Gather, for every offset in ``spec``, the frame at onset+offset of
    every phone instance whose frame lies inside its utterance."""
    by_id: dict[str, FeatureMatrix] = {}
    dim: int | None = None
    for m in features:
        if m.utterance_id in by_id:
            raise ValidationError(f"duplicate feature matrix for {m.utterance_id!r}")
        if m.frame_rate_hz != spec.frame_rate_hz:
            raise ValidationError(
                f"utterance {m.utterance_id!r} has frame rate {m.frame_rate_hz}, "
                f"window expects {spec.frame_rate_hz}"
            )
        if dim is None:
            dim = m.dim
        elif m.dim != dim:
            raise ValidationError(
                f"utterance {m.utterance_id!r} has dim {m.dim}, others have {dim}"
            )
        by_id[m.utterance_id] = m
    if dim is None:
        raise ValidationError("no feature matrices given")

    class_vocab = tuple(sorted({r.phone for r in phones}))
    class_index = {p: i for i, p in enumerate(class_vocab)}

    offsets = spec.offsets
    vec_parts: dict[int, list[np.ndarray]] = {j: [] for j in offsets}
    cls_parts: dict[int, list[np.ndarray]] = {j: [] for j in offsets}
    utt_parts: dict[int, list[str]] = {j: [] for j in offsets}
    onset_parts: dict[int, list[np.ndarray]] = {j: [] for j in offsets}
    instances: list[tuple[str, float, str]] = []

    # Group consecutive records per utterance so each gather is one fancy
    # index into that utterance's matrix.
    i = 0
    while i < len(phones):
        utt = phones[i].utterance_id
        run = [phones[i]]
        i += 1
        while i < len(phones) and phones[i].utterance_id == utt:
            run.append(phones[i])
            i += 1
        matrix = by_id.get(utt)
        if matrix is None:
            raise ValidationError(f"no feature matrix for utterance {utt!r}")
        onsets = np.array([r.onset_s for r in run], dtype=np.float64)
        labels = np.array([class_index[r.phone] for r in run], dtype=np.int64)
        k0 = np.floor(onsets * spec.frame_rate_hz + _FLOOR_EPS).astype(np.int64)
        instances.extend((utt, r.onset_s, r.phone) for r in run)
        for j in offsets:
            k = k0 + j
            valid = (k >= 0) & (k < matrix.frames)
            if not np.any(valid):
                continue
            vec_parts[j].append(matrix.data[k[valid]])
            cls_parts[j].append(labels[valid])
            onset_parts[j].append(onsets[valid])
            utt_parts[j].extend([utt] * int(valid.sum()))

    per_offset: dict[int, OffsetSamples] = {}
    for j in offsets:
        if vec_parts[j]:
            per_offset[j] = OffsetSamples(
                vectors=np.concatenate(vec_parts[j], axis=0),
                class_ids=np.concatenate(cls_parts[j]),
                utterance_ids=tuple(utt_parts[j]),
                onsets_s=np.concatenate(onset_parts[j]),
            )
        else:
            per_offset[j] = _empty_samples(dim)
    return OffsetDataset(
        spec=spec,
        class_vocab=class_vocab,
        per_offset=per_offset,
        instances=tuple(instances),
    )


def _resolve_subset(subset: str | Iterable[str]) -> tuple[str, ...] | None:
    """Return the label set to keep, or None for the identity subset."""
    if isinstance(subset, str):
        try:
            return _NAMED_SUBSETS[subset]
        except KeyError:
            raise ValidationError(
                f"unknown phone subset {subset!r}; named subsets are "
                f"{sorted(_NAMED_SUBSETS)} (or pass explicit labels)"
            ) from None
    labels = tuple(subset)
    if not labels:
        raise ValidationError("explicit phone subset must be non-empty")
    return labels


def filter_phones(
    obj: list[PhoneRecord] | OffsetDataset,
    subset: str | Iterable[str],
) -> list[PhoneRecord] | OffsetDataset:
    """Restrict records or a dataset to a phone subset ('all', 'plosive',
    or explicit labels); raises if nothing is left."""
    keep = _resolve_subset(subset)
    if keep is None:
        return obj
    keep_set = set(keep)

    if isinstance(obj, OffsetDataset):
        new_vocab = tuple(p for p in obj.class_vocab if p in keep_set)
        if not new_vocab:
            raise ValidationError(f"phone subset {sorted(keep_set)} matches no class")
        old_to_new = np.full(len(obj.class_vocab), -1, dtype=np.int64)
        for new_id, phone in enumerate(new_vocab):
            old_to_new[obj.class_vocab.index(phone)] = new_id
        per_offset: dict[int, OffsetSamples] = {}
        for j, s in obj.per_offset.items():
            mask = old_to_new[s.class_ids] >= 0
            per_offset[j] = OffsetSamples(
                vectors=s.vectors[mask],
                class_ids=old_to_new[s.class_ids[mask]],
                utterance_ids=tuple(
                    u for u, m in zip(s.utterance_ids, mask) if m
                ),
                onsets_s=s.onsets_s[mask],
            )
        instances = tuple(t for t in obj.instances if t[2] in keep_set)
        if not instances:
            raise ValidationError(
                f"phone subset {sorted(keep_set)} matches no instance"
            )
        return OffsetDataset(
            spec=obj.spec,
            class_vocab=new_vocab,
            per_offset=per_offset,
            instances=instances,
        )

    kept = [r for r in obj if r.phone in keep_set]
    if not kept:
        raise ValidationError(f"phone subset {sorted(keep_set)} matches no record")
    return kept


@dataclass(frozen=True)
class FoldPlan:
    """Deterministic utterance-level cross-validation assignment."""

    n_folds: int
    seed: int
    assignment: Mapping[str, int]

    def fold_of(self, utterance_id: str) -> int:
        return self.assignment[utterance_id]


def make_folds(
    utterance_ids: Iterable[str], n_folds: int, seed: int
) -> FoldPlan:
    """Assign utterances to ``n_folds`` balanced folds, seeded."""
    ids = sorted(set(utterance_ids))
    if n_folds < 2:
        raise ValidationError(f"need at least 2 folds, got {n_folds}")
    if len(ids) < n_folds:
        raise ValidationError(
            f"{len(ids)} utterances cannot fill {n_folds} folds"
        )
    if seed < 0:
        raise ValidationError(f"seed must be non-negative, got {seed}")
    order = np.random.default_rng(seed).permutation(len(ids))
    assignment = {ids[int(idx)]: pos % n_folds for pos, idx in enumerate(order)}
    return FoldPlan(n_folds=n_folds, seed=seed, assignment=assignment)


def subsample(dataset: OffsetDataset, fraction: float, seed: int) -> OffsetDataset:
    """Keep a seeded random fraction of phone instances, whole across offsets."""
    if not (0 < fraction <= 1) or not math.isfinite(fraction):
        raise ValidationError(f"fraction must be in (0, 1], got {fraction!r}")
    if seed < 0:
        raise ValidationError(f"seed must be non-negative, got {seed}")
    if fraction == 1.0:
        return dataset
    n = len(dataset.instances)
    n_keep = int(math.floor(n * fraction + 0.5))
    order = np.random.default_rng(seed).permutation(n)
    kept_idx = set(int(i) for i in order[:n_keep])
    kept_keys = {
        (dataset.instances[i][0], dataset.instances[i][1]) for i in kept_idx
    }

    per_offset: dict[int, OffsetSamples] = {}
    for j, s in dataset.per_offset.items():
        mask = np.array(
            [
                (u, float(t)) in kept_keys
                for u, t in zip(s.utterance_ids, s.onsets_s)
            ],
            dtype=bool,
        )
        per_offset[j] = OffsetSamples(
            vectors=s.vectors[mask],
            class_ids=s.class_ids[mask],
            utterance_ids=tuple(u for u, m in zip(s.utterance_ids, mask) if m),
            onsets_s=s.onsets_s[mask],
        )
    instances = tuple(
        t for i, t in enumerate(dataset.instances) if i in kept_idx
    )
    return OffsetDataset(
        spec=dataset.spec,
        class_vocab=dataset.class_vocab,
        per_offset=per_offset,
        instances=instances,
    )


def shift_onsets(
    phones: Sequence[PhoneRecord], delta_ms: float
) -> tuple[list[PhoneRecord], int]:
    """Translate every interval by ``delta_ms``; drop records whose onset
    would go negative and report how many were dropped."""
    if not math.isfinite(delta_ms):
        raise ValidationError(f"delta_ms must be finite, got {delta_ms!r}")
    delta_s = delta_ms / 1000.0
    shifted: list[PhoneRecord] = []
    dropped = 0
    for r in phones:
        onset = r.onset_s + delta_s
        if onset < 0:
            dropped += 1
            continue
        shifted.append(replace(r, onset_s=onset, offset_s=r.offset_s + delta_s))
    return shifted, dropped
