"""Synthetic utterances with known phone timing, toy frame-stacking
encoders, and an independent label-match oracle for decoding timing."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import ComputationError, ValidationError
from .tensorio import FeatureMatrix, PhoneRecord
from .windowing import WindowSpec, frame_index

BASE_RATE_HZ = 100.0
AUDIO_RATE_HZ = 50.0
AV_RATE_HZ = 25.0

ENCODERS = ("audio", "audiovisual")

_AUDIO_STACK = 2
_AV_STACK = 4

# RNG sub-stream ids so changing one knob never perturbs another draw.
_STREAM_PHONES = 0
_STREAM_AUDIO_NOISE = 1
_STREAM_VIDEO_NOISE = 2
_STREAM_ORACLE = 3

_FLOOR_EPS = 1e-9

_MAX_CLASSES = 26 * 26


@dataclass(frozen=True)
class SynthConfig:
    """Knobs for one synthetic corpus; all timing is in milliseconds."""

    n_utterances: int = 20
    utterance_s: float = 10.0
    n_classes: int = 10
    duration_min_ms: float = 60.0
    duration_max_ms: float = 200.0
    noise_sigma: float = 0.0
    audio_delay_ms: float = 0.0
    video_lead_ms: float = 150.0
    smoothing_ms: float | None = None
    context_limit_ms: float | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_utterances < 1:
            raise ValidationError(f"n_utterances must be >= 1, got {self.n_utterances}")
        if not (self.utterance_s > 0):
            raise ValidationError(f"utterance_s must be > 0, got {self.utterance_s!r}")
        if not 1 <= self.n_classes <= _MAX_CLASSES:
            raise ValidationError(
                f"n_classes must be in [1, {_MAX_CLASSES}], got {self.n_classes}"
            )
        if not (0 < self.duration_min_ms <= self.duration_max_ms):
            raise ValidationError(
                f"need 0 < duration_min_ms <= duration_max_ms, got "
                f"{self.duration_min_ms!r}..{self.duration_max_ms!r}"
            )
        if not (self.noise_sigma >= 0):
            raise ValidationError(f"noise_sigma must be >= 0, got {self.noise_sigma!r}")
        if not (self.audio_delay_ms >= 0):
            raise ValidationError(
                f"audio_delay_ms must be >= 0, got {self.audio_delay_ms!r}"
            )
        if not (self.video_lead_ms >= 0):
            raise ValidationError(
                f"video_lead_ms must be >= 0, got {self.video_lead_ms!r}"
            )
        for name in ("smoothing_ms", "context_limit_ms"):
            value = getattr(self, name)
            if value is not None and not (value > 0):
                raise ValidationError(f"{name} must be > 0 or None, got {value!r}")
        if self.seed < 0:
            raise ValidationError(f"seed must be non-negative, got {self.seed}")


@dataclass(frozen=True, eq=False)
class UtteranceTruth:
    """Ground truth for one utterance: phone class per base-rate frame."""

    index: int
    utterance_id: str
    frame_classes: np.ndarray  # (T_base,) int64
    records: tuple[PhoneRecord, ...]


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """A whole synthetic corpus plus its label vocabulary."""

    config: SynthConfig
    utterances: tuple[UtteranceTruth, ...]
    class_vocab: tuple[str, ...]


def synth_class_label(class_id: int) -> str:
    """Two-letter label ('AA', 'AB', ...); letters survive alignment
    parsing untouched and sort in id order."""
    if not 0 <= class_id < _MAX_CLASSES:
        raise ValidationError(f"class_id out of range: {class_id}")
    return chr(65 + class_id // 26) + chr(65 + class_id % 26)


def _base_frames(ms: float) -> int:
    return int(math.floor(ms * BASE_RATE_HZ / 1000.0 + _FLOOR_EPS))


def _utterance_truth(config: SynthConfig, index: int, seed: int) -> UtteranceTruth:
    rng = np.random.default_rng([seed, index, _STREAM_PHONES])
    utterance_id = f"u{index:04d}"
    n_frames = int(round(config.utterance_s * BASE_RATE_HZ))
    records: list[PhoneRecord] = []
    t = 0.0
    while t < config.utterance_s:
        duration_s = (
            rng.uniform(config.duration_min_ms, config.duration_max_ms) / 1000.0
        )
        class_id = int(rng.integers(config.n_classes))
        records.append(
            PhoneRecord(
                utterance_id=utterance_id,
                phone=synth_class_label(class_id),
                onset_s=t,
                offset_s=t + duration_s,
            )
        )
        t += duration_s

    labels = {synth_class_label(i): i for i in range(config.n_classes)}
    frame_classes = np.empty(n_frames, dtype=np.int64)
    for r in records:
        start = frame_index(r.onset_s, BASE_RATE_HZ)
        stop = min(frame_index(r.offset_s, BASE_RATE_HZ), n_frames)
        frame_classes[start:stop] = labels[r.phone]
    return UtteranceTruth(
        index=index,
        utterance_id=utterance_id,
        frame_classes=frame_classes,
        records=tuple(records),
    )


def gen_ground_truth(config: SynthConfig) -> GroundTruth:
    """Generate the corpus described by ``config``, deterministically."""
    utterances = tuple(
        _utterance_truth(config, u, config.seed) for u in range(config.n_utterances)
    )
    return GroundTruth(
        config=config,
        utterances=utterances,
        class_vocab=tuple(synth_class_label(i) for i in range(config.n_classes)),
    )


def render_audio_stream(truth: UtteranceTruth, config: SynthConfig) -> np.ndarray:
    """Base-rate noisy one-hot stream; audio content is delayed by
    ``audio_delay_ms`` (leading frames are silence), noise is not."""
    n_frames = truth.frame_classes.shape[0]
    k = config.n_classes
    delay = _base_frames(config.audio_delay_ms)
    stream = np.zeros((n_frames, k), dtype=np.float32)
    src = np.arange(n_frames) - delay
    valid = src >= 0
    stream[valid, truth.frame_classes[src[valid]]] = 1.0
    if config.noise_sigma > 0:
        rng = np.random.default_rng([config.seed, truth.index, _STREAM_AUDIO_NOISE])
        stream = stream + config.noise_sigma * rng.standard_normal(
            (n_frames, k)
        ).astype(np.float32)
    return stream


def render_video_stream(truth: UtteranceTruth, config: SynthConfig) -> np.ndarray:
    """Quarter-rate noisy one-hot stream that looks ahead by
    ``video_lead_ms`` (clamped at the utterance end)."""
    n_frames = truth.frame_classes.shape[0]
    n_video = n_frames // _AV_STACK
    k = config.n_classes
    lead = _base_frames(config.video_lead_ms)
    src = np.minimum(np.arange(n_video) * _AV_STACK + lead, n_frames - 1)
    stream = np.zeros((n_video, k), dtype=np.float32)
    stream[np.arange(n_video), truth.frame_classes[src]] = 1.0
    if config.noise_sigma > 0:
        rng = np.random.default_rng([config.seed, truth.index, _STREAM_VIDEO_NOISE])
        stream = stream + config.noise_sigma * rng.standard_normal(
            (n_video, k)
        ).astype(np.float32)
    return stream


def encode_audio_only(audio: np.ndarray) -> np.ndarray:
    """Stack adjacent frame pairs: (T, K) at 100 Hz -> (T//2, 2K) at 50 Hz."""
    if audio.ndim != 2:
        raise ValidationError(f"audio stream must be 2-D, got shape {audio.shape}")
    n_out = audio.shape[0] // _AUDIO_STACK
    if n_out < 1:
        raise ValidationError(
            f"audio stream too short to stack: {audio.shape[0]} frames"
        )
    return audio[: n_out * _AUDIO_STACK].reshape(n_out, -1)


def encode_audio_visual(audio: np.ndarray, video: np.ndarray) -> np.ndarray:
    """Stack four audio frames and append the video frame:
    (T, K) + (T//4, K) -> (T//4, 5K) at 25 Hz."""
    if audio.ndim != 2 or video.ndim != 2:
        raise ValidationError("audio and video streams must be 2-D")
    n_out = audio.shape[0] // _AV_STACK
    if n_out < 1:
        raise ValidationError(
            f"audio stream too short to stack: {audio.shape[0]} frames"
        )
    if video.shape[0] != n_out:
        raise ValidationError(
            f"length mismatch: video has {video.shape[0]} frames, "
            f"audio implies {n_out}"
        )
    stacked = audio[: n_out * _AV_STACK].reshape(n_out, -1)
    return np.hstack([stacked, video])


def _half_width(width_ms: float, frame_rate_hz: float) -> int:
    # Largest h with (2h+1) frames spanning at most width_ms.
    return max(
        0,
        int(math.floor((width_ms * frame_rate_hz / 1000.0 - 1.0) / 2.0 + _FLOOR_EPS)),
    )


def apply_context_limit(
    features: np.ndarray,
    frame_rate_hz: float,
    smoothing_ms: float | None,
    context_limit_ms: float | None = None,
) -> np.ndarray:
    """Moving-average smoothing with an optional hard context cap.

    The boxcar kernel spans at most ``smoothing_ms``; with a limit, taps
    beyond ``context_limit_ms`` are zeroed while the normalization keeps
    the full kernel length (zero-padding semantics). No smoothing kernel
    means identity, whatever the limit.
    """
    if features.ndim != 2:
        raise ValidationError(f"features must be 2-D, got shape {features.shape}")
    if not (frame_rate_hz > 0):
        raise ValidationError(f"frame_rate_hz must be > 0, got {frame_rate_hz!r}")
    if smoothing_ms is None:
        return features
    if not (smoothing_ms > 0):
        raise ValidationError(f"smoothing_ms must be > 0, got {smoothing_ms!r}")
    if context_limit_ms is not None and not (context_limit_ms > 0):
        raise ValidationError(
            f"context_limit_ms must be > 0, got {context_limit_ms!r}"
        )

    half = _half_width(smoothing_ms, frame_rate_hz)
    length = 2 * half + 1
    taps = np.ones(length, dtype=np.float64)
    if context_limit_ms is not None:
        keep = _half_width(context_limit_ms, frame_rate_hz)
        if keep < half:
            taps[: half - keep] = 0.0
            taps[half + keep + 1 :] = 0.0
    kernel = taps / length

    n_frames, dim = features.shape
    padded = np.zeros((n_frames + 2 * half, dim), dtype=np.float64)
    padded[half : half + n_frames] = features
    out = np.zeros((n_frames, dim), dtype=np.float64)
    for tap, weight in enumerate(kernel):
        if weight != 0.0:
            out += weight * padded[tap : tap + n_frames]
    return out.astype(features.dtype)


def synth_features(
    config: SynthConfig, encoder: str
) -> tuple[list[FeatureMatrix], list[PhoneRecord]]:
    """Render and encode the whole corpus for one encoder family."""
    if encoder not in ENCODERS:
        raise ValidationError(f"unknown encoder {encoder!r}; choose from {ENCODERS}")
    truth = gen_ground_truth(config)
    matrices: list[FeatureMatrix] = []
    records: list[PhoneRecord] = []
    for utt in truth.utterances:
        audio = render_audio_stream(utt, config)
        if encoder == "audio":
            feats = encode_audio_only(audio)
            rate = AUDIO_RATE_HZ
        else:
            feats = encode_audio_visual(audio, render_video_stream(utt, config))
            rate = AV_RATE_HZ
        feats = apply_context_limit(
            feats, rate, config.smoothing_ms, config.context_limit_ms
        )
        matrices.append(
            FeatureMatrix(
                utterance_id=utt.utterance_id,
                frame_rate_hz=rate,
                data=feats,
                encoder_tag=f"synth-{encoder}",
                layer=None,
            )
        )
        records.extend(utt.records)
    return matrices, records


@dataclass(frozen=True, eq=False)
class OracleCurve:
    """Decoding-timing prediction from ground truth alone.

    Per offset, each evidence block votes for the class it contains,
    weighted by how far its label-match rate sits above chance; feature
    noise enters analytically. ``evidence_advance_ms`` is the mean lead of
    the onset frame's evidence over the real onset time.
    """

    offsets_ms: tuple[float, ...]
    accuracies: tuple[float, ...]
    peak_time_ms: float
    evidence_advance_ms: float
    n_instances: int
    block_informativeness: np.ndarray  # (n_offsets, n_blocks)


def _interior_instances(
    config: SynthConfig,
    stack: int,
    out_rate: float,
    spec: WindowSpec,
    n_instances: int,
    seed: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Generate fresh utterances until ``n_instances`` phones fit the whole
    window; returns (labels, k0, starts, lengths, onsets, all_classes)."""
    label_of = {synth_class_label(i): i for i in range(config.n_classes)}
    j_lo, j_hi = spec.offsets[0], spec.offsets[-1]
    labels: list[int] = []
    k0s: list[int] = []
    starts: list[int] = []
    lengths: list[int] = []
    onsets: list[float] = []
    chunks: list[np.ndarray] = []
    total = 0
    index = 0
    while len(labels) < n_instances:
        utt = _utterance_truth(config, index, seed)
        n_frames = utt.frame_classes.shape[0]
        n_out = n_frames // stack
        for r in utt.records:
            k0 = frame_index(r.onset_s, out_rate)
            if k0 + j_lo >= 0 and k0 + j_hi < n_out:
                labels.append(label_of[r.phone])
                k0s.append(k0)
                starts.append(total)
                lengths.append(n_frames)
                onsets.append(r.onset_s)
        chunks.append(utt.frame_classes)
        total += n_frames
        index += 1
        if index >= 5 and not labels:
            raise ComputationError(
                f"window of {spec.window_ms} ms never fits inside "
                f"{config.utterance_s} s utterances"
            )
    keep = slice(0, n_instances)
    return (
        np.array(labels[keep], dtype=np.int64),
        np.array(k0s[keep], dtype=np.int64),
        np.array(starts[keep], dtype=np.int64),
        np.array(lengths[keep], dtype=np.int64),
        np.array(onsets[keep], dtype=np.float64),
        np.concatenate(chunks),
    )


def label_match_oracle(
    config: SynthConfig,
    encoder: str,
    window_ms: float,
    n_instances: int = 10000,
    seed: int | None = None,
) -> OracleCurve:
    """Predict the decodability curve shape from ground truth alone.

    Works on unsmoothed configs; generates its own instances (ignoring
    ``config.n_utterances``) so it stays independent of any measured run
    when given a different seed.
    """
    if encoder not in ENCODERS:
        raise ValidationError(f"unknown encoder {encoder!r}; choose from {ENCODERS}")
    if config.smoothing_ms is not None or config.context_limit_ms is not None:
        raise ValidationError("the oracle does not model smoothing or context limits")
    if n_instances < 1:
        raise ValidationError(f"n_instances must be >= 1, got {n_instances}")
    if seed is None:
        seed = config.seed

    stack = _AUDIO_STACK if encoder == "audio" else _AV_STACK
    out_rate = AUDIO_RATE_HZ if encoder == "audio" else AV_RATE_HZ
    has_video = encoder == "audiovisual"
    n_blocks = stack + (1 if has_video else 0)
    spec = WindowSpec(window_ms, out_rate)
    k = config.n_classes
    delay = _base_frames(config.audio_delay_ms)
    lead = _base_frames(config.video_lead_ms)

    labels, k0s, starts, lengths, onsets, all_classes = _interior_instances(
        config, stack, out_rate, spec, n_instances, seed
    )
    n = labels.shape[0]
    rng = np.random.default_rng([seed, _STREAM_ORACLE])
    chance = 1.0 / k

    accuracies: list[float] = []
    informativeness = np.zeros((spec.n_offsets, n_blocks), dtype=np.float64)
    for row, j in enumerate(spec.offsets):
        base = stack * (k0s + j)
        block_classes = np.empty((n, n_blocks), dtype=np.int64)
        for p in range(stack):
            src = base + p - delay
            cls = all_classes[starts + np.maximum(src, 0)]
            block_classes[:, p] = np.where(src >= 0, cls, -1)
        if has_video:
            vsrc = np.minimum(_AV_STACK * (k0s + j) + lead, lengths - 1)
            block_classes[:, stack] = all_classes[starts + vsrc]

        match = block_classes == labels[:, None]
        informativeness[row] = match.mean(axis=0)
        weights = np.maximum(informativeness[row] - chance, 0.0)

        scores = np.zeros((n, k), dtype=np.float64)
        rows = np.arange(n)
        for b in range(n_blocks):
            cls = block_classes[:, b]
            valid = cls >= 0
            scores[rows[valid], cls[valid]] += weights[b]
        noise_scale = config.noise_sigma * math.sqrt(float((weights**2).sum()))
        if noise_scale > 0:
            scores = scores + noise_scale * rng.standard_normal((n, k))
        predicted = np.argmax(scores, axis=1)
        accuracies.append(float(np.mean(predicted == labels)))

    peak_row = int(np.argmax(accuracies))
    advance = float(np.mean(onsets - k0s / out_rate) * 1000.0)
    return OracleCurve(
        offsets_ms=tuple(spec.offset_ms(j) for j in spec.offsets),
        accuracies=tuple(accuracies),
        peak_time_ms=spec.offset_ms(spec.offsets[peak_row]),
        evidence_advance_ms=advance,
        n_instances=n,
        block_informativeness=informativeness,
    )
