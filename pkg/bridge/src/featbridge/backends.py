"""Pluggable encoder backends.

A checkpoint is a JSON document naming a backend from ``BACKENDS`` plus its
parameters.  Heavyweight pretrained-model inference is intentionally not
implemented here; such a family would register its builder in ``BACKENDS``
and load its weights from the same checkpoint path.  The shipped
``projection`` backend is a deterministic signal-level encoder (windowed
spectra pushed through seeded per-layer random projections), which makes
the full extraction pipeline testable offline.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Protocol, Sequence

import numpy as np

from .errors import CheckpointError, MediaError

FAMILY_RATES: Mapping[str, float] = {"audio": 50.0, "audiovisual": 25.0}

_EPS = 1e-9
_N_BANDS = 32


class EncoderBackend(Protocol):
    """What the extraction loop needs from any encoder."""

    family: str
    depth: int
    tag: str

    @property
    def frame_rate_hz(self) -> float: ...

    def encode(
        self,
        samples: np.ndarray,
        sample_rate_hz: int,
        layers: Sequence[int],
    ) -> dict[int, np.ndarray]: ...


@dataclass(frozen=True)
class ProjectionEncoder:
    """Windowed spectral summaries through per-layer random projections.

    Output rows depend only on the samples within ``window_ms`` around each
    frame center, so a context limit is honored exactly by shrinking that
    window.  Identical inputs produce identical features; layers differ by
    their projection seed.
    """

    family: str
    depth: int = 12
    dim: int = 48
    seed: int = 0
    window_ms: float = 50.0
    tag: str = ""

    def __post_init__(self) -> None:
        if self.family not in FAMILY_RATES:
            raise CheckpointError(f"unknown model family {self.family!r}")
        if self.depth < 1 or self.dim < 1 or self.seed < 0:
            raise CheckpointError("depth and dim must be >= 1 and seed >= 0")
        if not math.isfinite(self.window_ms) or self.window_ms <= 0:
            raise CheckpointError("window_ms must be a positive finite number")
        if not self.tag:
            object.__setattr__(self, "tag", f"projection-{self.family}")

    @property
    def frame_rate_hz(self) -> float:
        return FAMILY_RATES[self.family]

    def encode(
        self,
        samples: np.ndarray,
        sample_rate_hz: int,
        layers: Sequence[int],
    ) -> dict[int, np.ndarray]:
        if sample_rate_hz <= 0:
            raise MediaError("non-positive sample rate")
        samples = np.asarray(samples, dtype=np.float64).ravel()
        rate = self.frame_rate_hz
        n_frames = int(samples.size / sample_rate_hz * rate + _EPS)
        if n_frames < 1:
            raise MediaError("media shorter than one feature frame")

        window = max(1, round(self.window_ms / 1000.0 * sample_rate_hz))
        fft_size = 1 << max(1, (window - 1).bit_length())
        centers = (np.arange(n_frames) + 0.5) / rate
        starts = np.round(centers * sample_rate_hz - window / 2.0).astype(np.int64)

        frames = np.zeros((n_frames, window))
        for i, start in enumerate(starts):
            lo = max(int(start), 0)
            hi = min(int(start) + window, samples.size)
            if hi > lo:
                frames[i, lo - int(start):hi - int(start)] = samples[lo:hi]

        spectra = np.abs(np.fft.rfft(frames, n=fft_size, axis=1))
        bands = np.stack(
            [chunk.sum(axis=1) for chunk in np.array_split(spectra, _N_BANDS, axis=1)],
            axis=1,
        )
        energy = np.mean(frames * frames, axis=1, keepdims=True)
        signs = np.signbit(frames).astype(np.int8)
        crossings = np.mean(np.abs(np.diff(signs, axis=1)), axis=1, keepdims=True)
        base = np.concatenate(
            [np.log1p(bands), np.log1p(energy), crossings], axis=1
        )

        out: dict[int, np.ndarray] = {}
        for layer in layers:
            rng = np.random.default_rng([self.seed, int(layer)])
            projection = rng.normal(size=(base.shape[1], self.dim))
            projection /= math.sqrt(base.shape[1])
            out[int(layer)] = np.tanh(base @ projection).astype(np.float32)
        return out


def _build_projection(
    spec: dict, family: str, context_limit_ms: float | None
) -> ProjectionEncoder:
    window_ms = float(spec.get("window_ms", 50.0))
    if context_limit_ms is not None:
        window_ms = min(window_ms, float(context_limit_ms))
    try:
        return ProjectionEncoder(
            family=family,
            depth=int(spec.get("depth", 12)),
            dim=int(spec.get("dim", 48)),
            seed=int(spec.get("seed", 0)),
            window_ms=window_ms,
            tag=str(spec.get("tag", "")),
        )
    except (TypeError, ValueError) as exc:
        raise CheckpointError(f"bad checkpoint field: {exc}") from exc


BACKENDS: Mapping[str, Callable[[dict, str, float | None], EncoderBackend]] = {
    "projection": _build_projection,
}


def load_backend(
    checkpoint: Path | str,
    family: str,
    context_limit_ms: float | None = None,
) -> EncoderBackend:
    """Instantiate the encoder named by a checkpoint JSON document."""
    if family not in FAMILY_RATES:
        raise CheckpointError(
            f"unknown model family {family!r}; expected one of "
            f"{sorted(FAMILY_RATES)}"
        )
    try:
        spec = json.loads(Path(checkpoint).read_text(encoding="utf-8"))
    except OSError as exc:
        raise CheckpointError(f"checkpoint not loadable: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"checkpoint is not valid JSON: {exc}") from exc
    if not isinstance(spec, dict):
        raise CheckpointError("checkpoint must be a JSON object")
    name = spec.get("backend")
    builder = BACKENDS.get(name)
    if builder is None:
        raise CheckpointError(
            f"unknown backend {name!r}; known backends: {sorted(BACKENDS)}"
        )
    return builder(spec, family, context_limit_ms)
