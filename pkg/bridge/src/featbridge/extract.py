"""Corpus extraction: manifest in, feature tensors and alignment table out.

Utterances are processed independently (the loop is trivially
parallelizable and file writes never contend); a failure in one utterance
is recorded and skipped so the rest of the corpus still extracts.
"""

from __future__ import annotations

import json
import math
import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from decodewin import FeatureMatrix, PhoneRecord, write_alignments, write_feature_file
from decodewin import DecodewinError

from .backends import FAMILY_RATES, EncoderBackend, load_backend
from .errors import BridgeError, CheckpointError, ManifestError, MediaError
from .textgrid import phone_records_from_textgrid

DEFAULT_LAYERS = (3, 6, 9, 12)


@dataclass(frozen=True)
class BridgeConfig:
    """Everything one extraction run needs."""

    checkpoint: Path
    family: str
    manifest: Path
    out_dir: Path
    layers: tuple[int, ...] = DEFAULT_LAYERS
    audio_delay_ms: float = 0.0
    context_limit_ms: float | None = None

    def __post_init__(self) -> None:
        if self.family not in FAMILY_RATES:
            raise BridgeError(
                f"unknown model family {self.family!r}; expected one of "
                f"{sorted(FAMILY_RATES)}"
            )
        if not self.layers:
            raise BridgeError("layers must not be empty")
        if any(int(layer) != layer or layer < 1 for layer in self.layers):
            raise BridgeError("layers must be positive integers")
        if not math.isfinite(self.audio_delay_ms) or self.audio_delay_ms < 0:
            raise BridgeError("audio_delay_ms must be finite and >= 0")
        if self.context_limit_ms is not None and (
            not math.isfinite(self.context_limit_ms) or self.context_limit_ms <= 0
        ):
            raise BridgeError("context_limit_ms must be finite and > 0")


@dataclass(frozen=True)
class ManifestEntry:
    utterance_id: str
    media: Path
    transcript: str
    alignment: Path


@dataclass(frozen=True)
class ExtractReport:
    succeeded: tuple[str, ...]
    failed: tuple[tuple[str, str], ...] = field(default_factory=tuple)
    files_written: int = 0

    @property
    def total(self) -> int:
        return len(self.succeeded) + len(self.failed)

    @property
    def failure_fraction(self) -> float:
        return len(self.failed) / self.total if self.total else 0.0


def read_corpus_manifest(path: Path | str) -> tuple[ManifestEntry, ...]:
    """Parse a JSON-lines corpus manifest.

    Each line is an object with ``utterance_id``, ``media``, and
    ``transcript``; ``alignment`` is optional and defaults to the media
    path with a ``.TextGrid`` suffix.  Relative paths resolve against the
    manifest's directory.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"manifest not readable: {exc}") from exc

    root = path.parent
    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"manifest line {lineno}: not valid JSON: {exc}")
        if not isinstance(row, dict):
            raise ManifestError(f"manifest line {lineno}: expected an object")
        missing = [k for k in ("utterance_id", "media", "transcript") if k not in row]
        if missing:
            raise ManifestError(f"manifest line {lineno}: missing field {missing[0]!r}")
        utterance_id = str(row["utterance_id"])
        if not utterance_id:
            raise ManifestError(f"manifest line {lineno}: empty utterance_id")
        if utterance_id in seen:
            raise ManifestError(
                f"manifest line {lineno}: duplicate utterance_id {utterance_id!r}"
            )
        seen.add(utterance_id)
        media = root / str(row["media"])
        alignment = (
            root / str(row["alignment"])
            if "alignment" in row
            else media.with_suffix(".TextGrid")
        )
        entries.append(
            ManifestEntry(utterance_id, media, str(row["transcript"]), alignment)
        )
    if not entries:
        raise ManifestError("manifest lists no utterances")
    return tuple(entries)


def _read_wav(path: Path) -> tuple[np.ndarray, int]:
    """Load a PCM WAV file as mono float32 in [-1, 1]."""
    try:
        with wave.open(str(path), "rb") as handle:
            sample_rate = handle.getframerate()
            channels = handle.getnchannels()
            width = handle.getsampwidth()
            raw = handle.readframes(handle.getnframes())
    except (OSError, wave.Error, EOFError) as exc:
        raise MediaError(f"media not decodable: {exc}") from exc
    if width == 2:
        data = np.frombuffer(raw, dtype="<i2").astype(np.float32) / 32768.0
    elif width == 1:
        data = (np.frombuffer(raw, dtype=np.uint8).astype(np.float32) - 128.0) / 128.0
    else:
        raise MediaError(f"unsupported sample width {width} bytes")
    if channels > 1:
        data = data.reshape(-1, channels).mean(axis=1)
    return data, sample_rate


def _extract_one(
    entry: ManifestEntry,
    backend: EncoderBackend,
    config: BridgeConfig,
) -> tuple[int, tuple[PhoneRecord, ...]]:
    """Encode one utterance and write its per-layer feature files."""
    records = phone_records_from_textgrid(
        entry.alignment.read_text(encoding="utf-8"), entry.utterance_id
    )
    samples, sample_rate = _read_wav(entry.media)
    if config.audio_delay_ms > 0:
        # The manipulation happens in the raw domain, before the encoder.
        pad = round(config.audio_delay_ms / 1000.0 * sample_rate)
        samples = np.concatenate([np.zeros(pad, dtype=samples.dtype), samples])
    by_layer = backend.encode(samples, sample_rate, config.layers)

    written = 0
    for layer, values in sorted(by_layer.items()):
        matrix = FeatureMatrix(
            utterance_id=entry.utterance_id,
            frame_rate_hz=backend.frame_rate_hz,
            data=values,
            encoder_tag=backend.tag,
            layer=layer,
        )
        target = config.out_dir / f"layer{layer:02d}" / f"{entry.utterance_id}.fdt"
        target.parent.mkdir(parents=True, exist_ok=True)
        write_feature_file(matrix, target)
        written += 1
    return written, records


def extract(config: BridgeConfig) -> ExtractReport:
    """Run the backend over every manifest entry and write the outputs.

    Per-utterance problems are collected, not raised; manifest and
    checkpoint problems abort immediately.
    """
    entries = read_corpus_manifest(config.manifest)
    backend = load_backend(config.checkpoint, config.family, config.context_limit_ms)
    too_deep = [layer for layer in config.layers if layer > backend.depth]
    if too_deep:
        raise CheckpointError(
            f"layer {too_deep[0]} exceeds model depth {backend.depth}"
        )

    succeeded: list[str] = []
    failed: list[tuple[str, str]] = []
    all_records: list[PhoneRecord] = []
    files_written = 0
    for entry in entries:
        try:
            written, records = _extract_one(entry, backend, config)
        except (BridgeError, DecodewinError, OSError) as exc:
            failed.append((entry.utterance_id, str(exc)))
            continue
        files_written += written
        succeeded.append(entry.utterance_id)
        all_records.extend(records)

    config.out_dir.mkdir(parents=True, exist_ok=True)
    write_alignments(all_records, config.out_dir / "alignments.tsv")
    return ExtractReport(
        succeeded=tuple(succeeded),
        failed=tuple(failed),
        files_written=files_written,
    )
