"""Feature tensor files (FDT) and phone alignment tables (TSV)."""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError

MAGIC = b"FDT\x00v001"
HEADER_LEN_BYTES = 4

ALIGNMENT_COLUMNS = ("utterance_id", "phone", "onset_s", "offset_s")

# Non-speech markers dropped while parsing alignments (case-insensitive).
SILENCE_LABELS = frozenset({"sil", "sp", "spn"})

_STRESS_DIGITS = "012"


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Frame-level encoder output for one utterance.

    ``data`` has shape (frames, dim), float32, one row per frame at
    ``frame_rate_hz``. Instances are immutable; ``data`` is coerced to a
    read-only float32 array at construction.
    """

    utterance_id: str
    frame_rate_hz: float
    data: np.ndarray
    encoder_tag: str = ""
    layer: int | None = None

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 2:
            raise ValidationError(
                f"feature data must be 2-D (frames, dim), got shape {arr.shape}"
            )
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def validate(self) -> None:
        """Raise ValidationError unless every documented invariant holds."""
        if not self.utterance_id:
            raise ValidationError("utterance_id must be non-empty")
        if not (self.frame_rate_hz > 0) or not math.isfinite(self.frame_rate_hz):
            raise ValidationError(
                f"non-positive frame rate: {self.frame_rate_hz!r}"
            )
        if self.frames < 1 or self.dim < 1:
            raise ValidationError(
                f"feature data must be non-empty, got shape {self.data.shape}"
            )
        if not np.all(np.isfinite(self.data)):
            raise ValidationError(
                f"utterance {self.utterance_id!r}: feature data contains "
                "non-finite values"
            )
        if self.layer is not None and not isinstance(self.layer, int):
            raise ValidationError(f"layer must be int or None, got {self.layer!r}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FeatureMatrix):
            return NotImplemented
        return (
            self.utterance_id == other.utterance_id
            and self.frame_rate_hz == other.frame_rate_hz
            and self.encoder_tag == other.encoder_tag
            and self.layer == other.layer
            and self.data.shape == other.data.shape
            and np.array_equal(self.data, other.data)
        )


@dataclass(frozen=True)
class PhoneRecord:
    """One phone interval inside one utterance, in seconds."""

    utterance_id: str
    phone: str
    onset_s: float
    offset_s: float


def write_feature_file(matrix: FeatureMatrix, path: str | Path) -> None:
    """Serialize ``matrix`` to ``path``; validates before touching the disk."""
    matrix.validate()
    header = {
        "utterance_id": matrix.utterance_id,
        "frame_rate_hz": float(matrix.frame_rate_hz),
        "dim": matrix.dim,
        "frames": matrix.frames,
        "encoder_tag": matrix.encoder_tag,
        "layer": matrix.layer,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = np.ascontiguousarray(matrix.data, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(payload)


def read_feature_file(path: str | Path) -> FeatureMatrix:
    """Parse an FDT file, verifying magic, header, and payload size."""
    raw = Path(path).read_bytes()
    prefix = len(MAGIC) + HEADER_LEN_BYTES
    if len(raw) < prefix:
        raise FormatError(f"{path}: file shorter than the fixed prefix")
    if raw[: len(MAGIC)] != MAGIC:
        raise FormatError(f"{path}: bad magic bytes {raw[:len(MAGIC)]!r}")
    (header_len,) = struct.unpack("<I", raw[len(MAGIC) : prefix])
    if len(raw) < prefix + header_len:
        raise FormatError(f"{path}: header truncated")
    try:
        header = json.loads(raw[prefix : prefix + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: header is not valid JSON: {exc}") from exc
    if not isinstance(header, dict):
        raise FormatError(f"{path}: header must be a JSON object")
    missing = {
        "utterance_id",
        "frame_rate_hz",
        "dim",
        "frames",
        "encoder_tag",
        "layer",
    } - header.keys()
    if missing:
        raise FormatError(f"{path}: header missing keys {sorted(missing)}")

    frames, dim = header["frames"], header["dim"]
    rate = header["frame_rate_hz"]
    layer = header["layer"]
    if not isinstance(frames, int) or not isinstance(dim, int) or frames < 1 or dim < 1:
        raise FormatError(f"{path}: frames/dim must be positive integers")
    if not isinstance(rate, (int, float)) or isinstance(rate, bool) or not rate > 0:
        raise FormatError(f"{path}: non-positive frame rate: {rate!r}")
    if layer is not None and (not isinstance(layer, int) or isinstance(layer, bool)):
        raise FormatError(f"{path}: layer must be an integer or null")
    if not isinstance(header["utterance_id"], str) or not isinstance(
        header["encoder_tag"], str
    ):
        raise FormatError(f"{path}: utterance_id and encoder_tag must be strings")

    payload = raw[prefix + header_len :]
    expected = frames * dim * 4
    if len(payload) < expected:
        raise FormatError(
            f"{path}: payload truncated, expected {expected} bytes, "
            f"got {len(payload)}"
        )
    if len(payload) > expected:
        raise FormatError(
            f"{path}: payload longer than the header declares "
            f"({len(payload)} > {expected} bytes)"
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(frames, dim)
    matrix = FeatureMatrix(
        utterance_id=header["utterance_id"],
        frame_rate_hz=float(rate),
        data=data,
        encoder_tag=header["encoder_tag"],
        layer=layer,
    )
    matrix.validate()
    return matrix


def strip_stress(phone: str) -> str:
    """Drop a single trailing stress digit: ``AH1`` becomes ``AH``."""
    if len(phone) > 1 and phone[-1] in _STRESS_DIGITS:
        return phone[:-1]
    return phone


def read_alignments(path: str | Path) -> list[PhoneRecord]:
    """Parse an alignment TSV into records sorted by (utterance, onset).

    Stress digits are stripped from phone labels and non-speech markers
    (sil/sp/spn, any case) are dropped. Overlapping intervals within an
    utterance make the whole file invalid.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: not valid UTF-8: {exc}") from exc
    lines = text.splitlines()
    if not lines:
        raise FormatError(f"{path}: empty file, expected a header line")
    if tuple(lines[0].split("\t")) != ALIGNMENT_COLUMNS:
        raise FormatError(
            f"{path}: line 1: expected header "
            f"{chr(9).join(ALIGNMENT_COLUMNS)!r}, got {lines[0]!r}"
        )

    records: list[PhoneRecord] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise FormatError(
                f"{path}: line {lineno}: expected 4 tab-separated fields, "
                f"got {len(fields)}"
            )
        utterance_id, phone, onset_text, offset_text = fields
        if not utterance_id:
            raise FormatError(f"{path}: line {lineno}: empty utterance_id")
        phone = strip_stress(phone.strip())
        if not phone:
            raise FormatError(f"{path}: line {lineno}: empty phone label")
        try:
            onset_s = float(onset_text)
            offset_s = float(offset_text)
        except ValueError as exc:
            raise FormatError(
                f"{path}: line {lineno}: non-numeric time field: {exc}"
            ) from exc
        if not (math.isfinite(onset_s) and math.isfinite(offset_s)):
            raise FormatError(f"{path}: line {lineno}: non-finite time field")
        if onset_s < 0:
            raise FormatError(
                f"{path}: line {lineno}: negative onset {onset_s!r}"
            )
        if offset_s <= onset_s:
            raise FormatError(
                f"{path}: line {lineno}: offset {offset_s!r} not after "
                f"onset {onset_s!r}"
            )
        records.append(PhoneRecord(utterance_id, phone, onset_s, offset_s))

    records.sort(key=lambda r: (r.utterance_id, r.onset_s, r.offset_s))
    for a, b in zip(records, records[1:]):
        if a.utterance_id == b.utterance_id and b.onset_s < a.offset_s:
            raise FormatError(
                f"{path}: utterance {a.utterance_id!r}: overlapping intervals "
                f"[{a.onset_s}, {a.offset_s}) and [{b.onset_s}, {b.offset_s})"
            )
    return [r for r in records if r.phone.lower() not in SILENCE_LABELS]


def write_alignments(records: list[PhoneRecord], path: str | Path) -> None:
    """Write records as an alignment TSV (times with 6 decimal places)."""
    lines = ["\t".join(ALIGNMENT_COLUMNS)]
    for r in records:
        lines.append(f"{r.utterance_id}\t{r.phone}\t{r.onset_s:.6f}\t{r.offset_s:.6f}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
