"""Convert Praat long-format TextGrid phone tiers to alignment records.

Forced aligners (e.g. the Montreal Forced Aligner) emit one TextGrid per
utterance with a "phones" interval tier partitioning the timeline; empty
interval texts mark silence gaps.  Only conversion lives here; running the
aligner is out of scope.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from decodewin import PhoneRecord

from .errors import MediaError

_ITEM_RE = re.compile(r"^item\s*\[\d+\]\s*:$")
_INTERVAL_RE = re.compile(r"^intervals\s*\[\d+\]\s*:$")


@dataclass
class _Tier:
    klass: str = ""
    name: str = ""
    intervals: list[dict[str, object]] = field(default_factory=list)


def _parse_value(raw: str, lineno: int):
    raw = raw.strip()
    if raw.startswith('"'):
        if len(raw) < 2 or not raw.endswith('"'):
            raise MediaError(f"TextGrid line {lineno}: unterminated string")
        return raw[1:-1].replace('""', '"')
    try:
        return float(raw)
    except ValueError:
        raise MediaError(f"TextGrid line {lineno}: bad value {raw!r}") from None


def _parse_tiers(text: str) -> list[_Tier]:
    lines = [ln.strip() for ln in text.splitlines()]
    meaningful = [ln for ln in lines if ln]
    if (
        len(meaningful) < 2
        or "ooTextFile" not in meaningful[0]
        or "TextGrid" not in meaningful[1]
    ):
        raise MediaError("not a TextGrid file")

    tiers: list[_Tier] = []
    tier: _Tier | None = None
    interval: dict[str, object] | None = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if _ITEM_RE.match(stripped):
            tier = _Tier()
            tiers.append(tier)
            interval = None
            continue
        if _INTERVAL_RE.match(stripped) and tier is not None:
            interval = {"lineno": lineno}
            tier.intervals.append(interval)
            continue
        if "=" not in stripped:
            continue
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if interval is not None and key in ("xmin", "xmax", "text"):
            interval[key] = _parse_value(raw, lineno)
        elif tier is not None and interval is None and key in ("class", "name"):
            tier_value = _parse_value(raw, lineno)
            if key == "class":
                tier.klass = str(tier_value)
            else:
                tier.name = str(tier_value)
    return tiers


def phone_records_from_textgrid(
    text: str,
    utterance_id: str,
    tier_name: str = "phones",
) -> tuple[PhoneRecord, ...]:
    """Extract non-empty intervals of the named tier as alignment records.

    Empty or whitespace-only texts (silence gaps) are dropped; label
    normalization such as stress stripping is left to the consumer.
    """
    tiers = _parse_tiers(text)
    wanted = [
        t for t in tiers
        if t.klass == "IntervalTier" and t.name.lower() == tier_name.lower()
    ]
    if not wanted:
        raise MediaError(f"no interval tier named {tier_name!r} in TextGrid")

    records = []
    for interval in wanted[0].intervals:
        missing = [k for k in ("xmin", "xmax", "text") if k not in interval]
        if missing:
            raise MediaError(
                f"TextGrid line {interval['lineno']}: interval lacks {missing[0]}"
            )
        label = str(interval["text"]).strip()
        if not label:
            continue
        onset = float(interval["xmin"])  # type: ignore[arg-type]
        offset = float(interval["xmax"])  # type: ignore[arg-type]
        if offset <= onset:
            raise MediaError(
                f"TextGrid line {interval['lineno']}: empty interval for {label!r}"
            )
        records.append(PhoneRecord(utterance_id, label, onset, offset))

    records.sort(key=lambda r: (r.onset_s, r.offset_s))
    for earlier, later in zip(records, records[1:]):
        if later.onset_s < earlier.offset_s - 1e-9:
            raise MediaError(
                f"TextGrid intervals overlap: {earlier.phone!r} and {later.phone!r}"
            )
    return tuple(records)
