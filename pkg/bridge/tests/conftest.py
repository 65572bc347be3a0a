"""Corpus-building helpers and the acceptance summary hook."""

from __future__ import annotations

import json
import wave
from pathlib import Path

import numpy as np
import pytest

PHONES = ("AA", "EH", "IY", "OW", "UW")
TONE_HZ = {phone: 400.0 * (i + 1) for i, phone in enumerate(PHONES)}
SAMPLE_RATE = 16000

_acceptance: list[tuple[str, bool]] = []


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    _acceptance.append((report.nodeid.split("::")[-1], report.passed))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance checks:")
    for name, ok in _acceptance:
        terminalreporter.write_line(f"  [{'PASS' if ok else 'FAIL'}] {name}")


def write_wav(path: Path, samples: np.ndarray, sample_rate: int = SAMPLE_RATE) -> None:
    pcm = np.clip(samples, -1.0, 1.0)
    pcm = (pcm * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as handle:
        handle.setnchannels(1)
        handle.setsampwidth(2)
        handle.setframerate(sample_rate)
        handle.writeframes(pcm.tobytes())


def textgrid_text(intervals, xmax: float, extra_tier: bool = True) -> str:
    lines = [
        'File type = "ooTextFile"',
        'Object class = "TextGrid"',
        "",
        "xmin = 0 ",
        f"xmax = {xmax} ",
        "tiers? <exists> ",
        f"size = {2 if extra_tier else 1} ",
        "item []: ",
    ]

    def emit(index: int, name: str, tier_intervals) -> None:
        lines.append(f"    item [{index}]:")
        lines.append('        class = "IntervalTier" ')
        lines.append(f'        name = "{name}" ')
        lines.append("        xmin = 0 ")
        lines.append(f"        xmax = {xmax} ")
        lines.append(f"        intervals: size = {len(tier_intervals)} ")
        for k, (lo, hi, text) in enumerate(tier_intervals, start=1):
            lines.append(f"        intervals [{k}]:")
            lines.append(f"            xmin = {lo} ")
            lines.append(f"            xmax = {hi} ")
            lines.append(f'            text = "{text}" ')

    if extra_tier:
        emit(1, "words", [(0.0, xmax, "speech")])
        emit(2, "phones", intervals)
    else:
        emit(1, "phones", intervals)
    return "\n".join(lines) + "\n"


def synth_utterance(seed: int, utterance_s: float) -> tuple[np.ndarray, list]:
    """Tone-coded segments: each phone is a distinct pure tone plus noise."""
    rng = np.random.default_rng(seed)
    segments = []
    t = 0.15
    while t < utterance_s:
        phone = PHONES[int(rng.integers(len(PHONES)))]
        duration = float(rng.uniform(0.2, 0.4))
        segments.append((round(t, 6), round(t + duration, 6), phone))
        t += duration
    total = segments[-1][1]
    n = round(total * SAMPLE_RATE)
    samples = rng.normal(0.0, 0.02, size=n)
    times = np.arange(n) / SAMPLE_RATE
    for lo, hi, phone in segments:
        mask = (times >= lo) & (times < hi)
        samples[mask] += 0.5 * np.sin(2.0 * np.pi * TONE_HZ[phone] * times[mask])
    return samples.astype(np.float32), segments


def build_corpus(root: Path, n_utterances: int = 6, utterance_s: float = 8.0,
                 seed: int = 0) -> Path:
    """Write wavs, TextGrids, and a manifest; return the manifest path."""
    root.mkdir(parents=True, exist_ok=True)
    rows = []
    for index in range(n_utterances):
        utterance_id = f"clip{index:03d}"
        samples, segments = synth_utterance(seed * 1000 + index, utterance_s)
        total = len(samples) / SAMPLE_RATE
        write_wav(root / f"{utterance_id}.wav", samples)
        intervals = [(0.0, segments[0][0], "")] + segments
        (root / f"{utterance_id}.TextGrid").write_text(
            textgrid_text(intervals, total)
        )
        row = {
            "utterance_id": utterance_id,
            "media": f"{utterance_id}.wav",
            "transcript": " ".join(p for _, _, p in segments),
        }
        if index == 0:
            row["alignment"] = f"{utterance_id}.TextGrid"
        rows.append(json.dumps(row))
    manifest = root / "corpus.jsonl"
    manifest.write_text("\n".join(rows) + "\n")
    return manifest


def write_checkpoint(path: Path, **overrides) -> Path:
    spec = {"backend": "projection", "depth": 12, "dim": 48, "seed": 9}
    spec.update(overrides)
    path.write_text(json.dumps(spec))
    return path


@pytest.fixture()
def checkpoint(tmp_path):
    return write_checkpoint(tmp_path / "encoder.json")
