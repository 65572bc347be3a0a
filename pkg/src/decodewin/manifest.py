"""Run manifests: resolved configuration plus input digests, no timestamps."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping

from ._version import __version__

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash."""
    value = FNV_OFFSET
    for byte in data:
        value = ((value ^ byte) * FNV_PRIME) & _MASK
    return value


def file_digest(path: str | Path) -> str:
    """FNV-1a of a file's bytes as 16 hex digits."""
    return format(fnv1a64(Path(path).read_bytes()), "016x")


@dataclass(frozen=True)
class RunManifest:
    """What a run saw: command, every resolved setting, input digests."""

    command: str
    config: Mapping[str, Any]
    inputs: Mapping[str, str]
    seed: int
    version: str = __version__

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "command": self.command,
            "config": dict(self.config),
            "inputs": dict(self.inputs),
            "seed": self.seed,
            "version": self.version,
        }


def build_manifest(
    command: str,
    config: Mapping[str, Any],
    input_paths: Iterable[str | Path],
    seed: int,
) -> RunManifest:
    inputs = {str(p): file_digest(p) for p in input_paths}
    return RunManifest(command=command, config=config, inputs=inputs, seed=seed)


def write_manifest(manifest: RunManifest, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(manifest.to_json_dict(), sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
