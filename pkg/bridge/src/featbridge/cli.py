"""Command line front end for corpus extraction."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import BridgeError
from .extract import DEFAULT_LAYERS, BridgeConfig, extract

EXIT_OK = 0
EXIT_FAILURES = 1
EXIT_INPUT = 2

FAILURE_BUDGET = 0.10


def _parse_layers(raw: str) -> tuple[int, ...]:
    try:
        layers = tuple(int(part) for part in raw.split(",") if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad layer list {raw!r}")
    if not layers:
        raise argparse.ArgumentTypeError("layer list is empty")
    return layers


def _nonnegative(raw: str) -> float:
    value = float(raw)
    if value < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="featbridge",
        description=(
            "Run an encoder backend over a speech corpus and write "
            "frame-data tensors plus an alignment table."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("extract", help="encode a corpus into feature files")
    ex.add_argument("--manifest", type=Path, required=True,
                    help="JSON-lines corpus manifest")
    ex.add_argument("--checkpoint", type=Path, required=True,
                    help="encoder checkpoint (JSON backend spec)")
    ex.add_argument("--family", choices=("audio", "audiovisual"), required=True)
    ex.add_argument("--layers", type=_parse_layers, default=DEFAULT_LAYERS,
                    help="comma-separated layer list (default 3,6,9,12)")
    ex.add_argument("--audio-delay-ms", type=_nonnegative, default=0.0,
                    help="prepend this much silence before encoding")
    ex.add_argument("--context-limit-ms", type=float, default=None,
                    help="cap the encoder's temporal context")
    ex.add_argument("--out", type=Path, required=True, help="output directory")
    return parser


def cmd_extract(args: argparse.Namespace) -> int:
    config = BridgeConfig(
        checkpoint=args.checkpoint,
        family=args.family,
        manifest=args.manifest,
        out_dir=args.out,
        layers=tuple(args.layers),
        audio_delay_ms=args.audio_delay_ms,
        context_limit_ms=args.context_limit_ms,
    )
    report = extract(config)
    for utterance_id, reason in report.failed:
        print(f"skip {utterance_id}: {reason}", file=sys.stderr)
    print(
        f"extracted {len(report.succeeded)}/{report.total} utterances "
        f"({len(report.failed)} failed), wrote {report.files_written} "
        f"feature files and alignments.tsv"
    )
    if report.failure_fraction > FAILURE_BUDGET:
        print(
            f"error: {report.failure_fraction:.0%} of utterances failed "
            f"(budget {FAILURE_BUDGET:.0%})",
            file=sys.stderr,
        )
        return EXIT_FAILURES
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return cmd_extract(args)
    except (BridgeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
