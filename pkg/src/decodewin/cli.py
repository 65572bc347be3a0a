"""Command line interface: synth, curve, normalize, peaks, compare, validate."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any

from . import curves as curvemod
from . import synthlab
from ._version import __version__
from .errors import ComputationError, DecodewinError, FormatError, ValidationError
from .linclass import TrainConfig
from .manifest import build_manifest, write_manifest
from .svgchart import emit_svg
from .tensorio import (
    read_alignments,
    read_feature_file,
    write_alignments,
    write_feature_file,
)
from .windowing import WindowSpec, build_offset_dataset, filter_phones, make_folds
from .windowing import subsample as subsample_dataset

EXIT_OK = 0
EXIT_COMPUTATION = 1
EXIT_INPUT = 2


def parse_fraction(text: str) -> float:
    """Accept '1/15' or a plain float literal."""
    try:
        if "/" in text:
            num, den = text.split("/", 1)
            value = float(num) / float(den)
        else:
            value = float(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a fraction: {text!r} ({exc})") from exc
    return value


def _parse_subset(text: str) -> str | list[str]:
    if text in ("all", "plosive"):
        return text
    return [p for p in text.split(",") if p]


def _curve_label(meta: curvemod.CurveMeta) -> str:
    parts = [meta.encoder_tag or "curve"]
    if meta.layer is not None:
        parts.append(f"L{meta.layer}")
    if meta.phone_subset and meta.phone_subset != "all":
        parts.append(meta.phone_subset)
    if meta.normalized:
        parts.append("(normalized)")
    if meta.delay_ms:
        parts.append(f"(+{meta.delay_ms:g} ms delay)")
    return " ".join(parts)


def _write_curve_outputs(
    curve: curvemod.DecodabilityCurve, prefix: Path, png: bool
) -> list[Path]:
    prefix.parent.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    csv_path = prefix.with_name(prefix.name + ".csv")
    curvemod.write_curve_csv(curve, csv_path)
    written.append(csv_path)
    json_path = prefix.with_name(prefix.name + ".json")
    curvemod.write_curve_json(curve, json_path)
    written.append(json_path)
    svg_path = prefix.with_name(prefix.name + ".svg")
    emit_svg([(_curve_label(curve.meta), curve)], svg_path)
    written.append(svg_path)
    if png:
        from .plotting import render_curves_png

        png_path = prefix.with_name(prefix.name + ".png")
        render_curves_png([(_curve_label(curve.meta), curve)], png_path)
        written.append(png_path)
    return written


def _manifest_path(prefix: Path) -> Path:
    return prefix.with_name(prefix.name + ".manifest.json")


def cmd_synth(args: argparse.Namespace) -> int:
    encoders = args.encoder or list(synthlab.ENCODERS)
    config = synthlab.SynthConfig(
        n_utterances=args.utterances,
        utterance_s=args.utterance_s,
        n_classes=args.classes,
        duration_min_ms=args.duration_min_ms,
        duration_max_ms=args.duration_max_ms,
        noise_sigma=args.noise_sigma,
        audio_delay_ms=args.audio_delay_ms,
        video_lead_ms=args.video_lead_ms,
        smoothing_ms=args.smoothing_ms,
        context_limit_ms=args.context_limit_ms,
        seed=args.seed,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records_written = False
    for encoder in encoders:
        matrices, records = synthlab.synth_features(config, encoder)
        enc_dir = out / encoder
        enc_dir.mkdir(exist_ok=True)
        for m in matrices:
            write_feature_file(m, enc_dir / f"{m.utterance_id}.fdt")
        if not records_written:
            write_alignments(records, out / "alignments.tsv")
            records_written = True
        print(f"wrote {len(matrices)} feature files to {enc_dir}")
    manifest = build_manifest(
        command="synth",
        config={
            "encoders": encoders,
            "n_utterances": config.n_utterances,
            "utterance_s": config.utterance_s,
            "n_classes": config.n_classes,
            "duration_min_ms": config.duration_min_ms,
            "duration_max_ms": config.duration_max_ms,
            "noise_sigma": config.noise_sigma,
            "audio_delay_ms": config.audio_delay_ms,
            "video_lead_ms": config.video_lead_ms,
            "smoothing_ms": config.smoothing_ms,
            "context_limit_ms": config.context_limit_ms,
        },
        input_paths=[],
        seed=config.seed,
    )
    write_manifest(manifest, out / "manifest.json")
    print(f"wrote {out / 'alignments.tsv'} and {out / 'manifest.json'}")
    return EXIT_OK


def _load_feature_dir(features_dir: Path) -> list:
    if not features_dir.is_dir():
        raise ValidationError(f"not a directory: {features_dir}")
    paths = sorted(features_dir.glob("*.fdt"))
    if not paths:
        raise ValidationError(f"no .fdt files in {features_dir}")
    return [read_feature_file(p) for p in paths]


def cmd_curve(args: argparse.Namespace) -> int:
    matrices = _load_feature_dir(Path(args.features))
    rate = matrices[0].frame_rate_hz
    tag = matrices[0].encoder_tag
    layer = matrices[0].layer
    for m in matrices[1:]:
        if m.frame_rate_hz != rate:
            raise ValidationError(
                f"mixed frame rates in {args.features}: {rate} vs "
                f"{m.frame_rate_hz} ({m.utterance_id})"
            )
        if (m.encoder_tag, m.layer) != (tag, layer):
            raise ValidationError(
                f"mixed encoder tags/layers in {args.features}: "
                f"({tag!r}, {layer}) vs ({m.encoder_tag!r}, {m.layer}) "
                f"({m.utterance_id})"
            )

    records = read_alignments(args.alignments)
    subset = _parse_subset(args.phone_subset)
    records = filter_phones(records, subset)

    spec = WindowSpec(window_ms=args.window_ms, frame_rate_hz=rate)
    dataset = build_offset_dataset(matrices, records, spec)
    dataset = subsample_dataset(dataset, args.sample_fraction, args.seed)
    plan = make_folds((r.utterance_id for r in records), args.folds, args.seed)
    config = TrainConfig(
        l2_strength=args.l2,
        max_iterations=args.max_iterations,
        grad_tolerance=args.grad_tolerance,
    )
    meta = curvemod.CurveMeta(
        encoder_tag=tag,
        layer=layer,
        phone_subset=args.phone_subset,
        seed=args.seed,
        delay_ms=args.delay_ms,
    )
    curve = curvemod.compute_curve(
        dataset,
        plan,
        config=config,
        batches=args.batches,
        min_samples=args.min_samples,
        meta=meta,
        threads=args.threads,
    )

    prefix = Path(args.out)
    written = _write_curve_outputs(curve, prefix, png=not args.no_png)
    fdt_paths = sorted(Path(args.features).glob("*.fdt"))
    manifest = build_manifest(
        command="curve",
        config={
            "window_ms": args.window_ms,
            "folds": args.folds,
            "sample_fraction": args.sample_fraction,
            "batches": args.batches,
            "phone_subset": args.phone_subset,
            "l2_strength": args.l2,
            "max_iterations": args.max_iterations,
            "grad_tolerance": args.grad_tolerance,
            "min_samples": (
                args.min_samples
                if args.min_samples is not None
                else 10 * len(dataset.class_vocab)
            ),
            "delay_ms": args.delay_ms,
            "png": not args.no_png,
        },
        input_paths=[*fdt_paths, args.alignments],
        seed=args.seed,
    )
    write_manifest(manifest, _manifest_path(prefix))
    peak = curvemod.find_peak(curve)
    print(
        f"peak {peak.peak_value:.4f} at {peak.peak_time_ms:g} ms; wrote "
        + ", ".join(str(p) for p in written)
    )
    return EXIT_OK


def cmd_normalize(args: argparse.Namespace) -> int:
    curve = curvemod.read_curve(args.curve)
    normalized = curvemod.normalize_curve(curve)
    prefix = Path(args.out)
    written = _write_curve_outputs(normalized, prefix, png=not args.no_png)
    manifest = build_manifest(
        command="normalize",
        config={"png": not args.no_png},
        input_paths=[args.curve],
        seed=0,
    )
    write_manifest(manifest, _manifest_path(prefix))
    print("wrote " + ", ".join(str(p) for p in written))
    return EXIT_OK


def cmd_peaks(args: argparse.Namespace) -> int:
    rows: list[dict[str, Any]] = []
    read_paths: list[str] = []
    for path in args.curves:
        try:
            curve = curvemod.read_curve(path)
            peak = curvemod.find_peak(curve)
        except (DecodewinError, OSError) as exc:
            print(f"error: {path}: {exc}", file=sys.stderr)
            continue
        meta = curve.meta
        rows.append(
            {
                "curve": str(path),
                "encoder_tag": meta.encoder_tag,
                "layer": meta.layer,
                "phone_subset": meta.phone_subset,
                "delay_ms": meta.delay_ms,
                "peak_time_ms": peak.peak_time_ms,
                "peak_value": peak.peak_value,
            }
        )
        read_paths.append(str(path))
    if not rows:
        print("error: no readable curves", file=sys.stderr)
        return EXIT_INPUT

    header = ("encoder_tag", "layer", "subset", "delay_ms", "peak_ms", "peak_value")
    table = [header]
    for r in rows:
        table.append(
            (
                r["encoder_tag"] or "-",
                "-" if r["layer"] is None else str(r["layer"]),
                r["phone_subset"],
                f"{r['delay_ms']:g}",
                f"{r['peak_time_ms']:g}",
                f"{r['peak_value']:.4f}",
            )
        )
    widths = [max(len(row[i]) for row in table) for i in range(len(header))]
    for row in table:
        print("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())

    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(
            json.dumps(rows, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        prefix = out.with_suffix("") if out.suffix == ".json" else out
        manifest = build_manifest(
            command="peaks", config={}, input_paths=read_paths, seed=0
        )
        write_manifest(manifest, _manifest_path(prefix))
        print(f"wrote {out}")
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    curve_a = curvemod.read_curve(args.a)
    curve_b = curvemod.read_curve(args.b)
    report = curvemod.compare_curves(curve_a, curve_b, theta=args.theta)
    prefix = Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    json_path = prefix.with_name(prefix.name + ".json")
    json_path.write_text(
        json.dumps(curvemod.comparison_to_json_dict(report), sort_keys=True, indent=2)
        + "\n",
        encoding="utf-8",
    )
    named = [
        (f"a: {_curve_label(curve_a.meta)}", curve_a),
        (f"b: {_curve_label(curve_b.meta)}", curve_b),
    ]
    svg_path = prefix.with_name(prefix.name + ".svg")
    emit_svg(named, svg_path)
    written = [json_path, svg_path]
    if not args.no_png:
        from .plotting import render_curves_png

        png_path = prefix.with_name(prefix.name + ".png")
        render_curves_png(named, png_path)
        written.append(png_path)
    manifest = build_manifest(
        command="compare",
        config={"theta": args.theta, "png": not args.no_png},
        input_paths=[args.a, args.b],
        seed=0,
    )
    write_manifest(manifest, _manifest_path(prefix))
    print(
        f"peak delta {report.peak_delta_ms:g} ms, onset delta "
        f"{report.onset_delta_ms:g} ms; wrote "
        + ", ".join(str(p) for p in written)
    )
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    targets: list[Path] = []
    for raw in args.paths:
        p = Path(raw)
        if p.is_dir():
            targets.extend(sorted(p.rglob("*.fdt")))
            targets.extend(sorted(p.rglob("*.tsv")))
        else:
            targets.append(p)
    if not targets:
        print("error: nothing to validate", file=sys.stderr)
        return EXIT_INPUT

    failures = 0
    for p in targets:
        try:
            if p.suffix == ".fdt":
                m = read_feature_file(p)
                print(
                    f"OK {p} ({m.frames}x{m.dim} @ {m.frame_rate_hz:g} Hz, "
                    f"tag={m.encoder_tag!r}, layer={m.layer})"
                )
            elif p.suffix == ".tsv":
                records = read_alignments(p)
                print(f"OK {p} ({len(records)} records)")
            else:
                raise FormatError(f"unknown file type {p.suffix!r}")
        except (DecodewinError, OSError) as exc:
            failures += 1
            print(f"FAIL {p}: {exc}")
    print(f"{len(targets) - failures}/{len(targets)} files valid")
    return EXIT_OK if failures == 0 else EXIT_INPUT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="decodewin",
        description=(
            "Measure when phone identity becomes linearly decodable from "
            "frame-level speech encoder features."
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser(
        "synth", help="generate a synthetic corpus with known phone timing"
    )
    p_synth.add_argument("--out", required=True, help="output directory")
    p_synth.add_argument(
        "--encoder",
        action="append",
        choices=list(synthlab.ENCODERS),
        help="encoder family to render (repeatable; default: both)",
    )
    p_synth.add_argument("--utterances", type=int, default=20)
    p_synth.add_argument("--utterance-s", type=float, default=10.0)
    p_synth.add_argument("--classes", type=int, default=10)
    p_synth.add_argument("--duration-min-ms", type=float, default=60.0)
    p_synth.add_argument("--duration-max-ms", type=float, default=200.0)
    p_synth.add_argument("--noise-sigma", type=float, default=0.0)
    p_synth.add_argument("--audio-delay-ms", type=float, default=0.0)
    p_synth.add_argument("--video-lead-ms", type=float, default=150.0)
    p_synth.add_argument("--smoothing-ms", type=float, default=None)
    p_synth.add_argument("--context-limit-ms", type=float, default=None)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.set_defaults(func=cmd_synth)

    p_curve = sub.add_parser(
        "curve", help="compute a decodability curve from features + alignments"
    )
    p_curve.add_argument("--features", required=True, help="directory of .fdt files")
    p_curve.add_argument("--alignments", required=True, help="alignment TSV")
    p_curve.add_argument("--out", required=True, help="output path prefix")
    p_curve.add_argument("--window-ms", type=float, default=1200.0)
    p_curve.add_argument("--folds", type=int, default=3)
    p_curve.add_argument(
        "--sample-fraction",
        type=parse_fraction,
        default=1.0 / 15.0,
        help="instance fraction to keep, e.g. 1/15 (default) or 0.5",
    )
    p_curve.add_argument("--batches", type=int, default=20)
    p_curve.add_argument(
        "--phone-subset",
        default="all",
        help="'all', 'plosive', or comma-separated labels",
    )
    p_curve.add_argument("--seed", type=int, default=0)
    p_curve.add_argument("--l2", type=float, default=1.0)
    p_curve.add_argument("--max-iterations", type=int, default=500)
    p_curve.add_argument("--grad-tolerance", type=float, default=1e-4)
    p_curve.add_argument(
        "--min-samples",
        type=int,
        default=None,
        help="per-offset sample floor (default: 10 * n_classes)",
    )
    p_curve.add_argument(
        "--delay-ms",
        type=float,
        default=0.0,
        help="recorded in metadata: known audio delay of these features",
    )
    p_curve.add_argument(
        "--threads",
        type=int,
        default=None,
        help="worker threads (default: $DECODEWIN_THREADS, else CPU count)",
    )
    p_curve.add_argument("--no-png", action="store_true")
    p_curve.set_defaults(func=cmd_curve)

    p_norm = sub.add_parser("normalize", help="scale a curve so its peak is 1.0")
    p_norm.add_argument("--curve", required=True, help="curve .json or .csv")
    p_norm.add_argument("--out", required=True, help="output path prefix")
    p_norm.add_argument("--no-png", action="store_true")
    p_norm.set_defaults(func=cmd_normalize)

    p_peaks = sub.add_parser("peaks", help="tabulate curve peaks")
    p_peaks.add_argument("curves", nargs="+", help="curve .json/.csv files")
    p_peaks.add_argument("--out", default=None, help="also write the table as JSON")
    p_peaks.set_defaults(func=cmd_peaks)

    p_cmp = sub.add_parser("compare", help="compare two curves (a minus b)")
    p_cmp.add_argument("--a", required=True, help="curve .json or .csv")
    p_cmp.add_argument("--b", required=True, help="curve .json or .csv")
    p_cmp.add_argument("--theta", type=float, default=0.5)
    p_cmp.add_argument("--out", required=True, help="output path prefix")
    p_cmp.add_argument("--no-png", action="store_true")
    p_cmp.set_defaults(func=cmd_compare)

    p_val = sub.add_parser("validate", help="check feature/alignment files")
    p_val.add_argument("paths", nargs="+", help=".fdt/.tsv files or directories")
    p_val.set_defaults(func=cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ComputationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTATION
    except (DecodewinError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
