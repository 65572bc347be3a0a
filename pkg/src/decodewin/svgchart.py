"""Deterministic, dependency-free SVG line charts for decodability curves."""

from __future__ import annotations

from pathlib import Path

from .curves import DecodabilityCurve
from .errors import ValidationError

WIDTH = 800.0
HEIGHT = 480.0
MARGIN_LEFT = 64.0
MARGIN_RIGHT = 168.0
MARGIN_TOP = 24.0
MARGIN_BOTTOM = 56.0

COLORS = (
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#9467bd",
    "#ff7f0e",
    "#8c564b",
)

_Y_TICKS = (0.0, 0.25, 0.5, 0.75, 1.0)


def _escape(text: str) -> str:
    return (
        text.replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )


def _plot_area() -> tuple[float, float, float, float]:
    return (
        MARGIN_LEFT,
        MARGIN_TOP,
        WIDTH - MARGIN_RIGHT,
        HEIGHT - MARGIN_BOTTOM,
    )


def _runs(curve: DecodabilityCurve) -> list[list[tuple[float, float]]]:
    """Contiguous present-point runs; gaps in the data break the line."""
    runs: list[list[tuple[float, float]]] = []
    current: list[tuple[float, float]] = []
    for t, a in zip(curve.offsets_ms, curve.accuracies):
        if a is None:
            if current:
                runs.append(current)
                current = []
        else:
            current.append((t, a))
    if current:
        runs.append(current)
    return runs


def render_svg(named_curves: list[tuple[str, DecodabilityCurve]]) -> str:
    """Render curves on a fixed 800x480 canvas with a rule at 0 ms."""
    if not named_curves:
        raise ValidationError("need at least one curve to chart")
    x0, y0, x1, y1 = _plot_area()

    t_min = min(c.offsets_ms[0] for _, c in named_curves)
    t_max = max(c.offsets_ms[-1] for _, c in named_curves)
    if t_max == t_min:
        t_min, t_max = t_min - 1.0, t_max + 1.0

    def sx(t: float) -> float:
        return x0 + (t - t_min) / (t_max - t_min) * (x1 - x0)

    def sy(a: float) -> float:
        return y1 - a * (y1 - y0)

    parts: list[str] = []
    parts.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0f}" '
        f'height="{HEIGHT:.0f}" viewBox="0 0 {WIDTH:.0f} {HEIGHT:.0f}">'
    )
    parts.append(f'<rect width="{WIDTH:.0f}" height="{HEIGHT:.0f}" fill="#ffffff"/>')

    for tick in _Y_TICKS:
        y = sy(tick)
        parts.append(
            f'<line x1="{x0:.2f}" y1="{y:.2f}" x2="{x1:.2f}" y2="{y:.2f}" '
            f'stroke="#dddddd" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{x0 - 8:.2f}" y="{y + 4:.2f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="12">{tick:.2f}</text>'
        )
    n_x_ticks = 5
    for i in range(n_x_ticks):
        t = t_min + (t_max - t_min) * i / (n_x_ticks - 1)
        x = sx(t)
        parts.append(
            f'<line x1="{x:.2f}" y1="{y1:.2f}" x2="{x:.2f}" y2="{y1 + 5:.2f}" '
            f'stroke="#333333" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{x:.2f}" y="{y1 + 20:.2f}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12">{t:.0f}</text>'
        )

    if t_min < 0.0 < t_max:
        x = sx(0.0)
        parts.append(
            f'<line x1="{x:.2f}" y1="{y0:.2f}" x2="{x:.2f}" y2="{y1:.2f}" '
            f'stroke="#888888" stroke-width="1" stroke-dasharray="4 3"/>'
        )

    parts.append(
        f'<rect x="{x0:.2f}" y="{y0:.2f}" width="{x1 - x0:.2f}" '
        f'height="{y1 - y0:.2f}" fill="none" stroke="#333333" stroke-width="1"/>'
    )

    for i, (label, curve) in enumerate(named_curves):
        color = COLORS[i % len(COLORS)]
        for run in _runs(curve):
            if len(run) == 1:
                t, a = run[0]
                parts.append(
                    f'<circle cx="{sx(t):.2f}" cy="{sy(a):.2f}" r="2.5" '
                    f'fill="{color}"/>'
                )
            else:
                points = " ".join(f"{sx(t):.2f},{sy(a):.2f}" for t, a in run)
                parts.append(
                    f'<polyline points="{points}" fill="none" stroke="{color}" '
                    f'stroke-width="2"/>'
                )
        ly = y0 + 16.0 + 18.0 * i
        parts.append(
            f'<line x1="{x1 + 10:.2f}" y1="{ly:.2f}" x2="{x1 + 34:.2f}" '
            f'y2="{ly:.2f}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{x1 + 40:.2f}" y="{ly + 4:.2f}" font-family="sans-serif" '
            f'font-size="12">{_escape(label)}</text>'
        )

    parts.append(
        f'<text x="{(x0 + x1) / 2:.2f}" y="{HEIGHT - 16:.2f}" '
        f'text-anchor="middle" font-family="sans-serif" font-size="13">'
        f"offset (ms)</text>"
    )
    parts.append(
        f'<text x="18" y="{(y0 + y1) / 2:.2f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13" '
        f'transform="rotate(-90 18 {(y0 + y1) / 2:.2f})">accuracy</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_svg(
    named_curves: list[tuple[str, DecodabilityCurve]], path: str | Path
) -> None:
    Path(path).write_text(render_svg(named_curves), encoding="utf-8")
