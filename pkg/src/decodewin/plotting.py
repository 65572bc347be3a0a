"""Matplotlib figure rendering for report outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .curves import DecodabilityCurve
from .errors import ValidationError


def render_curves_png(
    named_curves: list[tuple[str, DecodabilityCurve]],
    path: str | Path,
    title: str = "",
) -> None:
    """Plot curves against offset with a dashed rule at the onset."""
    if not named_curves:
        raise ValidationError("need at least one curve to plot")
    fig, ax = plt.subplots(figsize=(8.0, 4.8), dpi=120)
    try:
        for label, curve in named_curves:
            xs = curve.offsets_ms
            ys = [float("nan") if a is None else a for a in curve.accuracies]
            ax.plot(xs, ys, linewidth=1.8, label=label)
        ax.axvline(0.0, color="#888888", linewidth=1.0, linestyle="--")
        ax.set_xlabel("offset (ms)")
        ax.set_ylabel("accuracy")
        ax.set_ylim(0.0, 1.05)
        ax.grid(True, alpha=0.3)
        if title:
            ax.set_title(title)
        ax.legend(loc="best", fontsize=9)
        fig.tight_layout()
        fig.savefig(path)
    finally:
        plt.close(fig)
