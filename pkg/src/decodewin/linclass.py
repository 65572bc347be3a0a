"""Multinomial softmax regression trained from scratch with deterministic
full-batch gradient descent and backtracking line search."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError

_ARMIJO_C = 1e-4
_MIN_STEP = 1e-20
_MAX_STEP = 1e8


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer settings; the step rule is fixed (full-batch gradient
    descent with Armijo backtracking)."""

    l2_strength: float = 1.0
    max_iterations: int = 500
    grad_tolerance: float = 1e-4

    def __post_init__(self) -> None:
        if not (self.l2_strength >= 0) or not math.isfinite(self.l2_strength):
            raise ValidationError(
                f"l2_strength must be >= 0, got {self.l2_strength!r}"
            )
        if self.max_iterations < 1:
            raise ValidationError(
                f"max_iterations must be >= 1, got {self.max_iterations!r}"
            )
        if not (self.grad_tolerance > 0):
            raise ValidationError(
                f"grad_tolerance must be > 0, got {self.grad_tolerance!r}"
            )


@dataclass(frozen=True, eq=False)
class LinearClassifier:
    """Trained softmax regression: weights are (n_classes, dim + 1) with the
    bias in the last column, applied to standardized features."""

    weights: np.ndarray
    feature_mean: np.ndarray
    feature_scale: np.ndarray
    l2_strength: float
    converged: bool
    iterations_used: int

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1] - 1


def _with_bias(vectors: np.ndarray) -> np.ndarray:
    return np.hstack([vectors, np.ones((vectors.shape[0], 1))])


def loss_and_gradient(
    weights: np.ndarray,
    vectors: np.ndarray,
    class_ids: np.ndarray,
    l2_strength: float,
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy plus (l2/2)*||W_no_bias||^2 and its gradient.

    ``weights`` is (K, D+1) with bias last; ``vectors`` is used as given
    (no standardization here).
    """
    X1 = _with_bias(np.asarray(vectors, dtype=np.float64))
    y = np.asarray(class_ids, dtype=np.int64)
    return _loss_grad_prepared(weights, X1, y, l2_strength)


def _loss_only(
    weights: np.ndarray, X1: np.ndarray, y: np.ndarray, l2_strength: float
) -> float:
    logits = X1 @ weights.T
    shift = logits.max(axis=1, keepdims=True)
    z = np.exp(logits - shift).sum(axis=1)
    picked = logits[np.arange(X1.shape[0]), y]
    nll = -float((picked - shift[:, 0] - np.log(z)).mean())
    return nll + 0.5 * l2_strength * float((weights[:, :-1] ** 2).sum())


def _loss_grad_prepared(
    weights: np.ndarray, X1: np.ndarray, y: np.ndarray, l2_strength: float
) -> tuple[float, np.ndarray]:
    n = X1.shape[0]
    logits = X1 @ weights.T
    shift = logits.max(axis=1, keepdims=True)
    ex = np.exp(logits - shift)
    z = ex.sum(axis=1)
    log_probs = logits - shift - np.log(z)[:, None]
    nll = -float(log_probs[np.arange(n), y].mean())
    penalty = 0.5 * l2_strength * float((weights[:, :-1] ** 2).sum())
    resid = ex / z[:, None]
    resid[np.arange(n), y] -= 1.0
    grad = (resid.T @ X1) / n
    grad[:, :-1] += l2_strength * weights[:, :-1]
    return nll + penalty, grad


def _minimize(
    X1: np.ndarray, y: np.ndarray, n_classes: int, config: TrainConfig
) -> tuple[np.ndarray, bool, int, list[float]]:
    """Run gradient descent from zero weights; returns (weights, converged,
    steps_taken, per-iteration losses)."""
    weights = np.zeros((n_classes, X1.shape[1]), dtype=np.float64)
    converged = False
    steps = 0
    losses: list[float] = []
    step_size = 1.0
    for _ in range(config.max_iterations):
        loss, grad = _loss_grad_prepared(weights, X1, y, config.l2_strength)
        losses.append(loss)
        if np.abs(grad).max() <= config.grad_tolerance:
            converged = True
            break
        grad_sq = float((grad * grad).sum())
        t = step_size
        while t >= _MIN_STEP:
            candidate = weights - t * grad
            if (
                _loss_only(candidate, X1, y, config.l2_strength)
                <= loss - _ARMIJO_C * t * grad_sq
            ):
                break
            t *= 0.5
        if t < _MIN_STEP:
            break
        weights = weights - t * grad
        steps += 1
        step_size = min(t * 2.0, _MAX_STEP)
    else:
        losses.append(_loss_only(weights, X1, y, config.l2_strength))
    return weights, converged, steps, losses


def train_softmax(
    vectors: np.ndarray,
    class_ids: np.ndarray,
    n_classes: int,
    config: TrainConfig = TrainConfig(),
) -> LinearClassifier:
    """Fit a softmax regression on standardized features, deterministically."""
    X = np.asarray(vectors, dtype=np.float64)
    y = np.asarray(class_ids, dtype=np.int64)
    if X.ndim != 2:
        raise ValidationError(f"vectors must be 2-D, got shape {X.shape}")
    if y.shape != (X.shape[0],):
        raise ValidationError(
            f"class_ids shape {y.shape} does not match {X.shape[0]} vectors"
        )
    if X.shape[0] == 0:
        raise ValidationError("cannot train on an empty sample set")
    if not np.all(np.isfinite(X)):
        raise ValidationError("training vectors contain non-finite values")
    if n_classes < 2:
        raise ValidationError(f"n_classes must be >= 2, got {n_classes}")
    if y.min() < 0 or y.max() >= n_classes:
        raise ValidationError(
            f"class ids must lie in [0, {n_classes}), got range "
            f"[{y.min()}, {y.max()}]"
        )
    if len(np.unique(y)) < 2:
        raise ValidationError("training set has fewer than two distinct classes")

    mean = X.mean(axis=0)
    std = X.std(axis=0)
    scale = np.where(std == 0.0, 1.0, std)
    X1 = _with_bias((X - mean) / scale)
    weights, converged, steps, _ = _minimize(X1, y, n_classes, config)
    return LinearClassifier(
        weights=weights,
        feature_mean=mean,
        feature_scale=scale,
        l2_strength=config.l2_strength,
        converged=converged,
        iterations_used=steps,
    )


def _scores(clf: LinearClassifier, vectors: np.ndarray) -> np.ndarray:
    X = np.asarray(vectors, dtype=np.float64)
    squeeze = X.ndim == 1
    if squeeze:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != clf.dim:
        raise ValidationError(
            f"expected vectors of dim {clf.dim}, got shape {np.shape(vectors)}"
        )
    Z = (X - clf.feature_mean) / clf.feature_scale
    logits = _with_bias(Z) @ clf.weights.T
    return logits[0] if squeeze else logits


def predict(clf: LinearClassifier, vectors: np.ndarray) -> int | np.ndarray:
    """Class ids with the highest score; ties resolve to the lowest id."""
    logits = _scores(clf, vectors)
    if logits.ndim == 1:
        return int(np.argmax(logits))
    return np.argmax(logits, axis=1)


def accuracy(
    clf: LinearClassifier, vectors: np.ndarray, class_ids: np.ndarray
) -> float:
    """Fraction of correct predictions on a non-empty sample set."""
    y = np.asarray(class_ids, dtype=np.int64)
    if y.size == 0:
        raise ValidationError("cannot score an empty sample set")
    pred = predict(clf, np.asarray(vectors, dtype=np.float64))
    return float(np.mean(pred == y))


def gradient_check(
    vectors: np.ndarray,
    class_ids: np.ndarray,
    n_classes: int,
    l2_strength: float = 1.0,
    probe_count: int = 20,
    epsilon: float = 1e-5,
    seed: int = 0,
) -> float:
    """Max relative deviation between the analytic gradient and central
    finite differences at seeded random weight points."""
    X = np.asarray(vectors, dtype=np.float64)
    y = np.asarray(class_ids, dtype=np.int64)
    if probe_count < 1:
        raise ValidationError(f"probe_count must be >= 1, got {probe_count}")
    X1 = _with_bias(X)
    rng = np.random.default_rng(seed)
    n_coords = n_classes * X1.shape[1]
    worst = 0.0
    for _ in range(probe_count):
        weights = rng.normal(0.0, 0.5, size=(n_classes, X1.shape[1]))
        flat = int(rng.integers(n_coords))
        _, grad = loss_and_gradient(weights, X, y, l2_strength)
        analytic = float(grad.reshape(-1)[flat])
        bump = np.zeros_like(weights).reshape(-1)
        bump[flat] = epsilon
        bump = bump.reshape(weights.shape)
        hi = _loss_only(weights + bump, X1, y, l2_strength)
        lo = _loss_only(weights - bump, X1, y, l2_strength)
        numeric = (hi - lo) / (2.0 * epsilon)
        deviation = abs(analytic - numeric) / max(1.0, abs(analytic), abs(numeric))
        worst = max(worst, deviation)
    return worst


def save_classifier(clf: LinearClassifier, path: str | Path) -> None:
    """Write a classifier as JSON with exact float round-tripping."""
    doc = {
        "weights": [[float(v) for v in row] for row in clf.weights],
        "feature_mean": [float(v) for v in clf.feature_mean],
        "feature_scale": [float(v) for v in clf.feature_scale],
        "l2_strength": float(clf.l2_strength),
        "converged": bool(clf.converged),
        "iterations_used": int(clf.iterations_used),
    }
    Path(path).write_text(
        json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def load_classifier(path: str | Path) -> LinearClassifier:
    """Read a classifier written by :func:`save_classifier`."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        return LinearClassifier(
            weights=np.array(doc["weights"], dtype=np.float64),
            feature_mean=np.array(doc["feature_mean"], dtype=np.float64),
            feature_scale=np.array(doc["feature_scale"], dtype=np.float64),
            l2_strength=float(doc["l2_strength"]),
            converged=bool(doc["converged"]),
            iterations_used=int(doc["iterations_used"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: malformed classifier document: {exc}") from exc
