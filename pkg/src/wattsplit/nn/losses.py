"""Training losses, each returning (scalar loss, gradient w.r.t. predictions)."""

from __future__ import annotations

import numpy as np

CE_EPSILON = 1e-7  # probability floor before taking logs


def softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def mse(predictions: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error over every element."""
    if predictions.shape != targets.shape:
        raise ValueError(f"shape mismatch: {predictions.shape} vs {targets.shape}")
    diff = predictions - targets
    loss = float(np.mean(diff.astype(np.float64) ** 2))
    grad = diff * diff.dtype.type(2.0 / diff.size)
    return loss, grad


def cross_entropy(probabilities: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Categorical cross-entropy on class probabilities (one-hot targets).

    Expects the network's softmax output; probabilities are floored at
    CE_EPSILON so a confident miss cannot produce an infinite loss or
    gradient. The gradient is w.r.t. the probabilities; chained through
    the Softmax layer's exact backward it reduces to (p - y) / B.
    """
    if probabilities.shape != targets.shape:
        raise ValueError(f"shape mismatch: {probabilities.shape} vs {targets.shape}")
    if probabilities.ndim != 2:
        raise ValueError(f"expected (B, classes), got {probabilities.shape}")
    batch = probabilities.shape[0]
    p = np.clip(probabilities, CE_EPSILON, 1.0)
    loss = float(-np.sum(targets.astype(np.float64) * np.log(p.astype(np.float64))) / batch)
    grad = np.where(targets > 0, -targets / p, p.dtype.type(0)) / p.dtype.type(batch)
    return loss, grad.astype(probabilities.dtype)


def one_hot(labels: np.ndarray, n_classes: int = 2, dtype=np.float32) -> np.ndarray:
    out = np.zeros((len(labels), n_classes), dtype=dtype)
    out[np.arange(len(labels)), np.asarray(labels, dtype=np.int64)] = 1
    return out


LOSS_FUNCTIONS = {
    "mse": mse,
    "cross_entropy": cross_entropy,
}
