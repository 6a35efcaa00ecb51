"""Action head on top of frozen node probabilities.

A single affine layer ``S_act = S_node @ W + b`` trained with full-batch
gradient descent on softmax cross-entropy. The node model is never touched;
the head only sees its output rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from verbspace.errors import DimensionMismatch, LabelOutOfRange


@dataclass(frozen=True)
class TransferHead:
    W: np.ndarray  # (N, A)
    b: np.ndarray  # (A,)

    @property
    def num_actions(self) -> int:
        return self.b.shape[0]


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def fit_transfer_head(S_node, labels, A: int, steps: int = 500, lr: float = 1.0, weight_decay: float = 0.0) -> TransferHead:
    """Fit ``W, b`` from zero initialization; deterministic for given inputs."""
    S = np.asarray(S_node, dtype=np.float64)
    y = np.asarray(labels)
    if S.ndim != 2 or y.shape != (S.shape[0],):
        raise DimensionMismatch(f"need (R, N) scores and R labels, got {S.shape} and {y.shape}")
    if A < 1:
        raise LabelOutOfRange("need at least one action")
    if y.size and (y.min() < 0 or y.max() >= A or not np.issubdtype(y.dtype, np.integer)):
        raise LabelOutOfRange(f"action labels must be integers in [0, {A})")
    R, N = S.shape
    W = np.zeros((N, A))
    b = np.zeros(A)
    if R == 0:
        return TransferHead(W, b)
    onehot = np.zeros((R, A))
    onehot[np.arange(R), y] = 1.0
    for _ in range(steps):
        grad = (_softmax(S @ W + b) - onehot) / R
        W -= lr * (S.T @ grad + weight_decay * W)
        b -= lr * grad.sum(axis=0)
    return TransferHead(W, b)


def predict_actions(S_node, head: TransferHead) -> np.ndarray:
    """Action probabilities (R, A)."""
    S = np.atleast_2d(np.asarray(S_node, dtype=np.float64))
    if S.shape[1] != head.W.shape[0]:
        raise DimensionMismatch(f"scores have {S.shape[1]} nodes, head expects {head.W.shape[0]}")
    return _softmax(S @ head.W + head.b)
