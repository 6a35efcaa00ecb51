"""Node co-relation matrix and soft pseudo labels for unknown entries."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from verbspace import lorentz
from verbspace.errors import ShapeMismatch, ZeroVector
from verbspace.harmonize import POS, UNKNOWN, PartialLabel

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    C: np.ndarray
    C_L: np.ndarray
    C_E: np.ndarray


def language_corr(features: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarity of node text features."""
    features = np.asarray(features, dtype=np.float64)
    norms = np.linalg.norm(features, axis=1)
    if np.any(norms == 0):
        raise ZeroVector(f"rows {np.flatnonzero(norms == 0).tolist()} are zero")
    unit = features / norms[:, None]
    C = unit @ unit.T
    C = (C + C.T) / 2.0
    np.fill_diagonal(C, 1.0)
    return C


def embedding_corr(space: np.ndarray, c: float) -> np.ndarray:
    """Negative Lorentz distance between node embeddings (space components)."""
    return -lorentz.pairwise_distance(space, c)


def minmax_offdiag(M: np.ndarray) -> np.ndarray:
    """Min-max scale to [0, 1] using the range of the off-diagonal entries.

    The diagonal is set to 1. A constant off-diagonal yields all-zero
    off-diagonal entries and a warning.
    """
    n = M.shape[0]
    off = ~np.eye(n, dtype=bool)
    out = np.ones_like(M, dtype=np.float64)
    if n < 2:
        return out
    lo, hi = M[off].min(), M[off].max()
    if hi - lo == 0:
        log.warning("co-relation component has a constant off-diagonal; normalizing to zero")
        out[off] = 0.0
        return out
    out[off] = np.clip((M[off] - lo) / (hi - lo), 0.0, 1.0)
    return out


def combine_corr(C_L: np.ndarray, C_E: np.ndarray) -> CorrelationMatrix:
    C_L = np.asarray(C_L, dtype=np.float64)
    C_E = np.asarray(C_E, dtype=np.float64)
    if C_L.shape != C_E.shape or C_L.ndim != 2 or C_L.shape[0] != C_L.shape[1]:
        raise ShapeMismatch(f"{C_L.shape} vs {C_E.shape}")
    C = (minmax_offdiag(C_L) + minmax_offdiag(C_E)) / 2.0
    return CorrelationMatrix(C, C_L, C_E)


def correlation(features: np.ndarray, space: np.ndarray, c: float) -> CorrelationMatrix:
    return combine_corr(language_corr(features), embedding_corr(space, c))


def pseudo_labels(values: np.ndarray, C: np.ndarray, hard_threshold: float | None = None) -> np.ndarray:
    """Soft values for UNKNOWN entries: sum of ``C[i, j]`` over positives j != i,
    clamped to [0, 1]. Observed entries come back as NaN.

    Sums run in ascending j. With ``hard_threshold`` the values become
    ``1.0`` where ``>= threshold`` and ``0.0`` elsewhere.
    """
    values = np.asarray(values)
    pos = np.flatnonzero(values == POS)
    unk = np.flatnonzero(values == UNKNOWN)
    soft = np.full(values.shape[0], np.nan)
    if len(unk):
        if len(pos):
            # cumsum accumulates strictly left to right; unknown i is never in pos
            total = np.cumsum(np.asarray(C, dtype=np.float64)[np.ix_(unk, pos)], axis=1)[:, -1]
        else:
            total = np.zeros(len(unk))
        soft[unk] = np.clip(total, 0.0, 1.0)
    if hard_threshold is not None:
        unk = ~np.isnan(soft)
        soft[unk] = (soft[unk] >= hard_threshold).astype(np.float64)
    return soft


def augment_labels(labels: Sequence[PartialLabel], C: np.ndarray, hard_threshold: float | None = None) -> list[PartialLabel]:
    return [replace(lab, soft=pseudo_labels(lab.values, C, hard_threshold)) for lab in labels]
