"""Multi-label and top-k metrics, rare/non-rare aggregation, 2D/3D late fusion."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from verbspace.errors import DimensionMismatch, EmptyInput, NoPositives, SplitOverlap
from verbspace.harmonize import POS, UNKNOWN


def ranking(scores: Sequence[float]) -> np.ndarray:
    """Indices by score descending; equal scores keep ascending index order."""
    return np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")


def average_precision(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Mean precision at each positive of the score-descending ranking."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise DimensionMismatch(f"{scores.shape} vs {labels.shape}")
    hits = labels[ranking(scores)] > 0
    npos = int(hits.sum())
    if npos == 0:
        raise NoPositives("average precision needs at least one positive")
    ranks = np.flatnonzero(hits) + 1
    precisions = [k / int(r) for k, r in enumerate(ranks, 1)]
    return math.fsum(precisions) / npos


@dataclass
class EvalReport:
    per_node_ap: dict[str, float]
    map_full: float | None
    map_rare: float | None
    map_nonrare: float | None
    skipped_nodes: list[str] = field(default_factory=list)
    rare: list[str] = field(default_factory=list)
    nonrare: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "map_full": self.map_full,
            "map_rare": self.map_rare,
            "map_nonrare": self.map_nonrare,
            "per_node": dict(sorted(self.per_node_ap.items())),
            "skipped_nodes": sorted(self.skipped_nodes),
            "n_rare": len(self.rare),
            "n_nonrare": len(self.nonrare),
        }

    def to_json(self) -> bytes:
        return (json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n").encode("utf-8")


def _mean(values: list[float]) -> float | None:
    return math.fsum(values) / len(values) if values else None


def map_by_split(
    per_node: Mapping[str, tuple[Sequence[float], Sequence[int]]],
    rare: Iterable[str],
    nonrare: Iterable[str],
) -> EvalReport:
    """AP per node and means over the rare split, the non-rare split and both.

    ``per_node`` maps node id -> (scores, binary labels). Nodes without any
    positive are skipped and listed in the report.
    """
    rare, nonrare = set(rare), set(nonrare)
    if rare & nonrare:
        raise SplitOverlap(sorted(rare & nonrare))
    aps, skipped = {}, []
    for node in sorted(rare | nonrare):
        scores, labels = per_node[node]
        try:
            aps[node] = average_precision(scores, labels)
        except NoPositives:
            skipped.append(node)
    r = [aps[n] for n in sorted(rare) if n in aps]
    nr = [aps[n] for n in sorted(nonrare) if n in aps]
    return EvalReport(aps, _mean(r + nr), _mean(r), _mean(nr), skipped, sorted(rare), sorted(nonrare))


def node_columns(
    scores: np.ndarray,
    values: np.ndarray,
    order: Sequence[str],
    nodes: Iterable[str],
    unknown_policy: str = "negative",
) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Per-node (scores, labels) columns from score and label matrices.

    ``unknown_policy`` is ``"negative"`` (unknown counts as 0) or
    ``"exclude"`` (unknown samples are dropped for that node).
    """
    if unknown_policy not in ("negative", "exclude"):
        raise ValueError(f"unknown_policy must be 'negative' or 'exclude', got {unknown_policy!r}")
    index = {n: k for k, n in enumerate(order)}
    out = {}
    for node in nodes:
        k = index[node]
        col, lab = scores[:, k], values[:, k]
        if unknown_policy == "exclude":
            keep = lab != UNKNOWN
            col, lab = col[keep], lab[keep]
        out[node] = (col, (lab == POS).astype(np.int64))
    return out


def topk_accuracy(score_rows: np.ndarray, labels: Sequence[int], k: int) -> float:
    score_rows = np.asarray(score_rows, dtype=np.float64)
    labels = np.asarray(labels)
    if score_rows.size == 0 or len(labels) == 0:
        raise EmptyInput("no rows")
    if k < 1:
        raise ValueError("k must be >= 1")
    if score_rows.ndim != 2 or score_rows.shape[0] != len(labels):
        raise DimensionMismatch(f"{score_rows.shape} rows for {len(labels)} labels")
    top = np.argsort(-score_rows, axis=1, kind="stable")[:, :k]
    return float(np.mean([lab in row for row, lab in zip(top, labels)]))


def fuse_scores(logits_2d: Sequence[float], logits_3d: Sequence[Sequence[float]]) -> np.ndarray:
    """Max-pool the per-human 3D logits, then average with the 2D logits."""
    base = np.asarray(logits_2d, dtype=np.float64)
    if len(logits_3d) == 0:
        return base.copy()
    humans = np.asarray(logits_3d, dtype=np.float64)
    if humans.ndim != 2 or humans.shape[1] != base.shape[0]:
        raise DimensionMismatch(f"2D {base.shape} vs 3D {humans.shape}")
    return (base + humans.max(axis=0)) / 2.0
