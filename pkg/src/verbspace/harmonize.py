"""Dataset class vocabularies -> verb nodes, and annotations -> partial labels.

Label vectors use ``POS = 1``, ``NEG = 0`` and ``UNKNOWN = -1`` over the
taxonomy's canonical node order. A dataset is exhaustive only over its own
node range (the union of its accepted class mappings): nodes in range that
are not positive are negative, everything else is unknown.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from verbspace import fileio
from verbspace import taxonomy as tx
from verbspace.errors import (
    ClosureConflict,
    EmptyText,
    MalformedManifest,
    NoInstances,
    NonPositiveDuration,
    PendingVerdicts,
    UnmappedClass,
)
from verbspace.nodetext import featurize

POS, NEG, UNKNOWN = 1, 0, -1
MODALITIES = ("image", "video-clip", "frame", "mocap")
STATUSES = ("suggested", "pending", "accepted", "rejected")
VERDICTS = ("accept", "reject")
VOTES_REQUIRED = 3


@dataclass(frozen=True, eq=False)
class PartialLabel:
    sample_id: str
    values: np.ndarray  # int8, one entry per node
    soft: np.ndarray | None = None  # float, NaN outside UNKNOWN entries
    timestamp: float | None = None

    def __post_init__(self):
        if self.soft is not None:
            known = self.values != UNKNOWN
            if np.any(~np.isnan(self.soft[known])):
                raise ValueError(f"{self.sample_id}: soft values set on observed entries")

    def pos(self, order: Sequence[str]) -> list[str]:
        return [order[k] for k in np.flatnonzero(self.values == POS)]

    def neg(self, order: Sequence[str]) -> list[str]:
        return [order[k] for k in np.flatnonzero(self.values == NEG)]


# ---------------------------------------------------------------------------
# class -> node mapping


@dataclass
class Candidate:
    node_id: str
    similarity: float
    verdicts: list[tuple[str, str]] = field(default_factory=list)
    status: str = "suggested"


@dataclass
class ClassNodeMapping:
    dataset: str
    class_label: str
    candidates: list[Candidate] = field(default_factory=list)

    @property
    def status(self) -> str:
        states = {c.status for c in self.candidates}
        if "accepted" in states:
            return "accepted"
        if "pending" in states:
            return "pending"
        if states == {"rejected"}:
            return "rejected"
        return "suggested"

    @property
    def accepted_nodes(self) -> list[str]:
        return [c.node_id for c in self.candidates if c.status == "accepted"]


def candidate_nodes(
    query: str | np.ndarray,
    node_features: Mapping[str, np.ndarray],
    top_k: int,
    min_sim: float = 0.0,
    featurizer: Callable[[str], np.ndarray] | None = None,
) -> list[tuple[str, float]]:
    """Rank nodes by cosine similarity to a class text (or its vector).

    Results are sorted by similarity descending, ties by node id, and cut to
    ``top_k`` entries with similarity ``>= min_sim``.
    """
    if top_k < 0 or not 0.0 <= min_sim <= 1.0:
        raise ValueError("top_k must be >= 0 and min_sim in [0, 1]")
    if not node_features:
        raise ValueError("no node features given")
    if isinstance(query, str):
        if featurizer is None:
            dim = len(next(iter(node_features.values())))
            featurizer = lambda text: featurize(text, dim)  # noqa: E731
        q = featurizer(query)
    else:
        q = np.asarray(query, dtype=np.float64)
    qn = np.linalg.norm(q)
    if qn == 0:
        raise EmptyText("query vector is zero")
    scored = []
    for node_id, vec in node_features.items():
        vec = np.asarray(vec, dtype=np.float64)
        vn = np.linalg.norm(vec)
        sim = float(q @ vec / (qn * vn)) if vn > 0 else 0.0
        if sim >= min_sim:
            scored.append((node_id, sim))
    scored.sort(key=lambda kv: (-kv[1], kv[0]))
    return scored[:top_k]


def apply_suggestions(candidates: Sequence[tuple[str, float]], suggested: Iterable[str]) -> list[tuple[str, float]]:
    """Keep only the candidates an external suggestion source also proposed."""
    keep = set(suggested)
    return [c for c in candidates if c[0] in keep]


def finalize_verdicts(verdicts: Sequence[str | tuple[str, str]]) -> str:
    """Majority of three annotations; order of verdicts is irrelevant."""
    votes = [v[1] if isinstance(v, tuple) else v for v in verdicts]
    if len(votes) < VOTES_REQUIRED:
        raise PendingVerdicts(f"{len(votes)} of {VOTES_REQUIRED} verdicts")
    if len(votes) > VOTES_REQUIRED:
        raise ValueError(f"expected {VOTES_REQUIRED} verdicts, got {len(votes)}")
    bad = set(votes) - set(VERDICTS)
    if bad:
        raise ValueError(f"unknown verdicts {sorted(bad)}")
    return "accepted" if votes.count("accept") >= 2 else "rejected"


def finalize_mapping(mapping: ClassNodeMapping) -> ClassNodeMapping:
    return replace(
        mapping,
        candidates=[replace(c, status=finalize_verdicts(c.verdicts)) for c in mapping.candidates],
    )


def mapping_to_record(m: ClassNodeMapping) -> dict:
    return {
        "dataset": m.dataset,
        "class_label": m.class_label,
        "candidates": [
            {"node": c.node_id, "similarity": c.similarity, "status": c.status,
             "verdicts": [list(v) for v in c.verdicts]}
            for c in m.candidates
        ],
    }


def mapping_from_record(rec: dict) -> ClassNodeMapping:
    try:
        cands = [
            Candidate(c["node"], float(c.get("similarity", 1.0)),
                      [tuple(v) for v in c.get("verdicts", [])], c["status"])
            for c in rec["candidates"]
        ]
        m = ClassNodeMapping(rec["dataset"], rec["class_label"], cands)
    except (KeyError, TypeError) as exc:
        raise MalformedManifest(f"bad mapping record: {exc}") from exc
    for c in cands:
        if c.status not in STATUSES:
            raise MalformedManifest(f"{m.class_label}: unknown status {c.status!r}")
    return m


def load_mappings(path) -> list[ClassNodeMapping]:
    return [mapping_from_record(rec) for _, rec in fileio.iter_jsonl(path)]


def accepted_table(mappings: Iterable[ClassNodeMapping]) -> dict[str, dict[str, list[str]]]:
    """dataset -> class label -> accepted node ids."""
    table: dict[str, dict[str, list[str]]] = {}
    for m in mappings:
        table.setdefault(m.dataset, {})[m.class_label] = m.accepted_nodes
    return table


def node_range(accepted: Mapping[str, Sequence[str]]) -> set[str]:
    return {n for nodes in accepted.values() for n in nodes}


# ---------------------------------------------------------------------------
# label translation


def translate_labels(
    sample_id: str,
    classes: Iterable[str],
    accepted: Mapping[str, Sequence[str]],
    node_range: Iterable[str],
    tax: tx.Taxonomy,
    allow_unmapped: bool = False,
) -> PartialLabel:
    values = np.full(tax.N, UNKNOWN, dtype=np.int8)
    for n in node_range:
        values[tax.index(n)] = NEG
    for cls in classes:
        nodes = accepted.get(cls)
        if not nodes:
            if allow_unmapped:
                continue
            raise UnmappedClass(cls)
        for n in nodes:
            values[tax.index(n)] = POS
    return PartialLabel(sample_id, values)


def ancestor_closure(label: PartialLabel, tax: tx.Taxonomy) -> PartialLabel:
    """Mark every ancestor of a positive node positive."""
    values = label.values.copy()
    for k in np.flatnonzero(label.values == POS):
        for a in tx.ancestors(tax, tax.order[k]):
            j = tax.index(a)
            if values[j] == NEG:
                raise ClosureConflict(f"{label.sample_id}: {a} is negative but {tax.order[k]} is positive")
            values[j] = POS
    soft = None
    if label.soft is not None:
        soft = np.where(values == UNKNOWN, label.soft, np.nan)
    return replace(label, values=values, soft=soft)


def frame_count(duration: float, fps: float) -> int:
    """round-half-up(duration * fps), at least 1."""
    return max(1, math.floor(duration * fps + 0.5))


def expand_clip_labels(sample_id: str, classes: Iterable[str], duration: float, fps: float = 3.0) -> list[tuple[str, float, frozenset[str]]]:
    """Frame records ``(frame_id, timestamp, classes)`` for a clip-labelled video."""
    if not duration > 0:
        raise NonPositiveDuration(f"{sample_id}: duration {duration}")
    classes = frozenset(classes)
    return [(f"{sample_id}/{k}", k / fps, classes) for k in range(frame_count(duration, fps))]


def merge_instance_labels(instances: Sequence[Iterable[str]]) -> frozenset[str]:
    if not instances:
        raise NoInstances("at least one instance label set is required")
    return frozenset().union(*map(frozenset, instances))


# ---------------------------------------------------------------------------
# manifests


@dataclass(frozen=True)
class ManifestSample:
    sample_id: str
    dataset: str
    modality: str
    classes: frozenset[str]
    duration: float | None = None
    instances: tuple[frozenset[str], ...] | None = None


_SAMPLE_KEYS = {"sample_id", "dataset", "modality", "classes", "duration", "instances"}


def sample_from_record(rec, where: str = "record") -> ManifestSample:
    if not isinstance(rec, dict):
        raise MalformedManifest(f"{where}: expected an object")
    extra = set(rec) - _SAMPLE_KEYS
    missing = {"sample_id", "dataset", "modality", "classes"} - set(rec)
    if extra or missing:
        raise MalformedManifest(f"{where}: unknown keys {sorted(extra)}, missing {sorted(missing)}")
    if rec["modality"] not in MODALITIES:
        raise MalformedManifest(f"{where}: unknown modality {rec['modality']!r}")
    if not isinstance(rec["classes"], list):
        raise MalformedManifest(f"{where}: 'classes' must be a list")
    duration = rec.get("duration")
    if rec["modality"] == "video-clip" and duration is None:
        raise MalformedManifest(f"{where}: video-clip needs a duration")
    instances = rec.get("instances")
    return ManifestSample(
        sample_id=str(rec["sample_id"]),
        dataset=str(rec["dataset"]),
        modality=rec["modality"],
        classes=frozenset(rec["classes"]),
        duration=None if duration is None else float(duration),
        instances=None if instances is None else tuple(frozenset(i) for i in instances),
    )


def load_manifest(path) -> list[ManifestSample]:
    try:
        return [sample_from_record(rec, f"line {n}") for n, rec in fileio.iter_jsonl(path)]
    except ValueError as exc:
        if isinstance(exc, MalformedManifest):
            raise
        raise MalformedManifest(str(exc)) from exc


def ingest(
    samples: Iterable[ManifestSample],
    mappings: Iterable[ClassNodeMapping],
    tax: tx.Taxonomy,
    fps: float = 3.0,
    allow_unmapped: bool = False,
    closure: bool = False,
) -> list[PartialLabel]:
    """One partial label per image/frame: clips are expanded to frames and
    instance label sets are merged into the image label."""
    table = accepted_table(mappings)
    ranges = {ds: node_range(acc) for ds, acc in table.items()}
    out = []
    for s in samples:
        accepted = table.get(s.dataset, {})
        classes = set(s.classes)
        if s.instances:
            classes |= merge_instance_labels(s.instances)
        if s.modality == "video-clip":
            units = [(fid, ts) for fid, ts, _ in expand_clip_labels(s.sample_id, classes, s.duration, fps)]
        else:
            units = [(s.sample_id, None)]
        for uid, ts in units:
            label = translate_labels(uid, sorted(classes), accepted, ranges.get(s.dataset, ()), tax, allow_unmapped)
            if closure:
                label = ancestor_closure(label, tax)
            out.append(replace(label, timestamp=ts))
    return out


def label_to_record(label: PartialLabel, order: Sequence[str]) -> dict:
    rec = {"sample_id": label.sample_id, "pos": label.pos(order), "neg": label.neg(order)}
    if label.timestamp is not None:
        rec["timestamp"] = label.timestamp
    if label.soft is not None:
        rec["soft"] = {order[k]: float(label.soft[k]) for k in np.flatnonzero(~np.isnan(label.soft))}
    return rec


def label_from_record(rec: dict, tax: tx.Taxonomy) -> PartialLabel:
    try:
        values = np.full(tax.N, UNKNOWN, dtype=np.int8)
        for n in rec["neg"]:
            values[tax.index(n)] = NEG
        for n in rec["pos"]:
            if values[tax.index(n)] == NEG:
                raise MalformedManifest(f"{rec['sample_id']}: {n} both positive and negative")
            values[tax.index(n)] = POS
        soft = None
        if "soft" in rec:
            soft = np.full(tax.N, np.nan)
            for n, v in rec["soft"].items():
                soft[tax.index(n)] = float(v)
        return PartialLabel(str(rec["sample_id"]), values, soft, rec.get("timestamp"))
    except (KeyError, TypeError) as exc:
        if isinstance(exc, tx.UnknownNode):
            raise
        raise MalformedManifest(f"bad label record: {exc}") from exc


def load_labels(path, tax: tx.Taxonomy) -> list[PartialLabel]:
    return [label_from_record(rec, tax) for _, rec in fileio.iter_jsonl(path)]


def write_labels(path, labels: Iterable[PartialLabel], order: Sequence[str]) -> None:
    fileio.atomic_write(path, fileio.dump_jsonl(label_to_record(lab, order) for lab in labels))
