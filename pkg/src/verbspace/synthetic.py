"""Synthetic taxonomies, Gaussian cluster features and label corruption.

Used by the test-suite and the CLI demo; every generator is a deterministic
function of its seed.
"""

from __future__ import annotations

import numpy as np

from verbspace import rng
from verbspace import taxonomy as tx
from verbspace.harmonize import NEG, POS, UNKNOWN

SEPARATION = 6.0  # cluster-mean norm of the default benchmark
_GLOSSES = ["contact", "putting", "removing", "motion", "perception", "creation", "change", "communication"]
_LEMMAS = [
    "hold", "hug", "grip", "clasp", "place", "insert", "install", "stack", "wipe", "banish",
    "erase", "scrape", "walk", "run", "jog", "crawl", "see", "hear", "watch", "notice",
    "build", "carve", "paint", "forge", "bend", "fold", "melt", "break", "tell", "shout",
    "whisper", "sing",
]


def tree_taxonomy(branching: tuple[int, ...] = (3, 4), members_per_leaf: int = 2) -> tx.Taxonomy:
    """Balanced tree below ``root``; level-1 nodes carry glosses, leaves carry members.

    ``(3, 4)`` gives 3 classes with 4 leaves each (N = 16, 12 leaves);
    ``(3, 3)`` gives the 13-node three-level tree.
    """
    nodes = []
    frontier = [("root", "")]
    lemma_iter = iter(_LEMMAS * 8)
    for depth, width in enumerate(branching):
        nxt = []
        for parent, prefix in frontier:
            for k in range(1, width + 1):
                num = f"{prefix}.{k}" if prefix else str(len(nxt) + 1)
                if depth == 0:
                    node = tx.VerbNode(num, parent, gloss=_GLOSSES[(len(nxt)) % len(_GLOSSES)])
                else:
                    leafy = depth == len(branching) - 1
                    root_num = num.split(".")[0]
                    node_id = f"{_GLOSSES[(int(root_num) - 1) % len(_GLOSSES)]}-{num}"
                    members = tuple(tx.Member(next(lemma_iter)) for _ in range(members_per_leaf)) if leafy else ()
                    examples = tuple(f"They {m.lemma} the object." for m in members)
                    node = tx.VerbNode(node_id, parent, members=members, examples=examples)
                nodes.append(node)
                nxt.append((node.id, num))
        frontier = nxt
    return tx.build_taxonomy(nodes)


def cluster_means(tax: tx.Taxonomy, d: int, separation: float, seed: int) -> dict[str, np.ndarray]:
    """One Gaussian mean per leaf with norm ``separation``."""
    g = rng.stream(seed, "synthetic/means")
    means = {}
    for leaf in sorted(tax.leaf_ids):
        m = g.standard_normal(d)
        means[leaf] = separation * m / np.linalg.norm(m)
    return means


def sample_dataset(
    tax: tx.Taxonomy,
    means: dict[str, np.ndarray],
    count: int,
    seed: int,
    positives: int = 1,
    noise: float = 1.0,
    closure: bool = True,
    stream_name: str = "synthetic/samples",
) -> tuple[np.ndarray, np.ndarray, list[list[str]]]:
    """Features (count, d), full label matrix (count, N) and positive leaves per sample.

    Each sample draws ``positives`` distinct leaves; its feature is the sum of
    their means plus isotropic noise. With ``closure`` the ancestors of each
    positive leaf are positive too.
    """
    g = rng.stream(seed, stream_name)
    leaves = sorted(tax.leaf_ids)
    d = len(next(iter(means.values())))
    X = np.empty((count, d))
    Y = np.full((count, tax.N), NEG, dtype=np.int8)
    chosen = []
    for s in range(count):
        pick = [leaves[k] for k in g.choice(len(leaves), size=positives, replace=False)]
        X[s] = sum(means[p] for p in pick) + noise * g.standard_normal(d)
        for p in pick:
            Y[s, tax.index(p)] = POS
            if closure:
                for a in tx.ancestors(tax, p):
                    Y[s, tax.index(a)] = POS
        chosen.append(pick)
    return X, Y, chosen


def remove_labels(values: np.ndarray, fraction: float, seed: int) -> np.ndarray:
    """Turn a random ``fraction`` of the entries into UNKNOWN."""
    g = rng.stream(seed, "synthetic/corruption")
    out = values.copy()
    out[g.random(values.shape) < fraction] = UNKNOWN
    return out
