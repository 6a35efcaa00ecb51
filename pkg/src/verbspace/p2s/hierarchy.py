"""Free node embeddings trained on a taxonomy with the entailment objective.

Every parent's cone should contain its children; siblings and other
unrelated pairs are pushed at least ``separation`` apart so the tree does not
collapse onto a single ray.
"""

from __future__ import annotations

import itertools

import numpy as np
import torch

from verbspace import rng
from verbspace import taxonomy as tx
from verbspace.p2s import geometry as geo


def tree_pairs(tax: tx.Taxonomy) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    """(parent, child) index pairs and unordered pairs with no ancestor relation."""
    edges = [(tax.index(n.parent_id), tax.index(n.id)) for n in tax.nodes.values() if n.parent_id is not None]
    related = set()
    for i in tax.order:
        for a in tx.ancestors(tax, i):
            related.add(frozenset((tax.index(i), tax.index(a))))
    unrelated = [(a, b) for a, b in itertools.combinations(range(tax.N), 2) if frozenset((a, b)) not in related]
    return sorted(edges), unrelated


def embed_hierarchy(
    tax: tx.Taxonomy,
    n: int = 8,
    c: float = 1.0,
    K: float = 0.1,
    seed: int = 0,
    steps: int = 600,
    lr: float = 0.05,
    margin: float = 0.05,
    separation: float = 1.0,
) -> np.ndarray:
    """Space components (N, n) in ``tax.order`` after full-batch Adam."""
    edges, unrelated = tree_pairs(tax)
    init = 0.1 * rng.stream(seed, "hierarchy/init").standard_normal((tax.N, n))
    tangent = torch.tensor(init, requires_grad=True)
    par = torch.tensor([p for p, _ in edges])
    chi = torch.tensor([q for _, q in edges])
    ua = torch.tensor([a for a, _ in unrelated], dtype=torch.long)
    ub = torch.tensor([b for _, b in unrelated], dtype=torch.long)
    opt = torch.optim.Adam([tangent], lr=lr)
    for _ in range(steps):
        opt.zero_grad()
        x = geo.exp_map0(tangent, c)
        cone = torch.relu(geo.exterior_angle(x[par], x[chi], c) - geo.half_aperture(x[par], c, K) + margin)
        loss = cone.mean()
        if len(unrelated):
            loss = loss + torch.relu(separation - geo.distance(x[ua], x[ub], c)).mean()
        loss.backward()
        opt.step()
    with torch.no_grad():
        return geo.exp_map0(tangent, c).numpy()
