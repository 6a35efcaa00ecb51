"""Node text generation, TextRank summarization and deterministic featurization."""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from verbspace import taxonomy as tx
from verbspace.errors import EmptyInput, EmptyText

DAMPING = 0.85
WINDOW = 4
MAX_ITER = 1000
TOL = 1e-12
TOKEN_BUDGET = 77

_SPLIT = re.compile(r"[^0-9a-z]+")
_SENTENCE_END = re.compile(r"(?<=[.!?])\s+")


def tokenize(text: str) -> list[str]:
    """Lowercase, split on non-alphanumerics, drop tokens shorter than 2."""
    return [t for t in _SPLIT.split(text.lower()) if len(t) >= 2]


def split_sentences(text: str) -> list[str]:
    return [s for s in (p.strip() for p in _SENTENCE_END.split(text.strip())) if s]


# ---------------------------------------------------------------------------
# prompts and descriptions


def _join_english(items: Sequence[str]) -> str:
    if not items:
        return "none"
    if len(items) == 1:
        return items[0]
    if len(items) == 2:
        return f"{items[0]} and {items[1]}"
    return ", ".join(items[:-1]) + ", and " + items[-1]


def _labelled(tax: tx.Taxonomy, ids: Iterable[str]) -> list[str]:
    out = []
    for i in ids:
        gloss = tax.nodes[i].gloss
        out.append(f"{i}: {gloss}" if gloss else i)
    return out


def geometric_prompt(tax: tx.Taxonomy, node_id: str) -> str:
    """Hierarchy prompt, e.g. ``The node is touch-20-1. Its ancestors are
    touch-20, 20: contact, and root. Its descendants are none.``

    Descendants are listed in preorder with children in id order.
    """
    anc = _labelled(tax, tx.ancestors(tax, node_id))
    desc = _labelled(tax, tx.descendants_preorder(tax, node_id))
    return (
        f"The node is {node_id}. Its ancestors are {_join_english(anc)}. "
        f"Its descendants are {_join_english(desc)}."
    )


def _sentences(items: Iterable[str]) -> str:
    parts = []
    for s in items:
        s = s.strip()
        if not s:
            continue
        parts.append(s if s[-1] in ".!?" else s + ".")
    return " ".join(parts)


def semantic_description(node: tx.VerbNode) -> str:
    if not node.members and not node.examples and not node.definitions:
        return "Verbs: none."
    sections = []
    if node.members:
        sections.append("Verbs: " + ", ".join(node.lemmas) + ".")
    if node.examples:
        sections.append("Examples: " + _sentences(node.examples))
    if node.definitions:
        sections.append("Definitions: " + _sentences(node.definitions))
    return " ".join(sections)


# ---------------------------------------------------------------------------
# TextRank


def cooccurrence_graph(tokens: Sequence[str], window: int) -> tuple[list[str], list[set[int]]]:
    """Vertices in first-occurrence order and undirected unweighted adjacency."""
    vocab: dict[str, int] = {}
    for t in tokens:
        vocab.setdefault(t, len(vocab))
    adj: list[set[int]] = [set() for _ in vocab]
    ids = [vocab[t] for t in tokens]
    for i, a in enumerate(ids):
        for b in ids[i + 1 : i + window]:
            if a != b:
                adj[a].add(b)
                adj[b].add(a)
    return list(vocab), adj


def textrank_scores(
    tokens: Sequence[str],
    window: int = WINDOW,
    damping: float = DAMPING,
    max_iter: int = MAX_ITER,
    tol: float = TOL,
) -> dict[str, float]:
    if not tokens:
        raise EmptyInput("textrank needs at least one token")
    if window < 1:
        raise ValueError("window must be >= 1")
    vocab, adj = cooccurrence_graph(tokens, window)
    nbrs = [sorted(a) for a in adj]
    inv_deg = np.array([1.0 / len(a) if a else 0.0 for a in nbrs])
    score = np.ones(len(vocab))
    for _ in range(max_iter):
        share = score * inv_deg
        new = np.array([(1.0 - damping) + damping * sum(share[u] for u in a) for a in nbrs])
        delta = np.max(np.abs(new - score))
        score = new
        if delta < tol:
            break
    return {t: float(s) for t, s in zip(vocab, score)}


def textrank_keywords(
    tokens: Sequence[str], window: int = WINDOW, k: int | None = None, damping: float = DAMPING
) -> list[tuple[str, float]]:
    """Top-k (token, score) pairs; ties keep first-occurrence order."""
    scores = textrank_scores(tokens, window=window, damping=damping)
    ranked = sorted(scores.items(), key=lambda kv: -kv[1])  # stable: dict keeps first occurrence
    return ranked if k is None else ranked[:k]


def rank_sentences(sentences: Sequence[str], window: int = WINDOW) -> list[int]:
    """Sentence indices by summed keyword score, descending; ties by position."""
    all_tokens = [t for s in sentences for t in tokenize(s)]
    scores = textrank_scores(all_tokens, window=window) if all_tokens else {}
    totals = [sum(scores[t] for t in tokenize(s)) for s in sentences]
    return sorted(range(len(sentences)), key=lambda i: (-totals[i], i))


def summarize(text: str, budget_tokens: int = TOKEN_BUDGET, window: int = WINDOW) -> str:
    """Keep the highest-ranked sentences that fit the token budget.

    Sentences that would overflow the budget are skipped; survivors keep their
    original order. If not even the best sentence fits, its first
    ``budget_tokens`` tokens are returned.
    """
    if len(tokenize(text)) <= budget_tokens:
        return text
    sentences = split_sentences(text)
    lengths = [len(tokenize(s)) for s in sentences]
    order = rank_sentences(sentences, window)
    chosen, used = [], 0
    for i in order:
        if used + lengths[i] <= budget_tokens:
            chosen.append(i)
            used += lengths[i]
    if not any(lengths[i] for i in chosen):
        return " ".join(tokenize(sentences[order[0]])[:budget_tokens])
    return " ".join(sentences[i] for i in sorted(chosen))


# ---------------------------------------------------------------------------
# featurization


def hash_slot(token: str, dim: int) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % dim


def build_idf(texts: Iterable[str]) -> dict[str, float]:
    """Smoothed idf, ``ln((1 + n) / (1 + df)) + 1``, over a text corpus."""
    df: dict[str, int] = {}
    n = 0
    for text in texts:
        n += 1
        for t in set(tokenize(text)):
            df[t] = df.get(t, 0) + 1
    return {t: math.log((1 + n) / (1 + c)) + 1.0 for t, c in df.items()} | {"": math.log(1 + n) + 1.0}


def featurize(text: str, d_text: int, idf: Mapping[str, float] | None = None) -> np.ndarray:
    """Hashed tf-idf vector, L2-normalized. Tokens missing from ``idf`` get the
    unseen-token weight stored under the empty key (1.0 without a table)."""
    tokens = tokenize(text)
    if not tokens:
        raise EmptyText(repr(text))
    unseen = idf.get("", 1.0) if idf else 1.0
    vec = np.zeros(d_text)
    for t in tokens:
        vec[hash_slot(t, d_text)] += idf.get(t, unseen) if idf else 1.0
    return vec / np.linalg.norm(vec)


@dataclass(frozen=True)
class NodeText:
    node_id: str
    semantic_text: str
    geometric_text: str
    summarized_text: str


def node_texts(
    tax: tx.Taxonomy, budget_tokens: int = TOKEN_BUDGET, window: int = WINDOW
) -> dict[str, NodeText]:
    """Texts for every node; the summary is taken over prompt + description."""
    out = {}
    for i in tax.order:
        sem = semantic_description(tax.nodes[i])
        geo = geometric_prompt(tax, i)
        out[i] = NodeText(i, sem, geo, summarize(geo + " " + sem, budget_tokens, window))
    return out


def node_features(
    tax: tx.Taxonomy, d_text: int, budget_tokens: int = TOKEN_BUDGET, window: int = WINDOW
) -> np.ndarray:
    """Unit feature rows for every node in ``tax.order``, idf fit on the node corpus."""
    texts = [t.summarized_text for t in node_texts(tax, budget_tokens, window).values()]
    idf = build_idf(texts)
    return np.stack([featurize(t, d_text, idf) for t in texts])
