"""Hierarchical verb tree: parsing, validation, canonical serialization, queries.

A taxonomy document is UTF-8 JSON::

    {"format_version": 1,
     "nodes": [{"id": "20", "parent": "root", "gloss": "contact"},
               {"id": "touch-20", "parent": "20"},
               {"id": "touch-20-1", "parent": "touch-20",
                "members": [{"lemma": "hold", "wordnet": ["hold%2:35:00"],
                             "framenet": ["Manipulation"]}],
                "examples": ["She held the cup."],
                "definitions": ["keep in one's grasp"]}]}

The root node ``"root"`` is synthesized when the document omits it. Hierarchy
comes only from parent links; ids are opaque case-sensitive strings.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping

from verbspace.errors import (
    CyclicTaxonomy,
    DanglingParent,
    DuplicateId,
    MalformedDocument,
    MissingCount,
    UnknownNode,
)

ROOT = "root"
FORMAT_VERSION = 1

_NODE_KEYS = {"id", "parent", "gloss", "members", "examples", "definitions"}
_MEMBER_KEYS = {"lemma", "wordnet", "framenet"}


@dataclass(frozen=True)
class Member:
    lemma: str
    wordnet: tuple[str, ...] = ()
    framenet: tuple[str, ...] = ()


@dataclass(frozen=True)
class VerbNode:
    id: str
    parent_id: str | None
    gloss: str | None = None
    members: tuple[Member, ...] = ()
    examples: tuple[str, ...] = ()
    definitions: tuple[str, ...] = ()

    @property
    def lemmas(self) -> list[str]:
        return [m.lemma for m in self.members]


@dataclass(frozen=True)
class Taxonomy:
    """Immutable validated verb tree.

    ``order`` lists node ids lexicographically; it is the canonical node index
    used by every vector-valued structure (labels, scores, embeddings).
    """

    nodes: Mapping[str, VerbNode]
    children: Mapping[str, tuple[str, ...]]
    order: tuple[str, ...]
    root: str = ROOT
    _index: Mapping[str, int] = field(default_factory=dict, repr=False)

    @property
    def N(self) -> int:
        return len(self.nodes)

    @property
    def leaf_ids(self) -> frozenset[str]:
        return frozenset(i for i in self.order if not self.children[i])

    def __contains__(self, node_id: object) -> bool:
        return node_id in self.nodes

    def __len__(self) -> int:
        return len(self.nodes)

    def node(self, node_id: str) -> VerbNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNode(node_id) from None

    def index(self, node_id: str) -> int:
        try:
            return self._index[node_id]
        except KeyError:
            raise UnknownNode(node_id) from None

    def depth(self, node_id: str) -> int:
        return len(ancestors(self, node_id))

    def fingerprint(self) -> str:
        """sha256 hex digest of the canonical serialization."""
        return hashlib.sha256(serialize_taxonomy(self)).hexdigest()


def _str_list(value, where: str) -> tuple[str, ...]:
    if value is None:
        return ()
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise MalformedDocument(f"{where}: expected a list of strings")
    return tuple(value)


def _parse_member(raw, where: str) -> Member:
    if isinstance(raw, str):
        return Member(raw)
    if not isinstance(raw, dict) or not isinstance(raw.get("lemma"), str):
        raise MalformedDocument(f"{where}: member needs a string 'lemma'")
    extra = set(raw) - _MEMBER_KEYS
    if extra:
        raise MalformedDocument(f"{where}: unknown member keys {sorted(extra)}")
    return Member(
        raw["lemma"],
        _str_list(raw.get("wordnet"), where + ".wordnet"),
        _str_list(raw.get("framenet"), where + ".framenet"),
    )


def _parse_node(raw, pos: int) -> VerbNode:
    where = f"nodes[{pos}]"
    if not isinstance(raw, dict):
        raise MalformedDocument(f"{where}: expected an object")
    extra = set(raw) - _NODE_KEYS
    if extra:
        raise MalformedDocument(f"{where}: unknown keys {sorted(extra)}")
    node_id = raw.get("id")
    if not isinstance(node_id, str) or not node_id:
        raise MalformedDocument(f"{where}: 'id' must be a non-empty string")
    parent = raw.get("parent")
    if parent is not None and not isinstance(parent, str):
        raise MalformedDocument(f"{where}: 'parent' must be a string or null")
    if node_id != ROOT and parent is None:
        raise MalformedDocument(f"{where}: non-root node {node_id!r} needs a parent")
    if node_id == ROOT and parent is not None:
        raise MalformedDocument(f"{where}: root must not have a parent")
    gloss = raw.get("gloss")
    if gloss is not None and not isinstance(gloss, str):
        raise MalformedDocument(f"{where}: 'gloss' must be a string")
    members = raw.get("members") or []
    if not isinstance(members, list):
        raise MalformedDocument(f"{where}: 'members' must be a list")
    return VerbNode(
        id=node_id,
        parent_id=parent,
        gloss=gloss or None,
        members=tuple(_parse_member(m, f"{where}.members[{k}]") for k, m in enumerate(members)),
        examples=_str_list(raw.get("examples"), where + ".examples"),
        definitions=_str_list(raw.get("definitions"), where + ".definitions"),
    )


def build_taxonomy(nodes: Iterable[VerbNode]) -> Taxonomy:
    """Validate a node collection and freeze it into a Taxonomy."""
    table: dict[str, VerbNode] = {}
    for node in nodes:
        if node.id in table:
            raise DuplicateId(node.id)
        table[node.id] = node
    if ROOT not in table:
        table[ROOT] = VerbNode(ROOT, None)

    for node in table.values():
        if node.parent_id is not None and node.parent_id not in table:
            raise DanglingParent(f"{node.id!r} -> {node.parent_id!r}")

    # every parent chain must reach the root
    reaches_root = {ROOT: True}
    for start in table:
        path = []
        cur = start
        while cur not in reaches_root:
            if cur in path:
                raise CyclicTaxonomy(" -> ".join(path[path.index(cur):] + [cur]))
            path.append(cur)
            cur = table[cur].parent_id
        for p in path:
            reaches_root[p] = True

    order = tuple(sorted(table))
    kids: dict[str, list[str]] = {i: [] for i in order}
    for i in order:
        parent = table[i].parent_id
        if parent is not None:
            kids[parent].append(i)
    return Taxonomy(
        nodes=MappingProxyType(table),
        children=MappingProxyType({k: tuple(v) for k, v in kids.items()}),
        order=order,
        _index=MappingProxyType({i: k for k, i in enumerate(order)}),
    )


def parse_taxonomy(doc: bytes | str) -> Taxonomy:
    """Parse and validate a taxonomy document."""
    try:
        if isinstance(doc, bytes):
            doc = doc.decode("utf-8")
        data = json.loads(doc)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedDocument(str(exc)) from exc
    if not isinstance(data, dict):
        raise MalformedDocument("top level must be an object")
    if data.get("format_version") != FORMAT_VERSION:
        raise MalformedDocument(f"format_version must be {FORMAT_VERSION}")
    extra = set(data) - {"format_version", "nodes"}
    if extra:
        raise MalformedDocument(f"unknown top-level keys {sorted(extra)}")
    raw_nodes = data.get("nodes")
    if not isinstance(raw_nodes, list):
        raise MalformedDocument("'nodes' must be a list")
    return build_taxonomy(_parse_node(raw, k) for k, raw in enumerate(raw_nodes))


def load_taxonomy(path) -> Taxonomy:
    with open(path, "rb") as fh:
        return parse_taxonomy(fh.read())


def _node_record(node: VerbNode) -> dict:
    rec: dict = {"id": node.id, "parent": node.parent_id}
    if node.gloss:
        rec["gloss"] = node.gloss
    if node.members:
        rec["members"] = [
            {k: v for k, v in (("lemma", m.lemma), ("wordnet", list(m.wordnet)),
                               ("framenet", list(m.framenet))) if v}
            for m in node.members
        ]
    if node.examples:
        rec["examples"] = list(node.examples)
    if node.definitions:
        rec["definitions"] = list(node.definitions)
    return rec


def serialize_taxonomy(tax: Taxonomy) -> bytes:
    """Canonical byte form: nodes sorted by id, sorted keys, 2-space indent."""
    doc = {"format_version": FORMAT_VERSION, "nodes": [_node_record(tax.nodes[i]) for i in tax.order]}
    return (json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n").encode("utf-8")


def ancestors(tax: Taxonomy, node_id: str) -> list[str]:
    """Ancestor ids ordered leaf-to-root, excluding ``node_id`` itself."""
    out = []
    cur = tax.node(node_id).parent_id
    while cur is not None:
        out.append(cur)
        cur = tax.nodes[cur].parent_id
    return out


def descendants(tax: Taxonomy, node_id: str) -> set[str]:
    return set(descendants_preorder(tax, node_id))


def descendants_preorder(tax: Taxonomy, node_id: str) -> list[str]:
    """Descendants in depth-first preorder, children visited in id order."""
    tax.node(node_id)
    out: list[str] = []
    stack = list(reversed(tax.children[node_id]))
    while stack:
        cur = stack.pop()
        out.append(cur)
        stack.extend(reversed(tax.children[cur]))
    return out


def split_rare(
    leaf_ids: Iterable[str], sample_counts: Mapping[str, int], threshold: int
) -> tuple[set[str], set[str]]:
    """Partition leaves into (rare, non-rare); rare means count < threshold."""
    rare, common = set(), set()
    for leaf in leaf_ids:
        if leaf not in sample_counts:
            raise MissingCount(leaf)
        (rare if sample_counts[leaf] < threshold else common).add(leaf)
    return rare, common
