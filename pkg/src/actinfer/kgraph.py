"""Commonsense knowledge graph: loading, ego-graphs, paths, affinity.

The graph is immutable after load.  Queries treat edges as undirected;
assertions like (knife, UsedFor, cutting) support reasoning in both
directions, and the direction is recorded where it matters (ego-graphs).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .concepts import RelationKind, canon_concept, relation
from .errors import DataError


@dataclass(frozen=True)
class Edge:
    head: str
    relation: RelationKind
    tail: str
    weight: float

    def other(self, node: str) -> str:
        return self.tail if node == self.head else self.head


@dataclass(frozen=True)
class EgoNeighbor:
    evidence: str
    relation: RelationKind
    weight: float
    outgoing: bool  # True when the center is the edge head


@dataclass(frozen=True)
class EgoGraph:
    """1-hop neighborhood of a concept, restricted to compositional relations."""

    center: str
    neighbors: tuple[EgoNeighbor, ...]


@dataclass(frozen=True)
class KPath:
    """Simple undirected path; nodes[0] is the query source."""

    nodes: tuple[str, ...]
    edges: tuple[Edge, ...]

    @property
    def hop_count(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class AffinityParams:
    decay_lambda: float = 1.0
    max_hops: int = 3

    def __post_init__(self) -> None:
        if self.decay_lambda <= 0:
            raise DataError(f"decay_lambda must be positive, got {self.decay_lambda}")
        if self.max_hops < 1:
            raise DataError(f"max_hops must be >= 1, got {self.max_hops}")


class KnowledgeGraph:
    """Directed, typed, weighted concept graph with undirected traversal."""

    def __init__(self, edges: Iterable[Edge]):
        merged: dict[tuple[str, str, str], Edge] = {}
        for e in edges:
            key = (e.head, e.relation.name, e.tail)
            old = merged.get(key)
            if old is None or e.weight > old.weight:
                merged[key] = e
        self.edges: tuple[Edge, ...] = tuple(
            merged[k] for k in sorted(merged.keys())
        )
        nodes: set[str] = set()
        for e in self.edges:
            nodes.add(e.head)
            nodes.add(e.tail)
        self.node_list: tuple[str, ...] = tuple(sorted(nodes))
        self.nodes: frozenset[str] = frozenset(nodes)
        # Undirected adjacency, deterministically ordered.
        adj: dict[str, list[Edge]] = {n: [] for n in self.node_list}
        for e in self.edges:
            adj[e.head].append(e)
            if e.tail != e.head:
                adj[e.tail].append(e)
        for n, lst in adj.items():
            lst.sort(key=lambda e: (e.other(n), e.relation.name, e.head != n))
        self._adj = adj
        self._csr: tuple[np.ndarray, ...] | None = None
        self._node_index: dict[str, int] = {
            n: i for i, n in enumerate(self.node_list)
        }

    def __contains__(self, concept: str) -> bool:
        return concept in self.nodes

    def _require(self, concept: str) -> None:
        if concept not in self.nodes:
            raise DataError(f"concept {concept!r} not in the knowledge graph")

    # -- queries ---------------------------------------------------------

    def ego_graph(self, center: str) -> EgoGraph:
        """1-hop compositional neighborhood; evidence is the far endpoint."""
        self._require(center)
        neighbors = []
        for e in self._adj[center]:
            if not e.relation.compositional_for_egograph:
                continue
            evidence = e.other(center)
            if evidence == center:
                continue
            neighbors.append(
                EgoNeighbor(
                    evidence=evidence,
                    relation=e.relation,
                    weight=e.weight,
                    outgoing=e.head == center,
                )
            )
        return EgoGraph(center=center, neighbors=tuple(neighbors))

    def enumerate_paths(self, src: str, dst: str, max_hops: int) -> list[KPath]:
        """All simple undirected paths src->dst with <= max_hops edges.

        Parallel edges yield distinct paths.  Output order is
        deterministic: by hop count, then node sequence, then relation
        sequence.
        """
        self._require(src)
        self._require(dst)
        if max_hops < 1:
            raise DataError(f"max_hops must be >= 1, got {max_hops}")
        if src == dst:
            return []
        paths: list[KPath] = []
        node_stack = [src]
        edge_stack: list[Edge] = []
        on_path = {src}

        def walk(node: str) -> None:
            for e in self._adj[node]:
                nb = e.other(node)
                if nb in on_path:
                    continue
                edge_stack.append(e)
                if nb == dst:
                    paths.append(
                        KPath(nodes=tuple(node_stack) + (dst,), edges=tuple(edge_stack))
                    )
                elif len(edge_stack) < max_hops:
                    node_stack.append(nb)
                    on_path.add(nb)
                    walk(nb)
                    on_path.discard(nb)
                    node_stack.pop()
                edge_stack.pop()

        walk(src)
        paths.sort(
            key=lambda p: (p.hop_count, p.nodes, tuple(e.relation.name for e in p.edges))
        )
        return paths

    def affinity(self, action: str, obj: str, params: AffinityParams | None = None) -> float:
        """Action-object affinity: max decayed path score over qualifying paths.

        A path qualifies when it carries at least one affinity-compositional
        edge; edge k (1-indexed from the action) contributes
        exp(-decay_lambda * k) * weight.  Returns 0.0 when no qualifying
        path of length <= max_hops exists, including action == obj.
        """
        params = params or AffinityParams()
        self._require(action)
        self._require(obj)
        indptr, nbrs, wts, comp = self._csr_arrays()
        decay = _decay_weights(params.decay_lambda, params.max_hops)
        return float(
            _kernels.affinity_scan(
                indptr,
                nbrs,
                wts,
                comp,
                decay,
                self._node_index[action],
                self._node_index[obj],
                params.max_hops,
            )
        )

    def affinity_matrix(
        self,
        actions: Sequence[str],
        objects: Sequence[str],
        params: AffinityParams | None = None,
    ) -> np.ndarray:
        """Affinity for every (object, action) pair, shape (n_obj, n_act)."""
        params = params or AffinityParams()
        out = np.zeros((len(objects), len(actions)))
        for i, obj in enumerate(objects):
            for j, act in enumerate(actions):
                out[i, j] = self.affinity(act, obj, params)
        return out

    # -- internals -------------------------------------------------------

    def _csr_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        if self._csr is None:
            counts = [len(self._adj[n]) for n in self.node_list]
            indptr = np.zeros(len(self.node_list) + 1, dtype=np.int64)
            indptr[1:] = np.cumsum(counts)
            total = int(indptr[-1])
            nbrs = np.zeros(total, dtype=np.int64)
            wts = np.zeros(total, dtype=np.float64)
            comp = np.zeros(total, dtype=np.bool_)
            pos = 0
            for n in self.node_list:
                for e in self._adj[n]:
                    nbrs[pos] = self._node_index[e.other(n)]
                    wts[pos] = e.weight
                    comp[pos] = e.relation.compositional_for_affinity
                    pos += 1
            self._csr = (indptr, nbrs, wts, comp)
        return self._csr


def _decay_weights(decay_lambda: float, max_hops: int) -> np.ndarray:
    return np.array(
        [math.exp(-decay_lambda * (d + 1)) for d in range(max_hops)], dtype=np.float64
    )


def _parse_edge_row(row: tuple, where: str) -> Edge:
    if len(row) != 4:
        raise DataError(f"{where}: expected 4 fields, got {len(row)}")
    head_raw, rel_raw, tail_raw, weight_raw = row
    try:
        weight = float(weight_raw)
    except (TypeError, ValueError):
        raise DataError(f"{where}: weight {weight_raw!r} is not a number") from None
    if not math.isfinite(weight) or weight <= 0:
        raise DataError(f"{where}: weight must be positive, got {weight_raw!r}")
    try:
        return Edge(
            head=canon_concept(str(head_raw)),
            relation=relation(str(rel_raw)),
            tail=canon_concept(str(tail_raw)),
            weight=weight,
        )
    except DataError as err:
        raise DataError(f"{where}: {err}") from None


def load_graph(rows: Iterable[tuple], source: str = "<rows>") -> KnowledgeGraph:
    """Build a graph from (head, relation, tail, weight) rows.

    Duplicate (head, relation, tail) triples keep the maximum weight.
    """
    edges = [
        _parse_edge_row(tuple(row), f"{source}:{lineno}")
        for lineno, row in enumerate(rows, start=1)
    ]
    return KnowledgeGraph(edges)


def load_graph_file(path: str | Path) -> KnowledgeGraph:
    """Load a tab-separated edge file: head<TAB>relation<TAB>tail<TAB>weight.

    Blank lines and lines starting with '#' are ignored.
    """
    edges = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            edges.append(_parse_edge_row(tuple(line.split("\t")), f"{path}:{lineno}"))
    return KnowledgeGraph(edges)
