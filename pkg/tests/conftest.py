"""Shared fixtures and independent oracles for the test suite."""

from __future__ import annotations

import math

import networkx as nx
import numpy as np
import pytest

from actinfer.kgraph import AffinityParams, KnowledgeGraph, load_graph

# Mixed relation pool: compositional and generic kinds.
RELATION_MIX = (
    "IsA",
    "UsedFor",
    "HasProperty",
    "SynonymOf",
    "RelatedTo",
    "AtLocation",
    "CapableOf",
    "Antonym",
)


def random_graph_rows(rng: np.random.Generator, max_nodes: int = 30, max_edges: int = 80):
    """Random edge rows over a small node set; duplicates possible."""
    n = int(rng.integers(3, max_nodes + 1))
    m = int(rng.integers(2, max_edges + 1))
    names = [f"n{i:02d}" for i in range(n)]
    rows = []
    for _ in range(m):
        a, b = rng.choice(n, size=2, replace=False)
        rel = RELATION_MIX[int(rng.integers(len(RELATION_MIX)))]
        weight = float(np.round(rng.uniform(0.1, 3.0), 3))
        rows.append((names[int(a)], rel, names[int(b)], weight))
    return names, rows


def affinity_oracle(graph: KnowledgeGraph, action: str, obj: str, params: AffinityParams) -> float:
    """Brute-force reference: enumerate all simple paths with networkx,
    score each in path-edge order, filter for a compositional edge, max."""
    if action == obj:
        return 0.0
    multi = nx.MultiGraph()
    multi.add_nodes_from(graph.node_list)
    for idx, e in enumerate(graph.edges):
        multi.add_edge(
            e.head,
            e.tail,
            key=idx,
            weight=e.weight,
            comp=e.relation.compositional_for_affinity,
        )
    best = 0.0
    for path in nx.all_simple_edge_paths(multi, action, obj, cutoff=params.max_hops):
        score = 0.0
        qualifies = False
        for hop, (u, v, key) in enumerate(path, start=1):
            data = multi.edges[u, v, key]
            score += math.exp(-params.decay_lambda * hop) * data["weight"]
            qualifies = qualifies or data["comp"]
        if qualifies and score > best:
            best = score
    return best


@pytest.fixture
def kitchen_graph() -> KnowledgeGraph:
    """Small hand-built graph reused across modules."""
    rows = [
        ("knife", "IsA", "tool", 1.0),
        ("knife", "UsedFor", "cutting", 2.0),
        ("knife", "RelatedTo", "fork", 1.0),
        ("cut", "IsA", "tool", 1.0),
        ("tool", "UsedFor", "knife", 1.0),
        ("cut", "RelatedTo", "knife", 5.0),
        ("bowl", "IsA", "dish", 1.5),
        ("bowl", "UsedFor", "pour", 3.0),
        ("pour", "RelatedTo", "liquid", 1.0),
    ]
    return load_graph(rows)
