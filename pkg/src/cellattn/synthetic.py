"""Built-in graph fixtures and generated datasets."""

from __future__ import annotations

import numpy as np

from .data import GraphSample, TUDataset


def cycle_edges(n: int) -> list[tuple[int, int]]:
    return [(i, (i + 1) % n) for i in range(n)]


def triangle() -> tuple[int, list[tuple[int, int]]]:
    return 3, [(0, 1), (0, 2), (1, 2)]


def star(leaves: int) -> tuple[int, list[tuple[int, int]]]:
    return leaves + 1, [(0, i) for i in range(1, leaves + 1)]


def complete(n: int) -> tuple[int, list[tuple[int, int]]]:
    return n, [(i, j) for i in range(n) for j in range(i + 1, n)]


def random_graph(rng: np.random.Generator, n: int, m: int) -> list[tuple[int, int]]:
    """Uniform simple graph with ``n`` vertices and ``min(m, n(n-1)/2)`` edges."""
    all_pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    m = min(m, len(all_pairs))
    pick = rng.choice(len(all_pairs), size=m, replace=False) if m else []
    return sorted(all_pairs[i] for i in pick)


def random_connected_graph(rng: np.random.Generator, n: int, m: int) -> list[tuple[int, int]]:
    """Random spanning tree plus extra uniform edges, ``n - 1 <= m`` edges in total."""
    edges = set()
    order = rng.permutation(n)
    for i in range(1, n):
        u, v = int(order[i]), int(order[rng.integers(i)])
        edges.add((min(u, v), max(u, v)))
    spare = [(i, j) for i in range(n) for j in range(i + 1, n) if (i, j) not in edges]
    extra = max(0, min(m - len(edges), len(spare)))
    for i in rng.choice(len(spare), size=extra, replace=False) if extra else []:
        edges.add(spare[i])
    return sorted(edges)


def random_tree(rng: np.random.Generator, n: int) -> list[tuple[int, int]]:
    return [(int(rng.integers(i)), i) for i in range(1, n)]


def sample_from_edges(n: int, edges, label: int = 0, features: np.ndarray | None = None) -> GraphSample:
    edges = sorted({(min(u, v), max(u, v)) for u, v in edges})
    if features is None:
        features = np.ones((n, 1))
    return GraphSample(node_features=features, edges=edges, label=label)


def ring_detection_dataset(num_graphs: int = 200, seed: int = 0, ring_size: int = 6) -> TUDataset:
    """Balanced task: a graph holding one ``ring_size``-cycle (label 1) vs a tree (label 0).

    Node features are constant and both classes share the same edge-count
    distribution, so the presence of a 2-cell is the only usable signal.
    """
    rng = np.random.default_rng(seed)
    graphs = []
    for i in range(num_graphs):
        extra = int(rng.integers(2, 9))
        if i % 2:
            n = ring_size + extra
            edges = cycle_edges(ring_size)
            for v in range(ring_size, n):
                edges.append((int(rng.integers(v)), v))
            graphs.append(sample_from_edges(n, edges, 1))
        else:
            n = ring_size + extra + 1
            graphs.append(sample_from_edges(n, random_tree(rng, n), 0))
    return TUDataset("synthetic-rings", graphs, class_values=[0, 1])


def memorization_dataset(num_graphs: int = 16, seed: int = 0) -> TUDataset:
    """Distinct random connected graphs with random features and balanced random labels.

    Nothing generalises here; a model can only reach full train accuracy by fitting each graph.
    """
    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(num_graphs) % 2)
    graphs = []
    for i in range(num_graphs):
        n = int(rng.integers(6, 13))
        edges = random_connected_graph(rng, n, n + int(rng.integers(0, 4)))
        graphs.append(sample_from_edges(n, edges, int(labels[i]), rng.standard_normal((n, 3))))
    return TUDataset("memorize", graphs, class_values=[0, 1])
