"""Skeleton-preserving lifting of graphs into cell complexes.

Every chordless cycle of length ``3..R`` becomes a 2-cell; vertices and
edges are copied unchanged.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .complex import CellComplex


class MalformedGraphError(ValueError):
    pass


@dataclass(frozen=True)
class LiftConfig:
    max_ring_size: int = 6

    def __post_init__(self):
        if self.max_ring_size < 3:
            raise ValueError(f"max_ring_size must be >= 3, got {self.max_ring_size}")


def _adjacency(num_vertices: int, edges: Iterable[Sequence[int]]) -> list[set[int]]:
    adj: list[set[int]] = [set() for _ in range(num_vertices)]
    for u, v in edges:
        if u == v:
            raise MalformedGraphError(f"self-loop at vertex {u}")
        adj[u].add(v)
        adj[v].add(u)
    return adj


def chordless_cycles(num_vertices: int, edges: Iterable[Sequence[int]], max_len: int) -> list[tuple[int, ...]]:
    """Enumerate chordless cycles of length 3..max_len.

    Cycles come out in canonical form (minimum vertex first, second vertex
    smaller than the last) and sorted.  The search grows chordless paths
    from each start vertex ``s`` through vertices larger than ``s`` only,
    so each cycle is produced from its minimum vertex.
    """
    adj = _adjacency(num_vertices, edges)
    found: list[tuple[int, ...]] = []

    def extend(path: list[int], on_path: set[int], s: int) -> None:
        last = path[-1]
        interior = path[1:-1]
        for w in sorted(adj[last]):
            if w <= s or w in on_path:
                continue
            if any(w in adj[x] for x in interior):
                continue
            if s in adj[w]:
                # w closes the cycle; any further extension would carry the chord (s, w)
                if len(path) >= 2 and path[1] < w:
                    found.append(tuple(path) + (w,))
                continue
            if len(path) + 2 <= max_len:
                path.append(w)
                on_path.add(w)
                extend(path, on_path, s)
                path.pop()
                on_path.discard(w)

    if max_len >= 3:
        for s in range(num_vertices):
            for v in sorted(adj[s]):
                if v > s:
                    extend([s, v], {s, v}, s)
    found.sort()
    return found


def lift_graph(num_vertices: int, edges: Iterable[Sequence[int]], cfg: LiftConfig = LiftConfig()) -> CellComplex:
    edges = list(edges)
    cycles = chordless_cycles(num_vertices, edges, cfg.max_ring_size)
    return CellComplex.build(num_vertices, edges, cycles, validate=False)


def lift_sample(sample, cfg: LiftConfig = LiftConfig()) -> CellComplex:
    return lift_graph(sample.num_nodes, sample.edges, cfg)


@dataclass
class DatasetStats:
    name: str
    num_graphs: int
    num_classes: int
    num_node_features: int
    num_edge_features: int
    avg_nodes: float
    avg_edges: float
    avg_cells: dict[int, float]
    max_ring_size: int

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "num_graphs": self.num_graphs,
            "num_classes": self.num_classes,
            "num_node_features": self.num_node_features,
            "num_edge_features": self.num_edge_features,
            "avg_nodes": self.avg_nodes,
            "avg_edges": self.avg_edges,
            "avg_cells": {str(k): v for k, v in self.avg_cells.items()},
            "max_ring_size": self.max_ring_size,
        }


# Reference values for comparison only; measured numbers are always reported.
PUBLISHED_STATS = {
    "MUTAG": dict(graphs=188, nodes=17.93, edges=19.79, cells={3: 0.00, 4: 0.00, 5: 0.36, 6: 2.5}),
    "PTC": dict(graphs=336, nodes=13.97, edges=14.32, cells={3: 0.04, 4: 0.01, 5: 0.19, 6: 1.12}),
    "PROTEINS": dict(graphs=1113, nodes=39.06, edges=72.82, cells={3: 27.40, 4: 14.08, 5: 5.68, 6: 8.72}),
    "NCI1": dict(graphs=4110, nodes=29.87, edges=32.30, cells={3: 0.04, 4: 0.03, 5: 0.75, 6: 2.66}),
    "NCI109": dict(graphs=4127, nodes=29.68, edges=32.13, cells={3: 0.04, 4: 0.03, 5: 0.74, 6: 2.7}),
}


def dataset_stats(samples, cfg: LiftConfig = LiftConfig(), name: str = "", complexes=None) -> DatasetStats:
    samples = list(samples)
    n = len(samples)
    if complexes is None:
        complexes = [lift_sample(s, cfg) for s in samples]
    counts: Counter = Counter()
    for cx in complexes:
        counts.update(cx.ring_sizes().tolist())
    labels = {s.label for s in samples}
    fn = samples[0].node_features.shape[1] if n else 0
    fe = samples[0].edge_features.shape[1] if n and samples[0].edge_features is not None else 0
    return DatasetStats(
        name=name,
        num_graphs=n,
        num_classes=len(labels),
        num_node_features=fn,
        num_edge_features=fe,
        avg_nodes=sum(s.num_nodes for s in samples) / n if n else math.nan,
        avg_edges=sum(len(s.edges) for s in samples) / n if n else math.nan,
        avg_cells={k: counts.get(k, 0) / n if n else math.nan for k in range(3, cfg.max_ring_size + 1)},
        max_ring_size=cfg.max_ring_size,
    )


def published_mismatches(stats: DatasetStats) -> list[str]:
    """List the published entries (2-decimal display) that differ from measured values."""
    ref = PUBLISHED_STATS.get(stats.name.upper())
    if ref is None:
        return []
    out = []
    if stats.num_graphs != ref["graphs"]:
        out.append(f"graphs: measured {stats.num_graphs}, reference {ref['graphs']}")
    for key, measured in (("nodes", stats.avg_nodes), ("edges", stats.avg_edges)):
        if round(measured, 2) != ref[key]:
            out.append(f"avg {key}: measured {measured:.2f}, reference {ref[key]:.2f}")
    for k, val in ref["cells"].items():
        measured = stats.avg_cells.get(k)
        if measured is not None and round(measured, 2) != round(val, 2):
            out.append(f"avg {k}-cells: measured {measured:.2f}, reference {val:.2f}")
    return out


def format_stats_table(rows: Sequence[DatasetStats]) -> str:
    header = ["Info"] + [r.name for r in rows]
    body = [
        ["# Graphs"] + [str(r.num_graphs) for r in rows],
        ["# Classes"] + [str(r.num_classes) for r in rows],
        ["# Node Feat."] + [str(r.num_node_features) for r in rows],
        ["# Edge Feat."] + [str(r.num_edge_features) for r in rows],
        ["Avg. Nodes"] + [f"{r.avg_nodes:.2f}" for r in rows],
        ["Avg. Edges"] + [f"{r.avg_edges:.2f}" for r in rows],
    ]
    sizes = sorted({k for r in rows for k in r.avg_cells})
    for k in sizes:
        body.append([f"Avg. {k} Cells"] + [f"{r.avg_cells.get(k, 0.0):.2f}" for r in rows])
    table = [header] + body
    widths = [max(len(row[i]) for row in table) for i in range(len(header))]
    lines = []
    for j, row in enumerate(table):
        cells = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
        lines.append("  ".join(cells))
        if j == 0:
            lines.append("-" * len(lines[0]))
    return "\n".join(lines)


def permute_graph(num_vertices: int, edges, perm: Sequence[int]):
    perm = np.asarray(perm)
    return [(int(perm[u]), int(perm[v])) for u, v in edges]
