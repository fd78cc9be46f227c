"""TUDataset text-format reader/writer and stratified fold plans."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)

_SPLIT = re.compile(r"[,\s]+")


class ParseError(ValueError):
    def __init__(self, path, line: int | None, message: str):
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")
        self.path = str(path)
        self.line = line


@dataclass
class GraphSample:
    node_features: np.ndarray  # (V, Fn)
    edges: list[tuple[int, int]]  # undirected, u < v, sorted
    label: int
    edge_features: np.ndarray | None = None  # (E, Fe), rows aligned with ``edges``
    # raw TUDataset values, kept so the sample can be written back verbatim
    node_labels: np.ndarray | None = None
    node_attributes: np.ndarray | None = None
    edge_labels: np.ndarray | None = None

    @property
    def num_nodes(self) -> int:
        return self.node_features.shape[0]

    @property
    def num_edges(self) -> int:
        return len(self.edges)


@dataclass
class TUDataset:
    name: str
    graphs: list[GraphSample]
    class_values: list = field(default_factory=list)  # original graph label for class index i
    node_label_values: list = field(default_factory=list)
    edge_label_values: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.graphs)

    def __getitem__(self, i):
        return self.graphs[i]

    def __iter__(self):
        return iter(self.graphs)

    @property
    def labels(self) -> np.ndarray:
        return np.array([g.label for g in self.graphs], dtype=np.int64)

    @property
    def num_classes(self) -> int:
        return len(self.class_values)

    @property
    def num_node_features(self) -> int:
        return self.graphs[0].node_features.shape[1] if self.graphs else 0

    @property
    def num_edge_features(self) -> int:
        g = self.graphs[0] if self.graphs else None
        return 0 if g is None or g.edge_features is None else g.edge_features.shape[1]


def _read_rows(path: Path, kind=int) -> list[list]:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([kind(tok) for tok in _SPLIT.split(line) if tok])
            except ValueError:
                raise ParseError(path, lineno, f"cannot parse {line!r}") from None
    return rows


def _one_hot(values: np.ndarray, vocab: list) -> np.ndarray:
    index = {v: i for i, v in enumerate(vocab)}
    out = np.zeros((len(values), len(vocab)))
    out[np.arange(len(values)), [index[v] for v in values.tolist()]] = 1.0
    return out


def parse_tud(dir_path, name: str) -> TUDataset:
    """Read ``<dir>/<name>/<name>_*.txt`` (or ``<dir>/<name>_*.txt``).

    Node features are ``[attributes | one-hot labels]``; edge features are
    one-hot edge labels when ``_edge_labels.txt`` exists.  Directed pairs
    ``(u, v)`` and ``(v, u)`` become one undirected edge; an edge listed
    once is also accepted.
    """
    base = Path(dir_path)
    if (base / name).is_dir():
        base = base / name

    def f(suffix):
        return base / f"{name}_{suffix}.txt"

    for req in ("A", "graph_indicator", "graph_labels"):
        if not f(req).exists():
            raise ParseError(f(req), None, "missing mandatory file")

    indicator = [r[0] for r in _read_rows(f("graph_indicator"))]
    glabels_raw = [r[0] for r in _read_rows(f("graph_labels"))]
    n_graphs = len(glabels_raw)
    for lineno, g in enumerate(indicator, 1):
        if not 1 <= g <= n_graphs:
            raise ParseError(f("graph_indicator"), lineno, f"graph id {g} has no entry in graph_labels ({n_graphs} graphs)")
    indicator = np.asarray(indicator, dtype=np.int64) - 1
    if np.any(np.diff(indicator) < 0):
        bad = int(np.flatnonzero(np.diff(indicator) < 0)[0]) + 2
        raise ParseError(f("graph_indicator"), bad, "graph ids must be non-decreasing")
    counts = np.bincount(indicator, minlength=n_graphs)
    empty = np.flatnonzero(counts == 0)
    if len(empty):
        raise ParseError(f("graph_indicator"), None, f"graph {int(empty[0]) + 1} has no nodes")
    first_node = np.concatenate([[0], np.cumsum(counts)])
    n_nodes = len(indicator)

    node_labels = None
    if f("node_labels").exists():
        node_labels = np.array([r[0] for r in _read_rows(f("node_labels"))], dtype=np.int64)
        if len(node_labels) != n_nodes:
            raise ParseError(f("node_labels"), None, f"{len(node_labels)} labels for {n_nodes} nodes")
    node_attrs = None
    if f("node_attributes").exists():
        node_attrs = np.array(_read_rows(f("node_attributes"), float), dtype=np.float64)
        if len(node_attrs) != n_nodes:
            raise ParseError(f("node_attributes"), None, f"{len(node_attrs)} rows for {n_nodes} nodes")

    pairs = _read_rows(f("A"))
    edge_labels = None
    if f("edge_labels").exists():
        edge_labels = np.array([r[0] for r in _read_rows(f("edge_labels"))], dtype=np.int64)
        if len(edge_labels) != len(pairs):
            raise ParseError(f("edge_labels"), None, f"{len(edge_labels)} labels for {len(pairs)} adjacency rows")

    class_values = sorted(set(glabels_raw))
    class_index = {v: i for i, v in enumerate(class_values)}
    nl_vocab = sorted(set(node_labels.tolist())) if node_labels is not None else []
    el_vocab = sorted(set(edge_labels.tolist())) if edge_labels is not None else []

    per_graph_edges: list[dict] = [dict() for _ in range(n_graphs)]
    for lineno, row in enumerate(pairs, 1):
        if len(row) != 2:
            raise ParseError(f("A"), lineno, f"expected 2 node ids, got {len(row)}")
        u, v = row[0] - 1, row[1] - 1
        if not (0 <= u < n_nodes and 0 <= v < n_nodes):
            raise ParseError(f("A"), lineno, f"node id out of range 1..{n_nodes}")
        g = indicator[u]
        if indicator[v] != g:
            raise ParseError(f("A"), lineno, f"edge ({u + 1}, {v + 1}) crosses graphs {g + 1} and {indicator[v] + 1}")
        if u == v:
            raise ParseError(f("A"), lineno, f"self-loop at node {u + 1}")
        key = (min(u, v), max(u, v))
        if key not in per_graph_edges[g]:
            per_graph_edges[g][key] = lineno - 1

    graphs = []
    for g in range(n_graphs):
        lo, hi = first_node[g], first_node[g + 1]
        feats = []
        if node_attrs is not None:
            feats.append(node_attrs[lo:hi])
        nl = node_labels[lo:hi] if node_labels is not None else None
        if nl is not None:
            feats.append(_one_hot(nl, nl_vocab))
        if not feats:
            feats.append(np.ones((hi - lo, 1)))
        keys = sorted(per_graph_edges[g])
        edges = [(int(u - lo), int(v - lo)) for u, v in keys]
        el = None
        ef = None
        if edge_labels is not None:
            el = edge_labels[[per_graph_edges[g][k] for k in keys]] if keys else np.zeros(0, dtype=np.int64)
            ef = _one_hot(el, el_vocab) if keys else np.zeros((0, len(el_vocab)))
        graphs.append(
            GraphSample(
                node_features=np.concatenate(feats, axis=1),
                edges=edges,
                label=class_index[glabels_raw[g]],
                edge_features=ef,
                node_labels=nl,
                node_attributes=node_attrs[lo:hi] if node_attrs is not None else None,
                edge_labels=el,
            )
        )
    return TUDataset(name, graphs, class_values, nl_vocab, el_vocab)


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def write_tud(dataset: TUDataset, dir_path) -> Path:
    """Write ``dataset`` in the TUDataset layout; edges are written in both directions."""
    out = Path(dir_path) / dataset.name
    out.mkdir(parents=True, exist_ok=True)
    name = dataset.name
    a_lines, ind, gl, nl, na, el = [], [], [], [], [], []
    offset = 0
    for gi, g in enumerate(dataset.graphs):
        ind += [str(gi + 1)] * g.num_nodes
        gl.append(str(dataset.class_values[g.label]))
        if g.node_labels is not None:
            nl += [str(int(x)) for x in g.node_labels]
        if g.node_attributes is not None:
            na += [", ".join(_fmt(x) for x in row) for row in g.node_attributes]
        for i, (u, v) in enumerate(g.edges):
            for a, b in ((u, v), (v, u)):
                a_lines.append(f"{a + offset + 1}, {b + offset + 1}")
                if g.edge_labels is not None:
                    el.append(str(int(g.edge_labels[i])))
        offset += g.num_nodes

    def put(suffix, lines):
        (out / f"{name}_{suffix}.txt").write_text("".join(line + "\n" for line in lines))

    put("A", a_lines)
    put("graph_indicator", ind)
    put("graph_labels", gl)
    if dataset.graphs and dataset.graphs[0].node_labels is not None:
        put("node_labels", nl)
    if dataset.graphs and dataset.graphs[0].node_attributes is not None:
        put("node_attributes", na)
    if dataset.graphs and dataset.graphs[0].edge_labels is not None:
        put("edge_labels", el)
    return out


@dataclass
class FoldPlan:
    folds: list[np.ndarray]
    seed: int
    stratified: bool = True
    warnings: list[str] = field(default_factory=list)

    def split(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(train_idx, val_idx)`` with fold ``i`` held out."""
        val = self.folds[i]
        train = np.sort(np.concatenate([f for j, f in enumerate(self.folds) if j != i]))
        return train, val

    def as_dict(self) -> dict:
        return {"seed": self.seed, "stratified": self.stratified, "warnings": self.warnings,
                "folds": [f.tolist() for f in self.folds]}


def make_folds(n: int, labels: Sequence[int], seed: int = 0, num_folds: int = 10) -> FoldPlan:
    """Stratified ``num_folds`` partition of ``range(n)``.

    Each class is shuffled and dealt round-robin, continuing from the fold
    where the previous class stopped so fold sizes differ by at most one.
    """
    if n < num_folds:
        raise ValueError(f"need at least {num_folds} samples, got {n}")
    labels = np.asarray(labels)
    if len(labels) != n:
        raise ValueError(f"{len(labels)} labels for {n} samples")
    rng = np.random.default_rng(seed)
    classes, counts = np.unique(labels, return_counts=True)
    buckets: list[list[int]] = [[] for _ in range(num_folds)]
    warnings = []
    if counts.min() < num_folds:
        small = classes[counts < num_folds].tolist()
        msg = f"classes {small} have fewer than {num_folds} members; folds are not stratified"
        log.warning(msg)
        warnings.append(msg)
        for j, idx in enumerate(rng.permutation(n)):
            buckets[j % num_folds].append(int(idx))
        stratified = False
    else:
        pos = 0
        for c in classes:
            for idx in rng.permutation(np.flatnonzero(labels == c)):
                buckets[pos % num_folds].append(int(idx))
                pos += 1
        stratified = True
    folds = [np.array(sorted(b), dtype=np.int64) for b in buckets]
    return FoldPlan(folds, seed, stratified, warnings)
