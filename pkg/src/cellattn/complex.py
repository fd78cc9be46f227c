"""Combinatorial 2-dimensional regular cell complexes.

A complex is stored through its face poset only: vertices are integers,
edges are vertex pairs ``(u, v)`` with ``u < v`` and rings are chordless
cycles given as cyclic vertex sequences.  Everything the network needs
(signed incidences, Laplacians, lower/upper adjacencies) is derived from
those three lists.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class ComplexError(ValueError):
    """Raised when cell data violates the complex invariants."""


@dataclass(frozen=True)
class Ring:
    vertices: tuple[int, ...]
    edge_ids: tuple[int, ...]
    signs: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.vertices)


@dataclass(frozen=True)
class SignedIncidence:
    """Signed boundary matrices in coordinate form.

    ``b1`` is ``V x E`` and ``b2`` is ``E x P``; each is a triple
    ``(rows, cols, values)`` of integer arrays.
    """

    shape1: tuple[int, int]
    shape2: tuple[int, int]
    b1_coo: tuple[np.ndarray, np.ndarray, np.ndarray]
    b2_coo: tuple[np.ndarray, np.ndarray, np.ndarray]

    @staticmethod
    def _dense(shape, coo) -> np.ndarray:
        out = np.zeros(shape, dtype=np.int64)
        rows, cols, vals = coo
        out[rows, cols] = vals
        return out

    @property
    def b1(self) -> np.ndarray:
        return self._dense(self.shape1, self.b1_coo)

    @property
    def b2(self) -> np.ndarray:
        return self._dense(self.shape2, self.b2_coo)


def _ordered_pairs(groups: Iterable[Sequence[int]]) -> np.ndarray:
    """All ordered pairs (a, b), a != b, drawn from each group; deduplicated, sorted."""
    chunks = []
    for g in groups:
        g = np.asarray(g, dtype=np.int64)
        if len(g) < 2:
            continue
        a, b = np.meshgrid(g, g, indexing="ij")
        mask = a != b
        chunks.append(np.stack([a[mask], b[mask]]))
    if not chunks:
        return np.zeros((2, 0), dtype=np.int64)
    pairs = np.unique(np.concatenate(chunks, axis=1), axis=1)
    return pairs


def _split_pairs(pairs: np.ndarray, n: int) -> list[list[int]]:
    out: list[list[int]] = [[] for _ in range(n)]
    for e, k in pairs.T.tolist():
        out[e].append(k)
    return out


@dataclass(frozen=True, eq=False)
class CellComplex:
    """Immutable cell complex of dimension at most two.

    ``lower_pairs`` / ``upper_pairs`` are ``2 x M`` arrays listing every
    ordered neighbour pair ``(e, k)`` sorted by ``e`` then ``k``.  They are
    the vectorised form of ``lower_nbrs`` / ``upper_nbrs``.
    """

    num_vertices: int
    edges: np.ndarray  # (E, 2) int64, u < v, lexicographically sorted
    rings: tuple[Ring, ...]
    lower_pairs: np.ndarray
    upper_pairs: np.ndarray
    ring_edge_ptr: np.ndarray  # CSR offsets into ring_edge_ids
    ring_edge_ids: np.ndarray
    ring_signs: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    # ------------------------------------------------------------ building
    @classmethod
    def build(
        cls,
        num_vertices: int,
        edges: Iterable[Sequence[int]],
        cycles: Iterable[Sequence[int]] = (),
        *,
        validate: bool = True,
    ) -> "CellComplex":
        """Build a complex from a vertex count, an edge list and vertex cycles.

        Edges are canonicalised to ``u < v`` and sorted.  Each cycle is
        rotated to start at its minimum vertex and traversed toward the
        smaller of that vertex's two ring neighbours.
        """
        canon = sorted({(min(u, v), max(u, v)) for u, v in edges})
        for u, v in canon:
            if u == v:
                raise ComplexError(f"self-loop at vertex {u}")
            if not (0 <= u and v < num_vertices):
                raise ComplexError(f"edge ({u}, {v}) out of range for {num_vertices} vertices")
        edge_arr = np.array(canon, dtype=np.int64).reshape(-1, 2)
        index = {e: i for i, e in enumerate(canon)}

        rings = []
        for cyc in sorted({canonical_cycle(c) for c in cycles}):
            eids, signs = [], []
            m = len(cyc)
            for i in range(m):
                a, b = cyc[i], cyc[(i + 1) % m]
                key = (min(a, b), max(a, b))
                if key not in index:
                    raise ComplexError(f"ring {cyc} uses missing edge {key}")
                eids.append(index[key])
                signs.append(1 if a < b else -1)
            rings.append(Ring(tuple(cyc), tuple(eids), tuple(signs)))
        cx = cls._assemble(num_vertices, edge_arr, tuple(rings))
        if validate:
            cx.check()
        return cx

    @classmethod
    def _assemble(cls, num_vertices: int, edges: np.ndarray, rings: tuple[Ring, ...]) -> "CellComplex":
        incident: list[list[int]] = [[] for _ in range(num_vertices)]
        for i, (u, v) in enumerate(edges.tolist()):
            incident[u].append(i)
            incident[v].append(i)
        lower = _ordered_pairs(incident)
        upper = _ordered_pairs(r.edge_ids for r in rings)
        lengths = [len(r) for r in rings]
        ptr = np.zeros(len(rings) + 1, dtype=np.int64)
        ptr[1:] = np.cumsum(lengths) if rings else []
        ids = np.array([e for r in rings for e in r.edge_ids], dtype=np.int64)
        signs = np.array([s for r in rings for s in r.signs], dtype=np.int64)
        return cls(num_vertices, edges, rings, lower, upper, ptr, ids, signs)

    # ----------------------------------------------------------- accessors
    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_rings(self) -> int:
        return len(self.rings)

    @property
    def lower_nbrs(self) -> list[list[int]]:
        if "lower" not in self._cache:
            self._cache["lower"] = _split_pairs(self.lower_pairs, self.num_edges)
        return self._cache["lower"]

    @property
    def upper_nbrs(self) -> list[list[int]]:
        if "upper" not in self._cache:
            self._cache["upper"] = _split_pairs(self.upper_pairs, self.num_edges)
        return self._cache["upper"]

    @property
    def cofaces(self) -> list[list[int]]:
        if "cofaces" not in self._cache:
            out: list[list[int]] = [[] for _ in range(self.num_edges)]
            for p, r in enumerate(self.rings):
                for e in r.edge_ids:
                    out[e].append(p)
            self._cache["cofaces"] = [sorted(set(c)) for c in out]
        return self._cache["cofaces"]

    def edge_list(self) -> list[tuple[int, int]]:
        return [tuple(e) for e in self.edges.tolist()]

    def ring_sizes(self) -> np.ndarray:
        return np.diff(self.ring_edge_ptr)

    # ---------------------------------------------------------- invariants
    def check(self) -> None:
        """Raise :class:`ComplexError` if any structural invariant fails."""
        edge_set = set(self.edge_list())
        for r in self.rings:
            vs = r.vertices
            if len(vs) < 3 or len(set(vs)) != len(vs):
                raise ComplexError(f"ring {vs} is not a simple cycle")
            m = len(vs)
            for i in range(m):
                for j in range(i + 2, m):
                    if i == 0 and j == m - 1:
                        continue
                    if (min(vs[i], vs[j]), max(vs[i], vs[j])) in edge_set:
                        raise ComplexError(f"ring {vs} has chord ({vs[i]}, {vs[j]})")
        inc = build_incidence(self)
        if np.any(inc.b1 @ inc.b2):
            raise ComplexError("B1 @ B2 is not zero")

    # --------------------------------------------------------- subcomplexes
    def subcomplex(self, keep_edges: np.ndarray) -> tuple["CellComplex", np.ndarray]:
        """Keep the edges flagged in the boolean mask ``keep_edges``.

        Vertices are all retained.  A ring survives only if every edge on
        its boundary survives.  Returns the new complex and the kept
        original edge ids (ascending).
        """
        keep_edges = np.asarray(keep_edges, dtype=bool)
        kept = np.flatnonzero(keep_edges)
        remap = np.full(self.num_edges, -1, dtype=np.int64)
        remap[kept] = np.arange(len(kept))
        rings = tuple(
            Ring(r.vertices, tuple(int(remap[e]) for e in r.edge_ids), r.signs)
            for r in self.rings
            if keep_edges[list(r.edge_ids)].all()
        )
        lp = self.lower_pairs
        lmask = keep_edges[lp[0]] & keep_edges[lp[1]]
        lower = remap[lp[:, lmask]]
        upper = _ordered_pairs(r.edge_ids for r in rings)
        lengths = [len(r) for r in rings]
        ptr = np.zeros(len(rings) + 1, dtype=np.int64)
        if rings:
            ptr[1:] = np.cumsum(lengths)
        ids = np.array([e for r in rings for e in r.edge_ids], dtype=np.int64)
        signs = np.array([s for r in rings for s in r.signs], dtype=np.int64)
        sub = CellComplex(self.num_vertices, self.edges[kept], rings, lower, upper, ptr, ids, signs)
        return sub, kept

    @staticmethod
    def disjoint_union(parts: Sequence["CellComplex"]) -> "CellComplex":
        """Block-diagonal union; cell ids of later parts are offset."""
        v_off = e_off = 0
        edges, lowers, uppers, rings = [], [], [], []
        for cx in parts:
            edges.append(cx.edges + v_off)
            lowers.append(cx.lower_pairs + e_off)
            uppers.append(cx.upper_pairs + e_off)
            for r in cx.rings:
                rings.append(
                    Ring(
                        tuple(v + v_off for v in r.vertices),
                        tuple(e + e_off for e in r.edge_ids),
                        r.signs,
                    )
                )
            v_off += cx.num_vertices
            e_off += cx.num_edges
        cat = lambda xs, shape: np.concatenate(xs, axis=-1) if xs else np.zeros(shape, dtype=np.int64)
        edge_arr = np.concatenate(edges) if edges else np.zeros((0, 2), dtype=np.int64)
        ptr = np.zeros(len(rings) + 1, dtype=np.int64)
        if rings:
            ptr[1:] = np.cumsum([len(r) for r in rings])
        ids = np.array([e for r in rings for e in r.edge_ids], dtype=np.int64)
        signs = np.array([s for r in rings for s in r.signs], dtype=np.int64)
        return CellComplex(
            v_off,
            edge_arr.reshape(-1, 2),
            tuple(rings),
            cat(lowers, (2, 0)),
            cat(uppers, (2, 0)),
            ptr,
            ids,
            signs,
        )

    def relabel(self, perm: Sequence[int]) -> "CellComplex":
        """Rebuild the complex after mapping vertex ``i`` to ``perm[i]``."""
        perm = list(perm)
        edges = [(perm[u], perm[v]) for u, v in self.edge_list()]
        cycles = [[perm[v] for v in r.vertices] for r in self.rings]
        return CellComplex.build(self.num_vertices, edges, cycles)


def canonical_cycle(cycle: Sequence[int]) -> tuple[int, ...]:
    """Rotate to the minimum vertex, then walk toward its smaller neighbour."""
    cyc = list(cycle)
    i = cyc.index(min(cyc))
    cyc = cyc[i:] + cyc[:i]
    if len(cyc) > 2 and cyc[-1] < cyc[1]:
        cyc = [cyc[0]] + cyc[:0:-1]
    return tuple(cyc)


def build_incidence(cx: CellComplex) -> SignedIncidence:
    E = cx.num_edges
    cols = np.arange(E, dtype=np.int64)
    rows1 = np.concatenate([cx.edges[:, 0], cx.edges[:, 1]])
    cols1 = np.concatenate([cols, cols])
    vals1 = np.concatenate([-np.ones(E, dtype=np.int64), np.ones(E, dtype=np.int64)])
    ring_of = np.repeat(np.arange(cx.num_rings, dtype=np.int64), np.diff(cx.ring_edge_ptr))
    return SignedIncidence(
        (cx.num_vertices, E),
        (E, cx.num_rings),
        (rows1, cols1, vals1),
        (cx.ring_edge_ids.copy(), ring_of, cx.ring_signs.copy()),
    )


def laplacians(inc: SignedIncidence) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(L0, L1_down, L1_up, L2)`` as dense integer matrices."""
    b1, b2 = inc.b1, inc.b2
    return b1 @ b1.T, b1.T @ b1, b2 @ b2.T, b2.T @ b2


def neighborhoods(cx: CellComplex) -> tuple[list[list[int]], list[list[int]], list[list[int]]]:
    return cx.lower_nbrs, cx.upper_nbrs, cx.cofaces


def write_matrix(path: str | Path, mat: np.ndarray) -> None:
    """Write an integer matrix as rows of space separated values."""
    with open(path, "w") as fh:
        for row in np.atleast_2d(mat):
            fh.write(" ".join(str(int(x)) for x in row) + "\n")


def read_matrix(path: str | Path, shape: tuple[int, int] | None = None) -> np.ndarray:
    rows = [list(map(int, line.split())) for line in Path(path).read_text().splitlines() if line.strip()]
    mat = np.array(rows, dtype=np.int64)
    if shape is not None:
        mat = mat.reshape(shape)
    return mat


def export_incidence(cx: CellComplex, stem: str | Path) -> tuple[Path, Path]:
    """Dump ``B1``/``B2`` to ``<stem>_B1.txt`` and ``<stem>_B2.txt``.

    An ``E x 0`` matrix is written as ``E`` empty lines.
    """
    inc = build_incidence(cx)
    p1, p2 = Path(f"{stem}_B1.txt"), Path(f"{stem}_B2.txt")
    p1.parent.mkdir(parents=True, exist_ok=True)
    write_matrix(p1, inc.b1)
    b2 = inc.b2
    if b2.shape[1] == 0:
        p2.write_text("\n" * b2.shape[0])
    else:
        write_matrix(p2, b2)
    return p1, p2
