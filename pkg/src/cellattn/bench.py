"""Empirical scaling of lifting and per-layer forward passes with |E| and R."""

from __future__ import annotations

import time

import numpy as np

from . import autodiff as ad
from .lifting import LiftConfig, lift_graph
from .model import HeadParams, cell_attention_forward, edge_pool


def grid_graph(side: int, diagonals: bool = True) -> tuple[int, list[tuple[int, int]]]:
    """``side x side`` lattice; with ``diagonals`` every other square is split into triangles."""
    idx = lambda r, c: r * side + c
    edges = []
    for r in range(side):
        for c in range(side):
            if c + 1 < side:
                edges.append((idx(r, c), idx(r, c + 1)))
            if r + 1 < side:
                edges.append((idx(r, c), idx(r + 1, c)))
            if diagonals and r + 1 < side and c + 1 < side and (r + c) % 2 == 0:
                edges.append((idx(r, c), idx(r + 1, c + 1)))
    return side * side, edges


def _best_time(fn, repeat: int) -> float:
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def slope(xs, ys) -> float:
    """Least-squares exponent of ``y ~ x**p`` on log-log axes."""
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def run_bench(sides=(8, 12, 16, 24, 32), ring_sizes=(4, 5, 6), width: int = 32, repeat: int = 3,
              seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    lifting = {}
    for R in ring_sizes:
        es, ts = [], []
        for s in sides:
            n, edges = grid_graph(s)
            ts.append(_best_time(lambda: lift_graph(n, edges, LiftConfig(R)), repeat))
            es.append(len(edges))
        lifting[str(R)] = {"edges": es, "seconds": ts, "slope": slope(es, ts)}

    layers = {"cell_attention": {"edges": [], "seconds": []}, "edge_pool": {"edges": [], "seconds": []}}
    act = ad.activation("lrelu", 0.1)
    for s in sides:
        n, edges = grid_graph(s)
        cx = lift_graph(n, edges, LiftConfig(6))
        E = cx.num_edges
        h = ad.Tensor(rng.standard_normal((E, width)))
        hp = HeadParams(*(ad.Tensor(rng.standard_normal((width, width)) / width ** 0.5) for _ in range(3)),
                        ad.Tensor(rng.standard_normal(2 * width)), ad.Tensor(rng.standard_normal(2 * width)))
        a_p = ad.Tensor(rng.standard_normal(width))
        layers["cell_attention"]["seconds"].append(
            _best_time(lambda: cell_attention_forward(h, cx, [hp], att_act=act), repeat))
        layers["edge_pool"]["seconds"].append(_best_time(lambda: edge_pool(h, cx, a_p, 0.5, ad.tanh), repeat))
        for v in layers.values():
            v["edges"].append(E)
    for v in layers.values():
        v["slope"] = slope(v["edges"], v["seconds"])
    return {
        "graphs": "triangulated square lattices",
        "sides": list(sides),
        "lifting": lifting,
        "layers": layers,
        "expected": {
            "lifting": "linear in |E| + |V| R up to polylog factors for bounded R",
            "cell_attention": "O(|E| F) for bounded R",
            "edge_pool": "O(|E| log |E|)",
        },
    }


def format_bench(result: dict) -> str:
    lines = ["kind              |E| range         slope"]
    for R, s in result["lifting"].items():
        lines.append(f"lifting R={R:<6} {s['edges'][0]:>6}..{s['edges'][-1]:<8} {s['slope']:6.2f}")
    for k, s in result["layers"].items():
        lines.append(f"{k:<17} {s['edges'][0]:>6}..{s['edges'][-1]:<8} {s['slope']:6.2f}")
    return "\n".join(lines)
