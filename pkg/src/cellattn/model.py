"""Cell attention network: attentional lift, cell attention, edge pooling, readout."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .autodiff.checkpoint import check_shapes
from .complex import CellComplex
from .config import RunConfig


# ---------------------------------------------------------------- batching
@dataclass
class GraphBatch:
    """Disjoint union of lifted graphs; readouts are taken per graph."""

    complex: CellComplex
    node_features: np.ndarray
    edge_features: np.ndarray | None
    edge_graph: np.ndarray  # graph id for every edge
    num_graphs: int
    labels: np.ndarray | None = None


def make_batch(complexes: Sequence[CellComplex], node_features: Sequence[np.ndarray],
               edge_features: Sequence[np.ndarray | None] | None = None,
               labels: Sequence[int] | None = None) -> GraphBatch:
    for cx, x in zip(complexes, node_features):
        if x.shape[0] != cx.num_vertices:
            raise ValueError(f"node feature rows {x.shape[0]} != vertices {cx.num_vertices}")
    union = CellComplex.disjoint_union(list(complexes))
    ef = None
    if edge_features is not None and any(e is not None for e in edge_features):
        ef = np.concatenate([e for e in edge_features], axis=0)
        if ef.shape[0] != union.num_edges:
            raise ValueError(f"edge feature rows {ef.shape[0]} != edges {union.num_edges}")
    edge_graph = np.repeat(np.arange(len(complexes)), [cx.num_edges for cx in complexes])
    return GraphBatch(
        union,
        np.concatenate(list(node_features), axis=0),
        ef,
        edge_graph,
        len(complexes),
        None if labels is None else np.asarray(labels, dtype=np.int64),
    )


def batch_from_samples(samples, complexes) -> GraphBatch:
    return make_batch(
        complexes,
        [s.node_features for s in samples],
        [s.edge_features for s in samples] if samples and samples[0].edge_features is not None else None,
        [s.label for s in samples],
    )


# ------------------------------------------------------------- primitives
def keep_count(ratio: float, n: int) -> int:
    """``ceil(ratio * n)`` guarded against float noise such as 0.7 * 10."""
    return int(math.ceil(round(ratio * n, 9)))


def topk_mask(scores: np.ndarray, groups: np.ndarray, ratio: float) -> np.ndarray:
    """Per group, flag the ``ceil(ratio * size)`` highest scores.

    Ties go to the lower index.
    """
    n = len(scores)
    if n == 0:
        return np.zeros(0, dtype=bool)
    idx = np.arange(n)
    order = np.lexsort((idx, -scores, groups))
    sizes = np.bincount(groups)
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    sorted_groups = groups[order]
    rank = np.arange(n) - starts[sorted_groups]
    quota = np.array([keep_count(ratio, s) for s in sizes])
    mask = np.zeros(n, dtype=bool)
    mask[order[rank < quota[sorted_groups]]] = True
    return mask


def attentional_lift(x: np.ndarray, cx: CellComplex, weight: Tensor, act, symmetric: bool = False,
                     edge_features: np.ndarray | None = None) -> Tensor:
    """Edge features ``act(a_k . [x_i || x_j])`` for every lift head ``k``.

    ``weight`` is ``(2 * F_n, heads)``; column ``k`` is ``a_k``.  Input edge
    features, if given, are appended after the learned ones.
    """
    src, dst = cx.edges[:, 0], cx.edges[:, 1]
    pair = np.concatenate([x[src], x[dst]], axis=1)
    scores = ad.matmul(ad.constant(pair, dtype=weight.dtype), weight)
    if symmetric:
        swapped = np.concatenate([x[dst], x[src]], axis=1)
        scores = ad.scale(ad.add(scores, ad.matmul(ad.constant(swapped, dtype=weight.dtype), weight)), 0.5)
    out = act(scores)
    if edge_features is not None:
        if edge_features.shape[0] != cx.num_edges:
            raise ad.ShapeError(f"edge features have {edge_features.shape[0]} rows for {cx.num_edges} edges")
        out = ad.concat([out, ad.constant(edge_features, dtype=weight.dtype)])
    return out


def dot_lift(x: np.ndarray, cx: CellComplex, dtype=np.float64, edge_features: np.ndarray | None = None) -> Tensor:
    """Parameter-free lift ``x_e = <x_i, x_j>`` used by the no-lift ablation."""
    src, dst = cx.edges[:, 0], cx.edges[:, 1]
    xe = np.einsum("ij,ij->i", x[src], x[dst])[:, None]
    if edge_features is not None:
        xe = np.concatenate([xe, edge_features], axis=1)
    return ad.constant(xe, dtype=dtype)


def neighbourhood_message(z: Tensor, att: Tensor, pairs: np.ndarray, num_edges: int, att_act,
                          trace: list | None = None) -> Tensor:
    """Attention-weighted sum of ``z[k]`` over each edge's neighbour pairs ``(e, k)``.

    ``att`` has length ``2 * width``: the first half scores the receiving
    edge, the second half the neighbour.
    """
    width = z.shape[1]
    if pairs.shape[1] == 0:
        if trace is not None:
            trace.append(np.zeros(0))
        return ad.constant(np.zeros((num_edges, width), dtype=z.dtype), dtype=z.dtype)
    e, k = pairs[0], pairs[1]
    s_self = ad.matmul(z, _slice(att, 0, width))
    s_nbr = ad.matmul(z, _slice(att, width, 2 * width))
    omega = att_act(ad.add(ad.gather(s_self, e), ad.gather(s_nbr, k)))
    alpha = ad.masked_softmax(omega, e, num_edges)
    if trace is not None:
        trace.append(alpha.data.copy())
    return ad.scatter_add(ad.mul(ad.gather(z, k), alpha), e, num_edges)


def _slice(v: Tensor, lo: int, hi: int) -> Tensor:
    return ad.gather(v, np.arange(lo, hi))


@dataclass
class HeadParams:
    W_s: Tensor
    W_d: Tensor
    W_u: Tensor
    a_d: Tensor
    a_u: Tensor


def cell_attention_forward(h: Tensor, cx: CellComplex, heads: Sequence[HeadParams], *, att_act, eps: float = 0.0,
                           aggregation: str = "cat", trace: dict | None = None) -> Tensor:
    """Pre-activation output of one cell attention layer.

    Per head: ``(1 + eps) h W_s + sum_lower alpha W_d h_k + sum_upper alpha W_u h_k``;
    heads are concatenated or averaged.
    """
    E = cx.num_edges
    outs = []
    for hp in heads:
        zs = ad.matmul(h, hp.W_s)
        zd = ad.matmul(h, hp.W_d)
        zu = ad.matmul(h, hp.W_u)
        lower = neighbourhood_message(zd, hp.a_d, cx.lower_pairs, E, att_act,
                                      None if trace is None else trace.setdefault("lower_alpha", []))
        upper = neighbourhood_message(zu, hp.a_u, cx.upper_pairs, E, att_act,
                                      None if trace is None else trace.setdefault("upper_alpha", []))
        self_term = zs if eps == 0.0 else ad.scale(zs, 1.0 + eps)
        outs.append(ad.add(ad.add(self_term, lower), upper))
    if len(outs) == 1:
        return outs[0]
    if aggregation == "cat":
        return ad.concat(outs)
    return ad.scale(ad.add_n(outs), 1.0 / len(outs))


@dataclass
class PoolResult:
    h: Tensor
    complex: CellComplex
    kept: np.ndarray
    gamma: Tensor
    edge_graph: np.ndarray


def edge_pool(h_tilde: Tensor, cx: CellComplex, a_p: Tensor, ratio: float, act, edge_graph: np.ndarray | None = None,
              scaling: bool = True) -> PoolResult:
    """Score edges, keep the top ``ceil(ratio * |E|)`` (per graph) and rewire the complex."""
    E = cx.num_edges
    if edge_graph is None:
        edge_graph = np.zeros(E, dtype=np.int64)
    if E == 0:
        empty = ad.constant(np.zeros((0,), dtype=h_tilde.dtype))
        return PoolResult(h_tilde, cx, np.zeros(0, dtype=np.int64), empty, edge_graph)
    gamma = act(ad.matmul(h_tilde, a_p))
    mask = topk_mask(gamma.data, edge_graph, ratio)
    if mask.all():
        kept = np.arange(E)
        new_cx = cx
        h = ad.mul(h_tilde, gamma) if scaling else h_tilde
    else:
        new_cx, kept = cx.subcomplex(mask)
        h_kept = ad.gather(h_tilde, kept)
        h = ad.mul(h_kept, ad.gather(gamma, kept)) if scaling else h_kept
    return PoolResult(h, new_cx, kept, gamma, edge_graph[kept])


def local_readout(h: Tensor, edge_graph: np.ndarray | None = None, num_graphs: int = 1) -> Tensor:
    """Sum of edge vectors per graph, shape ``(num_graphs, F)``; empty graphs read out zero."""
    if edge_graph is None:
        edge_graph = np.zeros(h.shape[0], dtype=np.int64)
    return ad.scatter_add(h, edge_graph, num_graphs)


def global_readout(per_layer: Sequence[Tensor], mode: str) -> Tensor:
    if mode == "hierarchical":
        widths = {t.shape[-1] for t in per_layer}
        if len(widths) != 1:
            raise ValueError(f"hierarchical readout needs equal widths, got {sorted(widths)}")
        return ad.add_n(list(per_layer))
    if mode == "global":
        return per_layer[-1]
    raise ValueError(f"unknown readout mode {mode!r}")


# ------------------------------------------------------------------- model
@dataclass
class ForwardResult:
    logits: Tensor
    edge_outputs: Tensor  # last-layer edge features after pooling
    complexes: list[CellComplex]
    kept: list[np.ndarray]
    trace: dict = field(default_factory=dict)


class CellAttentionNetwork:
    """Parameters and forward pass of a cell attention network.

    Parameters live in ``self.params`` (name -> Tensor, insertion ordered);
    batch-norm running statistics in ``self.bn``.
    """

    def __init__(self, cfg: RunConfig, num_node_features: int, num_edge_features: int, num_classes: int,
                 seed: int | None = None):
        self.cfg = cfg
        self.num_node_features = num_node_features
        self.num_edge_features = num_edge_features
        self.num_classes = num_classes
        self.dtype = cfg.dtype
        self.params: dict[str, Tensor] = {}
        self.bn: dict[str, ad.BatchNormState] = {}
        self.frozen: set[str] = set()
        rng = np.random.default_rng(cfg.seed if seed is None else seed)
        self._build(rng)

    # -------------------------------------------------------------- params
    def _param(self, name: str, shape: tuple, rng, fan_in: int | None = None, fill: float | None = None) -> Tensor:
        if fill is not None:
            data = np.full(shape, fill, dtype=self.dtype)
        else:
            bound = 1.0 / math.sqrt(fan_in if fan_in else shape[0])
            data = rng.uniform(-bound, bound, size=shape).astype(self.dtype)
        t = Tensor(data, requires_grad=True, dtype=self.dtype, name=name)
        self.params[name] = t
        return t

    def _build(self, rng) -> None:
        cfg = self.cfg
        fn, fe = self.num_node_features, self.num_edge_features
        if cfg.no_lift:
            width = 1 + fe
        else:
            self._param("lift.a", (2 * fn, cfg.lift_heads), rng, fan_in=2 * fn)
            width = cfg.lift_heads + fe
        self.input_width = width
        widths = cfg.layer_output_widths()
        for l, (f_head, n_heads) in enumerate(zip(cfg.hidden, cfg.heads)):
            for h in range(n_heads):
                p = f"layer{l}.head{h}."
                self._param(p + "W_s", (width, f_head), rng, fan_in=width)
                self._param(p + "W_d", (width, f_head), rng, fan_in=width)
                self._param(p + "W_u", (width, f_head), rng, fan_in=width)
                if cfg.lower_frozen:
                    self._param(p + "a_d", (2 * f_head,), rng, fill=1.0)
                    self.frozen.add(p + "a_d")
                else:
                    self._param(p + "a_d", (2 * f_head,), rng)
                if cfg.upper_frozen:
                    self._param(p + "a_u", (2 * f_head,), rng, fill=1.0)
                    self.frozen.add(p + "a_u")
                else:
                    self._param(p + "a_u", (2 * f_head,), rng)
            out = widths[l]
            if cfg.batch_norm:
                self._param(f"layer{l}.bn.weight", (out,), rng, fill=1.0)
                self._param(f"layer{l}.bn.bias", (out,), rng, fill=0.0)
                self.bn[f"layer{l}.bn"] = ad.BatchNormState(out, self.dtype)
            if not cfg.no_pooling:
                self._param(f"layer{l}.pool.a", (out,), rng)
            width = out
        m = cfg.mlp_hidden
        self._param("mlp.W1", (width, m), rng, fan_in=width)
        self._param("mlp.b1", (m,), rng, fan_in=width)
        if cfg.batch_norm:
            self._param("mlp.bn.weight", (m,), rng, fill=1.0)
            self._param("mlp.bn.bias", (m,), rng, fill=0.0)
            self.bn["mlp.bn"] = ad.BatchNormState(m, self.dtype)
        self._param("mlp.W2", (m, self.num_classes), rng, fan_in=m)
        self._param("mlp.b2", (self.num_classes,), rng, fan_in=m)

    def trainable(self) -> dict[str, Tensor]:
        return {k: v for k, v in self.params.items() if k not in self.frozen}

    def head_params(self, layer: int) -> list[HeadParams]:
        p = self.params
        return [
            HeadParams(p[f"layer{layer}.head{h}.W_s"], p[f"layer{layer}.head{h}.W_d"], p[f"layer{layer}.head{h}.W_u"],
                       p[f"layer{layer}.head{h}.a_d"], p[f"layer{layer}.head{h}.a_u"])
            for h in range(self.cfg.heads[layer])
        ]

    # ------------------------------------------------------------- forward
    def forward(self, batch: GraphBatch, train: bool = False, rng: np.random.Generator | None = None,
                record: bool = False) -> ForwardResult:
        cfg = self.cfg
        act = ad.activation(cfg.activation, cfg.negative_slope)
        att_act = ad.activation(cfg.attention_activation, cfg.negative_slope)
        pool_act = ad.activation(cfg.pool_activation, cfg.negative_slope)
        x = batch.node_features.astype(self.dtype, copy=False)
        ef = None if batch.edge_features is None else batch.edge_features.astype(self.dtype, copy=False)
        cx = batch.complex
        if cfg.no_lift:
            h = dot_lift(x, cx, self.dtype, ef)
        else:
            lift_act = ad.activation(cfg.lift_activation, cfg.negative_slope)
            h = attentional_lift(x, cx, self.params["lift.a"], lift_act, cfg.lift_symmetric, ef)
            h = ad.dropout(h, cfg.lift_dropout, train, rng)

        edge_graph = batch.edge_graph
        readouts, complexes, kept_all = [], [cx], []
        trace: dict = {"layers": []} if record else {}
        for l in range(cfg.num_layers):
            layer_trace = {} if record else None
            h = ad.dropout(h, cfg.dropout, train, rng)
            z = cell_attention_forward(h, cx, self.head_params(l), att_act=att_act, eps=cfg.self_eps,
                                       aggregation=cfg.attention_aggregation, trace=layer_trace)
            if cfg.batch_norm:
                z = ad.batch_norm_1d(z, self.params[f"layer{l}.bn.weight"], self.params[f"layer{l}.bn.bias"],
                                     self.bn[f"layer{l}.bn"], train)
            h_tilde = act(z)
            if cfg.no_pooling:
                h = h_tilde
                kept_all.append(np.arange(cx.num_edges))
            else:
                pr = edge_pool(h_tilde, cx, self.params[f"layer{l}.pool.a"], cfg.pool_ratio, pool_act,
                               edge_graph, cfg.pool_scaling)
                h, cx, edge_graph = pr.h, pr.complex, pr.edge_graph
                kept_all.append(pr.kept)
                if record:
                    layer_trace["gamma"] = pr.gamma.data.copy()
                    layer_trace["kept"] = pr.kept.copy()
            complexes.append(cx)
            if record:
                layer_trace["lower_pairs"] = complexes[-2].lower_pairs.copy()
                layer_trace["upper_pairs"] = complexes[-2].upper_pairs.copy()
                trace["layers"].append(layer_trace)
            if cfg.hierarchical:
                readouts.append(local_readout(h, edge_graph, batch.num_graphs))
        if not cfg.hierarchical:
            readouts.append(local_readout(h, edge_graph, batch.num_graphs))
        h_c = global_readout(readouts, "hierarchical" if cfg.hierarchical else "global")
        logits = self.mlp_head(h_c, train, rng)
        return ForwardResult(logits, h, complexes, kept_all, trace)

    def mlp_head(self, h_c: Tensor, train: bool = False, rng=None) -> Tensor:
        cfg = self.cfg
        p = self.params
        act = ad.activation(cfg.activation, cfg.negative_slope)
        z = ad.add(ad.matmul(h_c, p["mlp.W1"]), p["mlp.b1"])
        if cfg.batch_norm:
            z = ad.batch_norm_1d(z, p["mlp.bn.weight"], p["mlp.bn.bias"], self.bn["mlp.bn"], train)
        z = ad.dropout(act(z), cfg.dropout, train, rng)
        return ad.add(ad.matmul(z, p["mlp.W2"]), p["mlp.b2"])

    __call__ = forward

    # -------------------------------------------------------- persistence
    def state(self) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray]]:
        params = {k: v.data.copy() for k, v in self.params.items()}
        buffers = {}
        for k, st in self.bn.items():
            buffers[k + ".running_mean"] = st.running_mean.copy()
            buffers[k + ".running_var"] = st.running_var.copy()
        return params, buffers

    def load_state(self, params: dict[str, np.ndarray], buffers: dict[str, np.ndarray]) -> None:
        check_shapes({k: v.shape for k, v in self.params.items()}, params)
        expected_buf = {}
        for k, st in self.bn.items():
            expected_buf[k + ".running_mean"] = st.running_mean.shape
            expected_buf[k + ".running_var"] = st.running_var.shape
        check_shapes(expected_buf, buffers, "buffer")
        for k, v in params.items():
            self.params[k].data[...] = v
        for k, st in self.bn.items():
            st.running_mean = buffers[k + ".running_mean"].astype(self.dtype)
            st.running_var = buffers[k + ".running_var"].astype(self.dtype)


# ------------------------------------------------------------ param counts
def count_parameters(model: CellAttentionNetwork) -> dict[str, int]:
    """Learnable entries per block (frozen ablation vectors included)."""
    counts: dict[str, int] = {}
    for name, t in model.params.items():
        if name.startswith("lift."):
            block = "lift"
        elif ".head" in name:
            block = name.split(".")[0] + ".attention"
        elif ".pool." in name:
            block = name.split(".")[0] + ".pool"
        elif ".bn." in name:
            block = name.split(".bn.")[0] + ".batch_norm"
        else:
            block = "mlp"
        counts[block] = counts.get(block, 0) + int(t.data.size)
    counts["total"] = sum(counts.values())
    return counts


# ---------------------------------------------------------- explainability
def attention_report(model: CellAttentionNetwork, samples, complexes) -> list[dict]:
    """Per graph and layer: edge list, lower/upper pairs with their alpha per head, gamma and kept edges.

    Graphs are run one at a time in eval mode so indices are local to each graph.
    """
    out = []
    for gi, (s, cx) in enumerate(zip(samples, complexes)):
        batch = batch_from_samples([s], [cx])
        res = model.forward(batch, train=False, record=True)
        layers = []
        for l, tr in enumerate(res.trace["layers"]):
            entry = {
                "layer": l,
                "edges": res.complexes[l].edges.tolist(),
                "lower_pairs": tr["lower_pairs"].tolist(),
                "lower_alpha": [a.tolist() for a in tr.get("lower_alpha", [])],
                "upper_pairs": tr["upper_pairs"].tolist(),
                "upper_alpha": [a.tolist() for a in tr.get("upper_alpha", [])],
            }
            if "gamma" in tr:
                entry["gamma"] = tr["gamma"].tolist()
                entry["kept"] = tr["kept"].tolist()
            layers.append(entry)
        probs = np.exp(res.logits.data - res.logits.data.max(axis=1, keepdims=True))
        probs /= probs.sum(axis=1, keepdims=True)
        out.append({"graph": gi, "label": int(s.label), "probabilities": probs[0].tolist(), "layers": layers})
    return out
