"""Finite-difference gradient checks of the full model on small fixtures."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .config import RunConfig
from .lifting import LiftConfig, lift_graph
from .model import CellAttentionNetwork, make_batch
from .synthetic import cycle_edges, triangle

FIXTURES = ("triangle", "c6")


def fixture_config(name: str) -> RunConfig:
    if name == "triangle":
        return RunConfig(lift_heads=1, hidden=[3], heads=[1], pool_ratio=1.0, pool_type="hierarchical",
                         mlp_hidden=3, dropout=0.0, attention_activation="lrelu", activation="elu",
                         negative_slope=0.1, lift_activation="elu", seed=1)
    if name == "c6":
        return RunConfig(lift_heads=2, hidden=[3, 2], heads=[2, 1], attention_aggregation="cat", pool_ratio=0.5,
                         pool_type="global", mlp_hidden=3, dropout=0.0, attention_activation="tanh",
                         activation="gelu", lift_activation="sigmoid", seed=2)
    raise ValueError(f"unknown fixture {name!r}; choose from {FIXTURES}")


def fixture_problem(name: str, rng: np.random.Generator):
    """Model, batch and label for one fixture; node and edge features are random."""
    cfg = fixture_config(name)
    if name == "triangle":
        n, edges = triangle()
        ef = None
    else:
        n, edges = 6, cycle_edges(6)
        ef = rng.standard_normal((6, 2))
    cx = lift_graph(n, edges, LiftConfig(6))
    x = rng.standard_normal((n, 3))
    batch = make_batch([cx], [x], None if ef is None else [ef], [1])
    model = CellAttentionNetwork(cfg, 3, 0 if ef is None else 2, 2)
    # move batch-norm statistics and biases off their trivial initial values
    for st in model.bn.values():
        st.running_mean = rng.standard_normal(st.running_mean.shape) * 0.1
        st.running_var = 1.0 + rng.random(st.running_var.shape)
    for k, p in model.params.items():
        if ".bn." in k:
            p.data[...] += rng.standard_normal(p.shape) * 0.1
    return model, batch


def full_model_gradcheck(name: str, h: float = 1e-6, tol: float = 1e-5, seed: int = 0) -> ad.GradCheckReport:
    rng = np.random.default_rng(seed)
    model, batch = fixture_problem(name, rng)

    def loss():
        return ad.cross_entropy(model.forward(batch, train=False).logits, batch.labels)

    return ad.grad_check(loss, model.params, h=h, tol=tol)
