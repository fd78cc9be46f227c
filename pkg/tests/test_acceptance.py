"""Acceptance suite: one test per criterion, each emitting a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py`` (lines appear in the terminal
summary) or ``python tests/test_acceptance.py`` (lines printed as they finish,
exit status 1 if any criterion fails).  Datasets are read from
``$CELLATTN_DATA`` or ``./data``.
"""

from __future__ import annotations

import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from cellattn import autodiff as ad  # noqa: E402
from cellattn.checks import full_model_gradcheck  # noqa: E402
from cellattn.complex import build_incidence  # noqa: E402
from cellattn.config import load_config  # noqa: E402
from cellattn.data import parse_tud  # noqa: E402
from cellattn.lifting import LiftConfig, chordless_cycles, dataset_stats, lift_graph, lift_sample  # noqa: E402
from cellattn.model import CellAttentionNetwork, batch_from_samples, count_parameters, edge_pool  # noqa: E402
from cellattn.synthetic import (  # noqa: E402
    memorization_dataset,
    random_connected_graph,
    random_graph,
    ring_detection_dataset,
    sample_from_edges,
)
from cellattn.training import cross_validate, lift_all, run_ablations, train_fold  # noqa: E402

from conftest import DATA_DIR, have_dataset  # noqa: E402
from oracles import brute_force_chordless, closed_form_param_count  # noqa: E402

LINES: list[str] = []


def report(n: int, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}"
    LINES.append(line)
    print(line, flush=True)
    assert ok, line


# ------------------------------------------------------------------ criterion 1
TARGETS = {
    "MUTAG": [("graphs", 188, 0), ("nodes", 17.93, 0.01), ("edges", 19.79, 0.01), (5, 0.36, 0.01), (6, 2.50, 0.05)],
    "PROTEINS": [(3, 27.40, 0.10), (4, 14.08, 0.10)],
    "NCI1": [(6, 2.66, 0.05)],
}


def _measure(st, key):
    return {"graphs": st.num_graphs, "nodes": st.avg_nodes, "edges": st.avg_edges}.get(key) \
        if isinstance(key, str) else st.avg_cells[key]


def test_criterion_1_dataset_statistics():
    parts, ok = [], True
    for name, targets in TARGETS.items():
        if not have_dataset(name):
            parts.append(f"{name}: data not found under {DATA_DIR}")
            ok = False
            continue
        t0 = time.perf_counter()
        ds = parse_tud(DATA_DIR, name)
        st = dataset_stats(ds.graphs, LiftConfig(6), name)
        secs = time.perf_counter() - t0
        good = secs < 120
        vals = []
        for key, want, tol in targets:
            got = _measure(st, key)
            label = key if isinstance(key, str) else f"{key}-cells"
            hit = abs(got - want) <= tol + 1e-12
            if name == "MUTAG" and key in ("nodes", "edges"):
                hit = f"{got:.2f}" == f"{want:.2f}"
            good &= hit
            vals.append(f"{label} {got:.2f}" if isinstance(got, float) else f"{label} {got}")
        parts.append(f"{name}: {', '.join(vals)} in {secs:.1f}s{'' if good else ' (MISMATCH)'}")
        ok &= good
    report(1, ok, "; ".join(parts))


# ------------------------------------------------------------------ criterion 2
def test_criterion_2_boundary_of_boundary():
    checked = bad = 0
    if have_dataset("MUTAG"):
        for g in parse_tud(DATA_DIR, "MUTAG").graphs:
            inc = build_incidence(lift_sample(g))
            bad += bool(np.any(inc.b1 @ inc.b2))
            checked += 1
    rng = np.random.default_rng(2)
    for _ in range(500):
        n = int(rng.integers(3, 13))
        inc = build_incidence(lift_graph(n, random_graph(rng, n, int(rng.integers(0, n * (n - 1) // 2 + 1)))))
        assert inc.b1.dtype.kind == "i"
        bad += bool(np.any(inc.b1 @ inc.b2))
        checked += 1
    ok = bad == 0 and checked == 500 + (188 if have_dataset("MUTAG") else 0) and have_dataset("MUTAG")
    report(2, ok, f"{checked} complexes (MUTAG {'included' if have_dataset('MUTAG') else 'MISSING'}), "
                  f"{bad} with nonzero B1 B2")


# ------------------------------------------------------------------ criterion 3
def test_criterion_3_chordless_oracle():
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    mismatches = 0
    for _ in range(1000):
        n = int(rng.integers(3, 11))
        m = int(rng.integers(0, min(20, n * (n - 1) // 2) + 1))
        R = int(rng.integers(3, 7))
        edges = random_graph(rng, n, m)
        ours = {frozenset(c) for c in chordless_cycles(n, edges, R)}
        mismatches += ours != brute_force_chordless(n, edges, R)
    secs = time.perf_counter() - t0
    report(3, mismatches == 0 and secs < 60, f"1000 graphs, {mismatches} discrepancies, {secs:.1f}s")


# ------------------------------------------------------------------ criterion 4
def _permute(s, perm):
    x = np.empty_like(s.node_features)
    x[perm] = s.node_features
    mapped = [(min(perm[u], perm[v]), max(perm[u], perm[v])) for u, v in s.edges]
    order = sorted(range(len(mapped)), key=lambda i: mapped[i])
    t = sample_from_edges(s.num_nodes, mapped, s.label, x)
    t.edge_features = s.edge_features[order]
    where = np.empty(len(order), dtype=int)
    where[order] = np.arange(len(order))
    return t, where


def test_criterion_4_permutation_invariance():
    rng = np.random.default_rng(4)
    base_cfg = load_config("mutag").replace(lift_symmetric=True, dropout=0.0)
    models = {}
    for k in (1.0, 0.6):
        model = CellAttentionNetwork(base_cfg.replace(pool_ratio=k), 7, 4, 2, seed=4)
        for st in model.bn.values():
            st.running_mean = rng.standard_normal(st.running_mean.shape) * 0.1
            st.running_var = 0.5 + rng.random(st.running_var.shape)
        models[k] = model
    worst_logit = worst_edge = 0.0
    for _ in range(50):
        n = int(rng.integers(5, 16))
        s = sample_from_edges(n, random_connected_graph(rng, n, n + int(rng.integers(0, n))), 0,
                              rng.standard_normal((n, 7)))
        s.edge_features = rng.standard_normal((s.num_edges, 4))
        cx = lift_sample(s)
        base = {k: m.forward(batch_from_samples([s], [cx])) for k, m in models.items()}
        for _ in range(5):
            t, where = _permute(s, rng.permutation(n))
            tcx = lift_sample(t)
            for k, m in models.items():
                out = m.forward(batch_from_samples([t], [tcx]))
                worst_logit = max(worst_logit, float(np.max(np.abs(out.logits.data - base[k].logits.data))))
                if k == 1.0:
                    diff = out.edge_outputs.data[where] - base[k].edge_outputs.data
                    worst_edge = max(worst_edge, float(np.max(np.abs(diff))))
    ok = worst_logit < 1e-6 and worst_edge < 1e-6
    report(4, ok, f"250 permuted graphs, max logit gap {worst_logit:.2e} (k=1.0 and k=0.6), "
                  f"max per-edge gap {worst_edge:.2e} (k=1.0); symmetric lift")


# ------------------------------------------------------------------ criterion 5
def _per_op_checks():
    rng = np.random.default_rng(5)

    def P(*shape):
        return ad.Tensor(rng.standard_normal(shape), requires_grad=True)

    w = {}

    def dot(t):
        if t.shape not in w:
            w[t.shape] = rng.standard_normal(t.shape)
        return ad.sum_all(ad.mul(t, ad.constant(w[t.shape])))

    a, b, v, c = P(4, 3), P(3, 5), P(4), P(4, 3)
    g = P(6, 2)
    s = P(9)
    bn_state = ad.BatchNormState(3)
    bw, bb = P(3), P(3)
    x = P(5, 4)
    x.data[np.abs(x.data) < 1e-3] = 0.5
    groups = np.array([0, 0, 1, 3, 3, 3, 1, 0, 3])
    cases = {
        "matmul": (lambda: dot(ad.matmul(a, b)), {"a": a, "b": b}),
        "add": (lambda: dot(ad.add(ad.add(a, c), bw)), {"a": a, "c": c, "w": bw}),
        "scale": (lambda: dot(ad.scale(a, 1.7)), {"a": a}),
        "mul": (lambda: dot(ad.mul(ad.mul(a, c), v)), {"a": a, "c": c, "v": v}),
        "concat": (lambda: dot(ad.concat([a, c])), {"a": a, "c": c}),
        "gather": (lambda: dot(ad.gather(g, np.array([0, 5, 5, 1, 0]))), {"g": g}),
        "scatter_add": (lambda: dot(ad.scatter_add(g, np.array([1, 0, 1, 3, 3, 1]), 5)), {"g": g}),
        "masked_softmax": (lambda: dot(ad.masked_softmax(s, groups, 5)), {"s": s}),
        "dropout": (lambda: dot(ad.dropout(a, 0.4, True, np.random.default_rng(0))), {"a": a}),
        "batch_norm_train": (lambda: dot(ad.batch_norm_1d(a, bw, bb, ad.BatchNormState(3), True)),
                             {"a": a, "w": bw, "b": bb}),
        "batch_norm_eval": (lambda: dot(ad.batch_norm_1d(a, bw, bb, bn_state, False)), {"a": a, "w": bw, "b": bb}),
        "sum_rows": (lambda: dot(ad.sum_rows(a)), {"a": a}),
        "cross_entropy": (lambda: ad.cross_entropy(a, np.array([0, 2, 1, 1])), {"a": a}),
    }
    for name in ("relu", "lrelu", "elu", "tanh", "sigmoid", "gelu"):
        f = ad.activation(name, 0.1)
        cases[name] = (lambda f=f: dot(f(x)), {"x": x})
    out = {}
    for name, (fn, params) in cases.items():
        out[name] = ad.grad_check(fn, params, h=1e-6, tol=1e-6)
    return out


def test_criterion_5_gradient_fidelity():
    full = {name: full_model_gradcheck(name, h=1e-6, tol=1e-5) for name in ("triangle", "c6")}
    ops = _per_op_checks()
    failed_ops = [k for k, r in ops.items() if not r.passed]
    ok = all(r.passed for r in full.values()) and not failed_ops
    worst_op = max(r.worst_error for r in ops.values())
    detail = ", ".join(f"{k} {r.checked} entries worst {r.worst_error:.1e}" for k, r in full.items())
    report(5, ok, f"full model: {detail}; {len(ops)} ops at 1e-6, worst {worst_op:.1e}"
                  + (f", failed {failed_ops}" if failed_ops else ""))


# ------------------------------------------------------------------ criterion 6
def test_criterion_6_attention_normalisation():
    if not have_dataset("MUTAG"):
        report(6, False, f"MUTAG not found under {DATA_DIR}")
    ds = parse_tud(DATA_DIR, "MUTAG")
    cfg = load_config("mutag")
    model = CellAttentionNetwork(cfg, ds.num_node_features, ds.num_edge_features, 2, seed=6)
    cxs = lift_all(ds.graphs, 6)
    worst, groups, empty, finite = 0.0, 0, 0, True
    for lo in range(0, len(ds), 64):
        res = model.forward(batch_from_samples(ds.graphs[lo:lo + 64], cxs[lo:lo + 64]), record=True)
        finite &= bool(np.all(np.isfinite(res.logits.data)))
        for layer, cx in zip(res.trace["layers"], res.complexes):
            for kind in ("lower", "upper"):
                pairs = layer[f"{kind}_pairs"]
                has = np.bincount(pairs[0], minlength=cx.num_edges) > 0 if pairs.size else np.zeros(cx.num_edges, bool)
                empty += int((~has).sum())
                for alpha in layer[f"{kind}_alpha"]:
                    finite &= bool(np.all(np.isfinite(alpha)))
                    if alpha.size:
                        sums = np.bincount(pairs[0], weights=alpha, minlength=cx.num_edges)[has]
                        worst = max(worst, float(np.max(np.abs(sums - 1.0))))
                        groups += int(has.sum())
    ok = worst <= 1e-12 and finite and empty > 0
    report(6, ok, f"{groups} nonempty neighbourhoods, max |sum alpha - 1| = {worst:.1e}, "
                  f"{empty} empty neighbourhoods, all finite: {finite}")


# ------------------------------------------------------------------ criterion 7
def test_criterion_7_pooling_contract():
    rng = np.random.default_rng(7)
    complexes = []
    for _ in range(100):
        n = int(rng.integers(4, 14))
        complexes.append(lift_graph(n, random_connected_graph(rng, n, n + int(rng.integers(0, 2 * n)))))
    bad_count = bad_ring = 0
    for k in (0.5, 0.6, 0.75, 1.0):
        for cx in complexes:
            h = ad.constant(rng.standard_normal((cx.num_edges, 4)))
            pr = edge_pool(h, cx, ad.constant(rng.standard_normal(4)), k, ad.tanh)
            bad_count += pr.complex.num_edges != math.ceil(k * cx.num_edges)
            before = {r.vertices for r in cx.rings}
            bad_ring += not {r.vertices for r in pr.complex.rings} <= before
    report(7, bad_count == 0 and bad_ring == 0,
           f"400 poolings, {bad_count} wrong survivor counts, {bad_ring} with new rings")


# ------------------------------------------------------------------ criterion 8
def test_criterion_8_desk_scale_learning():
    mem = memorization_dataset()
    cfg = load_config("synthetic").replace(epochs=50, batch_size=16)
    res = train_fold(mem.graphs, mem.graphs, cfg, num_classes=2)
    hit = [m.epoch for m in res.epochs if m.train_acc == 1.0]
    ok_a = bool(hit)

    rings = ring_detection_dataset()
    rep_b = cross_validate(rings, load_config("synthetic").replace(epochs=30))
    ok_b = rep_b.summary["accuracy"] >= 0.95

    if have_dataset("MUTAG"):
        t0 = time.perf_counter()
        rep_c = cross_validate(parse_tud(DATA_DIR, "MUTAG"), load_config("mutag").replace(epochs=150, seed=0))
        secs = time.perf_counter() - t0
        ok_c = rep_c.summary["accuracy"] >= 0.80 and secs <= 1800
        c = f"(c) MUTAG 10-fold {100 * rep_c.summary['accuracy']:.2f}% at epoch {rep_c.summary['epoch']} in {secs:.0f}s"
    else:
        ok_c, c = False, f"(c) MUTAG not found under {DATA_DIR}"
    report(8, ok_a and ok_b and ok_c,
           f"(a) memorisation 100% train at epoch {hit[0] if hit else 'never'}; "
           f"(b) ring detection {100 * rep_b.summary['accuracy']:.1f}% within 30 epochs; {c}")


# ------------------------------------------------------------------ criterion 9
def test_criterion_9_ablation_direction():
    rings = ring_detection_dataset()
    base, runs, rows = run_ablations(rings, load_config("synthetic"), ["no_upper"], name="synthetic-rings")
    delta = rows[0]["delta"]
    report(9, delta <= -0.10, f"baseline {100 * base.summary['accuracy']:.1f}%, no_upper "
                              f"{100 * runs['no_upper'].summary['accuracy']:.1f}% (delta {100 * delta:+.1f} points, "
                              f"need <= -10)")


# ----------------------------------------------------------------- criterion 10
DIMS = {"mutag": (7, 4), "ptc": (20, 4), "proteins": (3, 0), "nci1": (37, 0), "nci109": (38, 0)}


def test_criterion_10_parameter_counts():
    parts, ok = [], True
    for name, (fn, fe) in DIMS.items():
        cfg = load_config(name)
        got = count_parameters(CellAttentionNetwork(cfg, fn, fe, 2))
        want = closed_form_param_count(cfg, fn, fe, 2)
        ok &= got == want
        parts.append(f"{name} {got['total']}{'' if got == want else ' != ' + str(want['total'])}")
    report(10, ok, "exact per-block match: " + ", ".join(parts))


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted((k, v) for k, v in globals().items() if k.startswith("test_criterion_")):
        try:
            fn()
        except AssertionError:
            failed += 1
        except Exception as exc:  # a crash is a failure, not an abort of the suite
            print(f"[FAIL] {name}: {type(exc).__name__}: {exc}", flush=True)
            failed += 1
    sys.exit(1 if failed else 0)
