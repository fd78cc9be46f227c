"""Training loop, 10-fold cross-validation and the ablation harness."""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff.checkpoint import save_checkpoint
from .complex import CellComplex
from .config import RunConfig
from .data import FoldPlan, GraphSample, make_folds
from .lifting import LiftConfig, lift_sample
from .model import CellAttentionNetwork, batch_from_samples

log = logging.getLogger(__name__)

REPORT_VERSION = 1
ABLATIONS = ("no_pooling", "no_attention", "no_upper", "no_lower", "no_lift")


def lift_all(samples: Sequence[GraphSample], max_ring_size: int) -> list[CellComplex]:
    cfg = LiftConfig(max_ring_size)
    return [lift_sample(s, cfg) for s in samples]


@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float

    def as_dict(self) -> dict:
        return self.__dict__.copy()


@dataclass
class FoldResult:
    epochs: list[EpochMetrics]
    best_epoch: int
    best_params: dict[str, np.ndarray]
    best_buffers: dict[str, np.ndarray]
    diverged: str | None = None
    seconds: float = 0.0

    @property
    def val_acc(self) -> list[float]:
        return [m.val_acc for m in self.epochs]


def infer_dims(samples: Sequence[GraphSample]) -> tuple[int, int]:
    s = samples[0]
    fe = 0 if s.edge_features is None else s.edge_features.shape[1]
    return s.node_features.shape[1], fe


def build_model(cfg: RunConfig, num_node_features: int, num_edge_features: int, num_classes: int,
                seed: int | None = None) -> CellAttentionNetwork:
    return CellAttentionNetwork(cfg, num_node_features, num_edge_features, num_classes, seed=seed)


def evaluate(model: CellAttentionNetwork, samples, complexes, batch_size: int = 256) -> tuple[float, float, np.ndarray]:
    """Mean cross-entropy, accuracy and predicted classes in eval mode."""
    if not samples:
        return math.nan, math.nan, np.zeros(0, dtype=np.int64)
    total, preds = 0.0, []
    for lo in range(0, len(samples), batch_size):
        batch = batch_from_samples(samples[lo:lo + batch_size], complexes[lo:lo + batch_size])
        logits = model.forward(batch, train=False).logits
        total += float(ad.cross_entropy(logits, batch.labels).data) * batch.num_graphs
        preds.append(np.argmax(logits.data, axis=1))
    preds = np.concatenate(preds)
    labels = np.array([s.label for s in samples])
    return total / len(samples), float(np.mean(preds == labels)), preds


def train_fold(train: Sequence[GraphSample], val: Sequence[GraphSample], cfg: RunConfig, *,
               num_classes: int | None = None, train_complexes=None, val_complexes=None,
               seed: int | None = None, epochs: int | None = None,
               on_epoch: Callable[[EpochMetrics], None] | None = None) -> FoldResult:
    """Train one model with mini-batch AdamW, recording metrics every epoch.

    A non-finite batch loss stops the fold; the metrics recorded so far are
    kept and ``diverged`` holds the diagnostic.
    """
    t0 = time.perf_counter()
    train, val = list(train), list(val)
    if train_complexes is None:
        train_complexes = lift_all(train, cfg.max_ring_size)
    if val_complexes is None:
        val_complexes = lift_all(val, cfg.max_ring_size)
    if num_classes is None:
        num_classes = int(max(s.label for s in train + val)) + 1
    seed = cfg.seed if seed is None else seed
    epochs = cfg.epochs if epochs is None else epochs
    fn, fe = infer_dims(train)
    model = build_model(cfg, fn, fe, num_classes, seed=seed)
    opt = ad.AdamW(model.params, lr=cfg.lr, weight_decay=cfg.weight_decay, frozen=model.frozen)
    rng = np.random.default_rng(seed)

    history: list[EpochMetrics] = []
    best = (-1.0, -1, *model.state())
    diverged = None
    n = len(train)
    for epoch in range(epochs):
        order = rng.permutation(n)
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            batch = batch_from_samples([train[i] for i in idx], [train_complexes[i] for i in idx])
            opt.zero_grad()
            out = model.forward(batch, train=True, rng=rng)
            loss = ad.cross_entropy(out.logits, batch.labels)
            if not np.isfinite(loss.data):
                diverged = f"non-finite loss {float(loss.data)} at epoch {epoch}, batch starting {lo}"
                break
            loss.backward()
            opt.step()
        if diverged:
            log.warning(diverged)
            break
        tr_loss, tr_acc, _ = evaluate(model, train, train_complexes)
        va_loss, va_acc, _ = evaluate(model, val, val_complexes)
        m = EpochMetrics(epoch, tr_loss, tr_acc, va_loss, va_acc)
        history.append(m)
        if on_epoch:
            on_epoch(m)
        if va_acc > best[0]:
            best = (va_acc, epoch, *model.state())
    return FoldResult(history, best[1], best[2], best[3], diverged, time.perf_counter() - t0)


# ----------------------------------------------------------- cross-validation
def summarize(val_acc: np.ndarray) -> dict:
    """Max over epochs of the across-fold mean validation accuracy.

    ``val_acc`` is ``folds x epochs``; missing entries (diverged folds) are NaN
    and ignored in the mean.
    """
    val_acc = np.asarray(val_acc, dtype=float)
    with np.errstate(all="ignore"):
        mean = np.nanmean(val_acc, axis=0)
    best = int(np.nanargmax(mean))
    col = val_acc[:, best]
    return {"accuracy": float(mean[best]), "std": float(np.nanstd(col)), "epoch": best,
            "mean_curve": mean.tolist()}


@dataclass
class CvReport:
    dataset: str
    config: dict
    folds: list[list[dict]]
    summary: dict
    fold_plan: dict
    diverged: list[str | None] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)
    version: int = REPORT_VERSION

    def as_dict(self) -> dict:
        return {
            "format": "cellattn-cv-report",
            "version": self.version,
            "dataset": self.dataset,
            "config": self.config,
            "summary": self.summary,
            "diverged": self.diverged,
            "fold_plan": self.fold_plan,
            "folds": self.folds,
        }

    def val_matrix(self) -> np.ndarray:
        n_ep = max((len(f) for f in self.folds), default=0)
        mat = np.full((len(self.folds), n_ep), np.nan)
        for i, f in enumerate(self.folds):
            for m in f:
                mat[i, m["epoch"]] = m["val_acc"]
        return mat

    def text(self) -> str:
        s = self.summary
        lines = [
            f"dataset       {self.dataset}",
            f"folds         {len(self.folds)}",
            f"epochs        {self.config.get('epochs')}",
            f"summary       {100 * s['accuracy']:.2f} +- {100 * s['std']:.2f}  (best epoch {s['epoch']})",
            "",
            "fold  best_val  at_epoch  final_train  seconds",
        ]
        for i, f in enumerate(self.folds):
            if not f:
                lines.append(f"{i:>4}  {'-':>8}")
                continue
            best = max(f, key=lambda m: m["val_acc"])
            lines.append(f"{i:>4}  {best['val_acc']:8.4f}  {best['epoch']:8d}  {f[-1]['train_acc']:11.4f}  "
                         f"{self.seconds[i] if i < len(self.seconds) else float('nan'):7.1f}")
        return "\n".join(lines)


def _run_fold(args):
    fold, train, val, cfg, num_classes, tr_cx, va_cx, seed = args
    return fold, train_fold(train, val, cfg, num_classes=num_classes, train_complexes=tr_cx,
                            val_complexes=va_cx, seed=seed)


def cross_validate(dataset, cfg: RunConfig, *, name: str | None = None, jobs: int = 1,
                   fold_trainer: Callable | None = None, complexes=None, out_dir=None,
                   plan: FoldPlan | None = None) -> CvReport:
    """10-fold protocol; the summary is the maximum across-fold mean validation accuracy."""
    samples = list(dataset)
    labels = np.array([s.label for s in samples])
    num_classes = getattr(dataset, "num_classes", None) or int(labels.max()) + 1
    plan = plan or make_folds(len(samples), labels, seed=cfg.seed)
    if complexes is None and fold_trainer is None:
        complexes = lift_all(samples, cfg.max_ring_size)
    tasks = []
    for i in range(len(plan.folds)):
        tr, va = plan.split(i)
        tasks.append((
            i,
            [samples[j] for j in tr],
            [samples[j] for j in va],
            cfg,
            num_classes,
            None if complexes is None else [complexes[j] for j in tr],
            None if complexes is None else [complexes[j] for j in va],
            cfg.seed * 1000 + i,
        ))
    results: dict[int, FoldResult] = {}
    if fold_trainer is not None:
        for t in tasks:
            results[t[0]] = fold_trainer(t[1], t[2], cfg)
    elif jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for i, res in pool.map(_run_fold, tasks):
                results[i] = res
    else:
        for t in tasks:
            i, res = _run_fold(t)
            results[i] = res
            log.info("fold %d: best val %.4f at epoch %d (%.1fs)", i, max(res.val_acc, default=float("nan")),
                     res.best_epoch, res.seconds)
    ordered = [results[i] for i in range(len(tasks))]
    folds = [[m.as_dict() for m in r.epochs] for r in ordered]
    report = CvReport(
        dataset=name or getattr(dataset, "name", "dataset"),
        config=cfg.to_dict(),
        folds=folds,
        summary={},
        fold_plan=plan.as_dict(),
        diverged=[r.diverged for r in ordered],
        seconds=[r.seconds for r in ordered],
    )
    report.summary = summarize(report.val_matrix())
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for i, r in enumerate(ordered):
            save_checkpoint(out / f"fold{i}_best.json", r.best_params, r.best_buffers, cfg.to_dict(),
                            {"fold": i, "epoch": r.best_epoch, "dataset": report.dataset,
                             "num_node_features": infer_dims(samples)[0],
                             "num_edge_features": infer_dims(samples)[1], "num_classes": num_classes})
    return report


# ------------------------------------------------------------------ ablation
def apply_ablation(cfg: RunConfig, *switches: str) -> RunConfig:
    """Return ``cfg`` with the named ablation switches turned on.

    ``no_pooling`` also switches the readout to the final layer only.
    """
    changes = {}
    for s in switches:
        if s not in ABLATIONS:
            raise ValueError(f"unknown ablation {s!r}; choose from {ABLATIONS}")
        changes[s] = True
    return cfg.replace(**changes)


def ablation_table(baseline: CvReport, runs: dict[str, CvReport]) -> list[dict]:
    rows = []
    base = baseline.summary["accuracy"]
    for switch, rep in runs.items():
        rows.append({
            "removed": switch,
            "accuracy": rep.summary["accuracy"],
            "std": rep.summary["std"],
            "delta": rep.summary["accuracy"] - base,
        })
    return rows


def format_ablation(dataset: str, baseline: CvReport, rows: list[dict]) -> str:
    b = baseline.summary
    lines = [f"Feature Removed   {dataset}  (baseline {100 * b['accuracy']:.1f} +- {100 * b['std']:.1f})"]
    for r in rows:
        label = r["removed"].replace("no_", "No ").replace("_", " ").title()
        lines.append(f"{label:<17} {100 * r['delta']:+.1f} +- {100 * r['std']:.1f}")
    return "\n".join(lines)


def run_ablations(dataset, cfg: RunConfig, switches: Sequence[str] = ABLATIONS, jobs: int = 1,
                  name: str | None = None) -> tuple[CvReport, dict[str, CvReport], list[dict]]:
    samples = list(dataset)
    complexes = lift_all(samples, cfg.max_ring_size)
    baseline = cross_validate(dataset, cfg, jobs=jobs, complexes=complexes, name=name)
    runs = {}
    for s in switches:
        runs[s] = cross_validate(dataset, apply_ablation(cfg, s), jobs=jobs, complexes=complexes, name=name)
    return baseline, runs, ablation_table(baseline, runs)
