"""``cellattn`` command line: stats, lift, train, cv, eval, gradcheck, ablate, bench.

Exit codes: 0 success, 1 check failure, 2 usage/config error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .autodiff.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .complex import export_incidence
from .config import BUILTIN_CONFIGS, ConfigError, RunConfig, load_config
from .data import ParseError, TUDataset, make_folds, parse_tud
from .lifting import LiftConfig, MalformedGraphError, dataset_stats, format_stats_table, published_mismatches

log = logging.getLogger("cellattn")

OUTPUT_VERSION = 1
EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_DATA = 0, 1, 2, 3
SYNTHETIC = "synthetic-rings"


class DataError(Exception):
    pass


# ------------------------------------------------------------------ helpers
def load_dataset(name: str, data_dir: str) -> TUDataset:
    if name == SYNTHETIC:
        from .synthetic import ring_detection_dataset
        return ring_detection_dataset()
    root = Path(data_dir)
    if not (root / name).is_dir() and not (root / f"{name}_A.txt").exists():
        raise DataError(f"dataset {name!r} not found under {root.resolve()} "
                        f"(expected {root / name}/{name}_A.txt and friends)")
    return parse_tud(root, name)


def resolve_config(args) -> RunConfig:
    if args.config:
        cfg = load_config(args.config)
    else:
        key = "synthetic" if args.dataset == SYNTHETIC else args.dataset.lower()
        cfg = load_config(key) if key in BUILTIN_CONFIGS else RunConfig()
    changes = {}
    for flag, key in (("seed", "seed"), ("precision", "precision"), ("max_ring_size", "max_ring_size"),
                      ("epochs", "epochs")):
        v = getattr(args, flag, None)
        if v is not None:
            changes[key] = v
    return cfg.replace(**changes) if changes else cfg


def header(kind: str, cfg: dict | None) -> dict:
    return {"format": f"cellattn-{kind}", "version": OUTPUT_VERSION, "cellattn": __version__, "config": cfg}


def write_outputs(out: Path | None, stem: str, doc: dict, text: str) -> None:
    """Write ``<stem>.json`` and ``<stem>.txt``; the text file starts with the format line and config."""
    if out is None:
        return
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{stem}.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    cfg_line = json.dumps(doc.get("config"), sort_keys=True)
    (out / f"{stem}.txt").write_text(f"# {doc['format']} v{doc['version']}\n# config {cfg_line}\n{text}\n")


def echo_config(cfg: dict | None) -> None:
    print("resolved config: " + json.dumps(cfg, sort_keys=True), file=sys.stderr)


def _out(args) -> Path | None:
    return Path(args.out) if args.out else None


def _datasets(args) -> list[str]:
    return [d for d in args.dataset.split(",") if d]


# -------------------------------------------------------------- subcommands
def cmd_stats(args) -> int:
    cfg = resolve_config(args)
    lift = LiftConfig(cfg.max_ring_size)
    rows, notes = [], {}
    for name in _datasets(args):
        ds = load_dataset(name, args.data_dir)
        st = dataset_stats(ds.graphs, lift, name)
        rows.append(st)
        notes[name] = published_mismatches(st)
    text = format_stats_table(rows)
    flagged = [f"{n}: {m}" for n, ms in notes.items() for m in ms]
    if flagged:
        text += "\n\nDiffers from the published statistics:\n" + "\n".join("  " + f for f in flagged)
    print(text)
    doc = header("stats", cfg.to_dict()) | {"datasets": [r.as_dict() for r in rows], "mismatches": notes}
    if args.json:
        print(json.dumps(doc, indent=2, sort_keys=True))
    out = _out(args)
    write_outputs(out, "stats", doc, text)
    if out is not None:
        from .plotting import plot_cell_counts
        plot_cell_counts(rows, out / "cell_counts.png", header("stats", cfg.to_dict()))
    return EXIT_OK


def cmd_lift(args) -> int:
    cfg = resolve_config(args)
    ds = load_dataset(args.dataset, args.data_dir)
    lift = LiftConfig(cfg.max_ring_size)
    from .lifting import lift_sample
    graphs = []
    out = _out(args)
    for i, g in enumerate(ds.graphs):
        cx = lift_sample(g, lift)
        graphs.append({
            "graph": i,
            "num_vertices": cx.num_vertices,
            "edges": cx.edges.tolist(),
            "rings": [{"vertices": list(r.vertices), "edges": list(r.edge_ids), "signs": list(r.signs)}
                      for r in cx.rings],
        })
        if args.export_incidence:
            if out is None:
                raise ConfigError("--export-incidence needs --out")
            export_incidence(cx, out / "incidence" / f"graph{i}")
    st = dataset_stats(ds.graphs, lift, args.dataset)
    text = format_stats_table([st])
    print(text)
    doc = header("complexes", cfg.to_dict()) | {"dataset": args.dataset, "graphs": graphs}
    write_outputs(out, "complexes", doc, text)
    return EXIT_OK


def _train_val(ds, cfg, fold: int):
    plan = make_folds(len(ds), ds.labels, seed=cfg.seed)
    if not 0 <= fold < len(plan.folds):
        raise ConfigError(f"--fold must be in 0..{len(plan.folds) - 1}")
    tr, va = plan.split(fold)
    return [ds[i] for i in tr], [ds[i] for i in va]


def _model_meta(ds, cfg, extra=None) -> dict:
    from .training import infer_dims
    fn, fe = infer_dims(ds.graphs)
    return {"dataset": ds.name, "num_node_features": fn, "num_edge_features": fe,
            "num_classes": ds.num_classes} | (extra or {})


def _dump_attention(path, model, samples, complexes, cfg, meta) -> None:
    from .model import attention_report
    doc = header("attention", cfg.to_dict()) | {"meta": meta, "graphs": attention_report(model, samples, complexes)}
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(doc) + "\n")
    print(f"attention written to {p}")


def cmd_train(args) -> int:
    from .training import build_model, infer_dims, lift_all, train_fold
    cfg = resolve_config(args)
    ds = load_dataset(args.dataset, args.data_dir)
    train, val = _train_val(ds, cfg, args.fold)
    tr_cx, va_cx = lift_all(train, cfg.max_ring_size), lift_all(val, cfg.max_ring_size)
    res = train_fold(train, val, cfg, num_classes=ds.num_classes, train_complexes=tr_cx, val_complexes=va_cx,
                     on_epoch=lambda m: log.info("epoch %3d  train %.4f/%.3f  val %.4f/%.3f", m.epoch,
                                                 m.train_loss, m.train_acc, m.val_loss, m.val_acc))
    best_acc = max(res.val_acc, default=float("nan"))
    text = "\n".join([f"dataset     {ds.name}", f"fold        {args.fold}",
                      f"best val    {best_acc:.4f} at epoch {res.best_epoch}",
                      f"diverged    {res.diverged or 'no'}"])
    print(text)
    doc = header("train", cfg.to_dict()) | {"dataset": ds.name, "fold": args.fold, "best_epoch": res.best_epoch,
                                             "best_val_acc": best_acc, "diverged": res.diverged,
                                             "epochs": [m.as_dict() for m in res.epochs]}
    out = _out(args)
    write_outputs(out, "train", doc, text)
    meta = _model_meta(ds, cfg, {"fold": args.fold, "epoch": res.best_epoch})
    if out is not None:
        save_checkpoint(out / "model.json", res.best_params, res.best_buffers, cfg.to_dict(), meta)
    if args.dump_attention:
        fn, fe = infer_dims(ds.graphs)
        model = build_model(cfg, fn, fe, ds.num_classes)
        model.load_state(res.best_params, res.best_buffers)
        _dump_attention(args.dump_attention, model, val, va_cx, cfg, meta)
    return EXIT_OK if res.diverged is None else EXIT_FAIL


def cmd_cv(args) -> int:
    from .training import cross_validate
    cfg = resolve_config(args)
    ds = load_dataset(args.dataset, args.data_dir)
    out = _out(args)
    rep = cross_validate(ds, cfg, jobs=args.jobs, out_dir=out / "checkpoints" if out else None)
    text = rep.text()
    print(text)
    doc = rep.as_dict()
    write_outputs(out, "cv_report", doc, text)
    if out is not None:
        mat = rep.val_matrix()
        lines = ["epoch," + ",".join(f"fold{i}" for i in range(mat.shape[0])) + ",mean"]
        for e in range(mat.shape[1]):
            lines.append(f"{e}," + ",".join(f"{v:.6f}" for v in mat[:, e]) + f",{rep.summary['mean_curve'][e]:.6f}")
        (out / "val_acc.csv").write_text("\n".join(lines) + "\n")
        from .plotting import plot_learning_curves
        plot_learning_curves(rep, out / "learning_curves.png", header("cv-report", cfg.to_dict()))
    return EXIT_OK if not any(rep.diverged) else EXIT_FAIL


def cmd_eval(args) -> int:
    from .training import build_model, evaluate, lift_all
    try:
        ck = load_checkpoint(args.checkpoint)
    except (OSError, CheckpointError) as exc:
        raise DataError(str(exc)) from exc
    cfg = RunConfig.from_dict(ck["config"])
    if args.max_ring_size is not None:
        cfg = cfg.replace(max_ring_size=args.max_ring_size)
    echo_config(cfg.to_dict())
    ds = load_dataset(args.dataset, args.data_dir)
    meta = ck.get("meta", {})
    if args.fold is not None:
        _, samples = _train_val(ds, cfg, args.fold)
    else:
        samples = list(ds.graphs)
    from .training import infer_dims
    fn, fe = infer_dims(samples)
    want = (meta.get("num_node_features", fn), meta.get("num_edge_features", fe))
    if want != (fn, fe):
        raise DataError(f"checkpoint expects node/edge feature widths {want}, dataset has {(fn, fe)}")
    model = build_model(cfg, fn, fe, meta.get("num_classes", ds.num_classes))
    try:
        model.load_state(ck["params"], ck["buffers"])
    except CheckpointError as exc:
        raise DataError(str(exc)) from exc
    cxs = lift_all(samples, cfg.max_ring_size)
    loss, acc, preds = evaluate(model, samples, cxs)
    text = f"dataset   {ds.name}\ngraphs    {len(samples)}\nloss      {loss:.6f}\naccuracy  {acc:.4f}"
    print(text)
    doc = header("eval", cfg.to_dict()) | {"dataset": ds.name, "checkpoint": str(args.checkpoint),
                                            "fold": args.fold, "loss": loss, "accuracy": acc,
                                            "predictions": preds.tolist()}
    write_outputs(_out(args), "eval", doc, text)
    if args.dump_attention:
        _dump_attention(args.dump_attention, model, samples, cxs, cfg, meta)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .checks import FIXTURES, fixture_config, full_model_gradcheck
    names = FIXTURES if args.fixture == "all" else (args.fixture,)
    results, lines, ok = {}, [], True
    for name in names:
        echo_config(fixture_config(name).to_dict())
        rep = full_model_gradcheck(name, h=args.step, tol=args.tol, seed=args.seed or 0)
        ok &= rep.passed
        lines.append(f"{name:<9} {rep.summary()}")
        results[name] = {"config": fixture_config(name).to_dict(), "passed": rep.passed, "checked": rep.checked,
                         "worst_error": rep.worst_error, "worst_param": rep.worst_param,
                         "failures": [list(map(str, f)) for f in rep.failures]}
    text = "\n".join(lines)
    print(text)
    doc = header("gradcheck", None) | {"step": args.step, "tolerance": args.tol, "fixtures": results,
                                        "passed": bool(ok)}
    write_outputs(_out(args), "gradcheck", doc, text)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_ablate(args) -> int:
    from .training import ABLATIONS, format_ablation, run_ablations
    cfg = resolve_config(args)
    switches = args.switches.split(",") if args.switches else list(ABLATIONS)
    bad = [s for s in switches if s not in ABLATIONS]
    if bad:
        raise ConfigError(f"unknown ablation switches {bad}; choose from {list(ABLATIONS)}")
    ds = load_dataset(args.dataset, args.data_dir)
    baseline, runs, rows = run_ablations(ds, cfg, switches, jobs=args.jobs, name=ds.name)
    text = format_ablation(ds.name, baseline, rows)
    print(text)
    doc = header("ablation", cfg.to_dict()) | {
        "dataset": ds.name,
        "baseline": baseline.summary | {"mean_curve": None},
        "rows": rows,
        "runs": {k: v.as_dict() for k, v in runs.items()},
    }
    out = _out(args)
    write_outputs(out, "ablation", doc, text)
    if out is not None:
        from .plotting import plot_ablation
        plot_ablation(ds.name, rows, out / "ablation.png", header("ablation", cfg.to_dict()))
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import format_bench, run_bench
    sides = tuple(int(s) for s in args.sides.split(","))
    rings = tuple(int(s) for s in args.ring_sizes.split(","))
    res = run_bench(sides=sides, ring_sizes=rings, width=args.width, repeat=args.repeat, seed=args.seed or 0)
    text = format_bench(res)
    print(text)
    params = {"sides": list(sides), "ring_sizes": list(rings), "width": args.width, "repeat": args.repeat}
    echo_config(params)
    doc = header("bench", params) | res
    out = _out(args)
    write_outputs(out, "bench", doc, text)
    if out is not None:
        from .plotting import plot_bench
        plot_bench(res, out / "bench.png", header("bench", params))
    return EXIT_OK


# ------------------------------------------------------------------- parser
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--data-dir", default=os.environ.get("CELLATTN_DATA", "data"),
                   help="directory holding TUDataset folders (default: $CELLATTN_DATA or ./data)")
    g.add_argument("--dataset", default="MUTAG", help=f"TUDataset name, or {SYNTHETIC!r}")
    g.add_argument("--config", help="JSON run config (path or builtin name: " + ", ".join(BUILTIN_CONFIGS) + ")")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", help="directory for JSON, text and figure outputs")
    g.add_argument("--precision", choices=("float32", "float64"))
    g.add_argument("--max-ring-size", type=int)
    g.add_argument("--dump-attention", metavar="PATH", help="write per-layer alpha and gamma to a JSON file")
    g.add_argument("--jobs", type=int, default=1, help="worker processes for cross-validation folds")
    g.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="cellattn", description="Cell attention networks on lifted graphs.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("stats", parents=[common], help="per-dataset cell statistics")
    s.add_argument("--json", action="store_true", help="also print the JSON document")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("lift", parents=[common], help="lift a dataset and write its complexes")
    s.add_argument("--export-incidence", action="store_true", help="write B1/B2 text matrices under OUT/incidence")
    s.set_defaults(func=cmd_lift)

    s = sub.add_parser("train", parents=[common], help="train on one split of the fold plan")
    s.add_argument("--fold", type=int, default=0)
    s.add_argument("--epochs", type=int)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("cv", parents=[common], help="10-fold cross-validation")
    s.add_argument("--epochs", type=int)
    s.set_defaults(func=cmd_cv)

    s = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--fold", type=int, help="evaluate only this validation fold (default: whole dataset)")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("gradcheck", parents=[common], help="finite-difference check of the full model")
    s.add_argument("--fixture", choices=("triangle", "c6", "all"), default="all")
    s.add_argument("--step", type=float, default=1e-6)
    s.add_argument("--tol", type=float, default=1e-5)
    s.set_defaults(func=cmd_gradcheck)

    s = sub.add_parser("ablate", parents=[common], help="cross-validate with each component removed")
    s.add_argument("--switches", help="comma-separated subset of no_pooling,no_attention,no_upper,no_lower,no_lift")
    s.add_argument("--epochs", type=int)
    s.set_defaults(func=cmd_ablate)

    s = sub.add_parser("bench", parents=[common], help="time lifting and layers against |E| and R")
    s.add_argument("--sides", default="8,12,16,24,32", help="lattice side lengths")
    s.add_argument("--ring-sizes", default="4,5,6")
    s.add_argument("--width", type=int, default=32)
    s.add_argument("--repeat", type=int, default=3)
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 on unknown flags
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command not in ("eval", "gradcheck", "bench"):
            echo_config(resolve_config(args).to_dict())
        return args.func(args)
    except (ConfigError, json.JSONDecodeError) as exc:
        print(f"cellattn: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ParseError, MalformedGraphError) as exc:
        print(f"cellattn: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
