import json

import pytest

from cellattn.cli import main

from conftest import DATA_DIR, have_dataset

needs_mutag = pytest.mark.skipif(not have_dataset("MUTAG"), reason="MUTAG not available")


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@needs_mutag
def test_stats_mutag(capsys, tmp_path):
    code, out, err = run(capsys, "stats", "--dataset", "MUTAG", "--data-dir", str(DATA_DIR), "--out", str(tmp_path))
    assert code == 0
    assert "188" in out and "17.93" in out and "19.79" in out
    assert err.startswith("resolved config: {")
    doc = json.loads((tmp_path / "stats.json").read_text())
    assert doc["format"] == "cellattn-stats" and doc["version"] == 1 and doc["config"]["max_ring_size"] == 6
    assert doc["mismatches"]["MUTAG"] == []
    assert (tmp_path / "stats.txt").read_text().startswith("# cellattn-stats v1\n# config {")
    assert (tmp_path / "cell_counts.png").stat().st_size > 0


@needs_mutag
def test_stats_json_flag(capsys):
    code, out, _ = run(capsys, "stats", "--data-dir", str(DATA_DIR), "--json")
    assert code == 0
    doc = json.loads(out[out.index("{"):])
    assert doc["datasets"][0]["num_graphs"] == 188


def test_gradcheck_triangle(capsys, tmp_path):
    code, out, _ = run(capsys, "gradcheck", "--fixture", "triangle", "--out", str(tmp_path))
    assert code == 0 and "PASS" in out
    assert json.loads((tmp_path / "gradcheck.json").read_text())["passed"] is True


def test_gradcheck_failure_exit_code(capsys):
    # an impossible tolerance must surface as exit status 1
    code, out, _ = run(capsys, "gradcheck", "--fixture", "triangle", "--tol", "0")
    assert code == 1 and "FAIL" in out


def test_unknown_flag_rejected(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["stats", "--no-such-flag"])
    assert exc.value.code == 2


def test_missing_dataset_is_data_error(capsys, tmp_path):
    code, _, err = run(capsys, "stats", "--dataset", "NOPE", "--data-dir", str(tmp_path))
    assert code == 3 and "data error" in err


def test_malformed_dataset_is_data_error(capsys, tmp_path):
    d = tmp_path / "BAD"
    d.mkdir()
    (d / "BAD_A.txt").write_text("1, 1\n")
    (d / "BAD_graph_indicator.txt").write_text("1\n")
    (d / "BAD_graph_labels.txt").write_text("0\n")
    code, _, err = run(capsys, "lift", "--dataset", "BAD", "--data-dir", str(tmp_path))
    assert code == 3 and "self-loop" in err


def test_bad_config_is_usage_error(capsys, tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"hidden": [4, 8], "heads": [1, 1], "pool_type": "hierarchical"}))
    code, _, err = run(capsys, "cv", "--dataset", "synthetic-rings", "--config", str(cfg))
    assert code == 2 and "config error" in err


def test_cv_twice_identical(capsys, tmp_path):
    args = ["cv", "--dataset", "synthetic-rings", "--config", "synthetic.json", "--seed", "0", "--epochs", "2"]
    assert run(capsys, *args, "--out", str(tmp_path / "a"))[0] == 0
    assert run(capsys, *args, "--out", str(tmp_path / "b"))[0] == 0
    a = (tmp_path / "a" / "cv_report.json").read_text()
    assert a == (tmp_path / "b" / "cv_report.json").read_text()
    assert json.loads(a)["config"]["epochs"] == 2
    assert (tmp_path / "a" / "learning_curves.png").exists()
    assert (tmp_path / "a" / "val_acc.csv").read_text().startswith("epoch,fold0,")


def test_train_eval_and_attention_dump(capsys, tmp_path):
    out = tmp_path / "run"
    code, text, _ = run(capsys, "train", "--dataset", "synthetic-rings", "--epochs", "3", "--out", str(out),
                        "--dump-attention", str(out / "attention.json"))
    assert code == 0 and "best val" in text
    att = json.loads((out / "attention.json").read_text())
    assert att["format"] == "cellattn-attention" and att["config"]["epochs"] == 3
    layer = att["graphs"][0]["layers"][0]
    assert {"lower_alpha", "upper_alpha", "gamma", "kept"} <= set(layer)

    code, text, err = run(capsys, "eval", "--dataset", "synthetic-rings", "--checkpoint", str(out / "model.json"),
                          "--fold", "0", "--out", str(tmp_path / "ev"))
    assert code == 0 and "accuracy" in text and "resolved config" in err
    ev = json.loads((tmp_path / "ev" / "eval.json").read_text())
    tr = json.loads((out / "train.json").read_text())
    assert ev["accuracy"] == pytest.approx(tr["best_val_acc"])


def test_eval_bad_checkpoint(capsys, tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{}")
    code, _, err = run(capsys, "eval", "--dataset", "synthetic-rings", "--checkpoint", str(p))
    assert code == 3


@needs_mutag
def test_lift_exports_incidence(capsys, tmp_path):
    code, _, _ = run(capsys, "lift", "--data-dir", str(DATA_DIR), "--export-incidence", "--out", str(tmp_path))
    assert code == 0
    doc = json.loads((tmp_path / "complexes.json").read_text())
    assert len(doc["graphs"]) == 188 and doc["version"] == 1
    b1 = (tmp_path / "incidence" / "graph0_B1.txt").read_text().splitlines()
    g0 = doc["graphs"][0]
    assert len(b1) == g0["num_vertices"] and len(b1[0].split()) == len(g0["edges"])


def test_export_needs_out(capsys):
    code, _, err = run(capsys, "lift", "--dataset", "synthetic-rings", "--export-incidence")
    assert code == 2


def test_ablate_small(capsys, tmp_path):
    code, out, _ = run(capsys, "ablate", "--dataset", "synthetic-rings", "--switches", "no_upper", "--epochs", "1",
                       "--out", str(tmp_path))
    assert code == 0 and "Feature Removed" in out and "No Upper" in out
    doc = json.loads((tmp_path / "ablation.json").read_text())
    assert doc["rows"][0]["removed"] == "no_upper"
    assert (tmp_path / "ablation.png").exists()


def test_ablate_rejects_unknown_switch(capsys):
    code, _, _ = run(capsys, "ablate", "--dataset", "synthetic-rings", "--switches", "no_magic")
    assert code == 2


def test_bench_small(capsys, tmp_path):
    code, out, _ = run(capsys, "bench", "--sides", "4,6,8", "--ring-sizes", "4", "--repeat", "1",
                       "--out", str(tmp_path))
    assert code == 0 and "lifting R=4" in out
    doc = json.loads((tmp_path / "bench.json").read_text())
    assert doc["format"] == "cellattn-bench" and "slope" in doc["lifting"]["4"]
