import json

import pytest

from cellattn.config import BUILTIN_CONFIGS, ConfigError, RunConfig, load_config


@pytest.mark.parametrize("name", BUILTIN_CONFIGS)
def test_builtin_configs_load_and_roundtrip(name):
    cfg = load_config(name)
    again = RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg
    assert cfg.to_dict()["config_version"] == 1


# lift heads, lift act, lift dropout, hidden, heads, aggregation, att act, act, mlp, batch, slope, k, pool, dropout, lr
PUBLISHED = {
    "mutag": (1, "relu", 0.0, [32, 32], [1, 1], "cat", "lrelu", "elu", 8, 64, 0.1, 1.0, "hierarchical", 0.1, 3e-3),
    "ptc": (32, "elu", 0.0, [32, 8], [2, 1], "cat", "lrelu", "elu", 4, 128, 0.1, 0.75, "global", 0.6, 1e-3),
    "proteins": (256, "elu", 0.05, [128, 128], [1, 1], "cat", "tanh", "tanh", 128, 128, 0.3, 0.6, "hierarchical",
                 0.3, 3e-3),
    "nci1": (107, "elu", 0.2, [32, 16, 64, 8], [3, 5, 4, 5], "cat", "tanh", "elu", 256, 128, 0.08, 0.5, "global",
             0.15, 3e-4),
    "nci109": (116, "sigmoid", 0.2, [64, 8, 8, 32, 8], [5, 7, 4, 7, 7], "cat", "tanh", "gelu", 32, 128, 0.07, 0.75,
               "global", 0.05, 3e-3),
}
FIELDS = ("lift_heads", "lift_activation", "lift_dropout", "hidden", "heads", "attention_aggregation",
          "attention_activation", "activation", "mlp_hidden", "batch_size", "negative_slope", "pool_ratio",
          "pool_type", "dropout", "lr")


@pytest.mark.parametrize("name", sorted(PUBLISHED))
def test_dataset_configs_match_published_columns(name):
    cfg = load_config(f"{name}.json")
    assert tuple(getattr(cfg, f) for f in FIELDS) == PUBLISHED[name]


def test_config_from_path(tmp_path):
    p = tmp_path / "mine.json"
    p.write_text(json.dumps({"hidden": [8], "heads": [2], "seed": 4}))
    cfg = load_config(p)
    assert cfg.layer_output_widths() == [16] and cfg.seed == 4


@pytest.mark.parametrize("bad, match", [
    ({"hidden": [8, 8], "heads": [1]}, "equal length"),
    ({"hidden": [8, 4], "heads": [1, 1], "pool_type": "hierarchical"}, "equal widths"),
    ({"pool_ratio": 0.0}, "pool_ratio"),
    ({"pool_type": "mixed"}, "pool_type"),
    ({"precision": "float16"}, "precision"),
    ({"no_attention": True, "no_upper": True}, "no_attention"),
    ({"max_ring_size": 2}, "max_ring_size"),
    ({"colour": "red"}, "unknown config keys"),
])
def test_invalid_configs(bad, match):
    with pytest.raises(ConfigError, match=match):
        RunConfig.from_dict(bad)


def test_global_pool_allows_unequal_widths():
    cfg = RunConfig(hidden=[8, 4], heads=[1, 1], pool_type="global")
    assert cfg.layer_output_widths() == [8, 4]


def test_unknown_builtin():
    with pytest.raises(ConfigError):
        load_config("imdb")
