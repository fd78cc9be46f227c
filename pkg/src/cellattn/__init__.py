"""Cell attention networks: graph lifting to cell complexes, attention layers and training."""

__version__ = "0.1.0"

from .complex import CellComplex, build_incidence, laplacians, neighborhoods  # noqa: E402
from .config import RunConfig, load_config  # noqa: E402
from .data import GraphSample, TUDataset, make_folds, parse_tud  # noqa: E402
from .lifting import LiftConfig, chordless_cycles, dataset_stats, lift_graph  # noqa: E402
from .model import CellAttentionNetwork, count_parameters  # noqa: E402
from .training import cross_validate, train_fold  # noqa: E402

__all__ = [
    "CellAttentionNetwork", "CellComplex", "GraphSample", "LiftConfig", "RunConfig", "TUDataset",
    "build_incidence", "chordless_cycles", "count_parameters", "cross_validate", "dataset_stats",
    "laplacians", "lift_graph", "load_config", "make_folds", "neighborhoods", "parse_tud", "train_fold",
]
