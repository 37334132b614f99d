"""Strengthened full-graph GNN baselines for multi-label node classification."""
from .data import (DESK_SPEC, FIXTURE_SEED, FIXTURE_SPEC, Split, SyntheticSpec, generate_synthetic,
                   load_dataset, make_split, save_dataset)
from .graph import Graph, NormalizedAdjacency, normalize_adjacency, spmm
from .metrics import METRIC_NAMES, MetricsReport, compute_metrics, evaluate
from .models import ModelConfig, build_model, forward
from .trainer import RunResult, TrainConfig, run_ablation, run_seeds, train_one

__version__ = "0.1.0"
