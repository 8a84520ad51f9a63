"""Redundancy-aware feature and group selection with a one-hidden-layer perceptron."""

from ._kernels import BACKEND
from .data import (Dataset, DataError, GroupStructure, load_csv, load_groups, parse_groups,
                   singleton_groups, zscore_normalize)
from .dependency import correlation_matrix, feature_dep_matrix, group_dep_matrix
from .mlp import MlpWeights, NetworkShape, init_weights
from .penalty import PenaltyConfig, PenaltyKind, make_penalty
from .trainer import TrainConfig, TrainTrace, TrainingDiverged, train

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Dataset", "DataError", "GroupStructure", "load_csv", "load_groups",
    "parse_groups", "singleton_groups", "zscore_normalize", "correlation_matrix",
    "feature_dep_matrix", "group_dep_matrix", "MlpWeights", "NetworkShape", "init_weights",
    "PenaltyConfig", "PenaltyKind", "make_penalty", "TrainConfig", "TrainTrace",
    "TrainingDiverged", "train",
]
