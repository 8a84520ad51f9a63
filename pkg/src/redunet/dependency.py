"""Feature and feature-group dependency measures.

Dependency between two features is the squared Pearson correlation. Between
two groups it is the average, over the features of the first group, of the
largest squared correlation with any feature of the second group, which is
not symmetric in general.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .data import Dataset, GroupStructure


class DependencyKind(enum.Enum):
    SQUARED_PEARSON = "squared_pearson"
    # mutual information would slot in here


@dataclass(frozen=True, eq=False)
class DependencyMatrix:
    values: np.ndarray
    kind: DependencyKind = DependencyKind.SQUARED_PEARSON


@dataclass(frozen=True, eq=False)
class GroupDependencyMatrix:
    values: np.ndarray
    row_sums_excl_diag: np.ndarray
    kind: DependencyKind = DependencyKind.SQUARED_PEARSON


def _as_rows(X):
    if isinstance(X, Dataset):
        return X.features
    return np.asarray(X, dtype=float)


def pearson(a, b) -> float:
    """Sample Pearson correlation; 0 when either vector is constant."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != b.size:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size < 2:
        raise ValueError("need at least 2 samples")
    da = a - a.mean()
    db = b - b.mean()
    na = np.sqrt(da @ da)
    nb = np.sqrt(db @ db)
    if na == 0 or nb == 0 or np.ptp(a) == 0 or np.ptp(b) == 0:
        return 0.0
    return float(np.clip((da @ db) / (na * nb), -1.0, 1.0))


def correlation_matrix(X) -> np.ndarray:
    """Pearson correlations between the rows of a p x N matrix.

    Rows that are constant get zero correlation with everything, themselves
    included.
    """
    X = _as_rows(X)
    Z = X - X.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.einsum("ij,ij->i", Z, Z))
    live = (norms > 0) & (np.ptp(X, axis=1) > 0)
    Z[live] /= norms[live, None]
    Z[~live] = 0.0
    R = np.clip(Z @ Z.T, -1.0, 1.0)
    R = 0.5 * (R + R.T)
    np.fill_diagonal(R, np.where(live, 1.0, 0.0))
    return R


def feature_dep_matrix(X) -> DependencyMatrix:
    R = correlation_matrix(X)
    return DependencyMatrix(R * R)


def group_dep_matrix(X, groups: GroupStructure, feature_dep: np.ndarray | None = None) -> GroupDependencyMatrix:
    """Asymmetric group dependency: ``D[i, j] = mean_{l in G_i} max_{m in G_j} rho(l, m)**2``."""
    D2 = feature_dep_matrix(X).values if feature_dep is None else np.asarray(feature_dep)
    order = np.concatenate([np.asarray(g, dtype=np.intp) for g in groups.groups])
    starts = np.concatenate([[0], np.cumsum(groups.sizes)[:-1]])
    P = D2[np.ix_(order, order)]
    best = np.maximum.reduceat(P, starts, axis=1)          # feature -> group max
    values = np.add.reduceat(best, starts, axis=0) / groups.sizes[:, None]
    row_sums = values.sum(axis=1) - np.diag(values)
    return GroupDependencyMatrix(values, row_sums)
