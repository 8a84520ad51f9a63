"""Regularizers on the input-to-hidden weights and their gradients.

Both the redundancy penalty and the group lasso are weighted sums of group
norms, ``sum_i c_i * H(g_i)``, where ``g_i`` collects the columns of ``V``
belonging to group ``i`` and ``H`` is the Euclidean norm or its smooth
surrogate ``sqrt(||x||^2 + eps^2)``. :func:`group_coefficients` computes the
``c_i``; training only needs those and the group membership.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .data import GroupStructure
from .dependency import feature_dep_matrix, group_dep_matrix
from .mlp import MlpWeights, loss_and_grad_arrays


class PenaltyKind(enum.Enum):
    PROPOSED = "proposed"
    WANG_BASELINE = "wang_baseline"
    NONE = "none"


@dataclass(frozen=True, eq=False)
class PenaltyConfig:
    """Penalty weights and the data-only dependency terms.

    ``kind`` selects the redundancy term; the group lasso is always weighted
    by ``mu``. ``dep_row_sums[i]`` is ``sum_{j != i} dep(G_i, G_j)`` and is
    needed for the proposed kind, ``dep_matrix`` (p x p feature dependency)
    for the Wang baseline.
    """

    lam: float = 0.0
    mu: float = 0.0
    kind: PenaltyKind = PenaltyKind.PROPOSED
    smoothing_eps: float = 0.0
    dep_row_sums: np.ndarray | None = None
    dep_matrix: np.ndarray | None = None

    def __post_init__(self):
        if self.lam < 0 or self.mu < 0 or self.smoothing_eps < 0:
            raise ValueError("lam, mu and smoothing_eps must be non-negative")
        kind = PenaltyKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.dep_row_sums is not None:
            r = np.array(self.dep_row_sums, dtype=float)
            s = r.size
            if np.any(r < -1e-12) or np.any(r > s - 1 + 1e-12):
                raise ValueError(f"dep_row_sums must lie in [0, {s - 1}]")
            r.setflags(write=False)
            object.__setattr__(self, "dep_row_sums", r)
        if self.dep_matrix is not None:
            D = np.array(self.dep_matrix, dtype=float)
            D.setflags(write=False)
            object.__setattr__(self, "dep_matrix", D)
        if kind is PenaltyKind.PROPOSED and self.lam > 0 and self.dep_row_sums is None:
            raise ValueError("proposed penalty with lam > 0 needs dep_row_sums")
        if kind is PenaltyKind.WANG_BASELINE and self.lam > 0 and self.dep_matrix is None:
            raise ValueError("Wang baseline with lam > 0 needs dep_matrix")


def make_penalty(X, groups: GroupStructure, lam=0.0, mu=0.0, kind=PenaltyKind.PROPOSED, smoothing_eps=0.0) -> PenaltyConfig:
    """Build a :class:`PenaltyConfig`, computing the dependency terms from ``X`` (p x N)."""
    kind = PenaltyKind(kind)
    rows = matrix = None
    if kind is PenaltyKind.PROPOSED:
        rows = group_dep_matrix(X, groups).row_sums_excl_diag
    elif kind is PenaltyKind.WANG_BASELINE:
        matrix = feature_dep_matrix(X).values
    return PenaltyConfig(lam, mu, kind, smoothing_eps, rows, matrix)


def _V(w):
    return w.V if isinstance(w, MlpWeights) else np.asarray(w, dtype=float)


def group_sq_norms(V, groups: GroupStructure) -> np.ndarray:
    col = np.einsum("kj,kj->j", V, V)
    return np.bincount(groups.membership, weights=col, minlength=groups.s)


def group_norms(wts, groups: GroupStructure) -> np.ndarray:
    """Euclidean norm of every group's ``h * n_i`` input weights."""
    return np.sqrt(group_sq_norms(_V(wts), groups))


def group_norm(wts, groups: GroupStructure, i: int) -> float:
    if not 0 <= i < groups.s:
        raise IndexError(f"group index {i} out of range for {groups.s} groups")
    V = _V(wts)
    return float(np.linalg.norm(V[:, list(groups.groups[i])]))


def smoothed_norm(x, eps: float) -> float:
    """``sqrt(||x||^2 + eps^2)``; the plain norm when ``eps == 0``."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    x = np.asarray(x, dtype=float).ravel()
    if eps == 0:
        return float(np.linalg.norm(x))
    return float(np.sqrt(x @ x + eps * eps))


def _H(V, groups, eps):
    return np.sqrt(group_sq_norms(V, groups) + eps * eps)


def group_lasso_value(wts, groups: GroupStructure, eps: float = 0.0) -> float:
    V = _V(wts)
    h = V.shape[0]
    return float(np.sum(_H(V, groups, eps) / (groups.sizes * h)))


def redundancy_value(wts, groups: GroupStructure, cfg: PenaltyConfig) -> float:
    """Proposed redundancy penalty; zero when there is a single group."""
    s = groups.s
    if s < 2:
        return 0.0
    V = _V(wts)
    h = V.shape[0]
    H = _H(V, groups, cfg.smoothing_eps)
    return float(np.sum(H / groups.sizes * cfg.dep_row_sums) / (h * s * (s - 1)))


def wang_penalty_value(wts, dep, eps: float = 0.0) -> float:
    """Baseline penalty ``sum_i ||v_i|| sum_{j != i} ||v_j|| dep_ij / (p (p - 1))``."""
    V = _V(wts)
    D = dep.values if hasattr(dep, "values") else np.asarray(dep)
    p = V.shape[1]
    if p < 2:
        return 0.0
    n = np.sqrt(np.einsum("kj,kj->j", V, V) + eps * eps)
    off = D - np.diag(np.diag(D))
    return float(n @ off @ n / (p * (p - 1)))


def group_coefficients(groups: GroupStructure, cfg: PenaltyConfig, h: int) -> np.ndarray:
    """Per-group multipliers ``c_i`` with penalty ``= sum_i c_i H(g_i)``.

    ``c_i = mu / (n_i h) + lam * r_i / (n_i h s (s - 1))`` for the proposed
    kind, where ``r_i`` is the dependency row sum; the Wang term is not of
    this form and is left out.
    """
    n = groups.sizes.astype(float)
    s = groups.s
    coef = cfg.mu / (n * h)
    if cfg.kind is PenaltyKind.PROPOSED and cfg.lam > 0 and s >= 2:
        coef = coef + cfg.lam * cfg.dep_row_sums / (n * h * s * (s - 1))
    return coef


def penalty_value_and_grad(V, groups: GroupStructure, cfg: PenaltyConfig, coef=None):
    """Value and V-gradient of ``lam * P + mu * GL`` (or the Wang variant).

    Where ``eps == 0`` and a group norm is exactly zero the subgradient 0 is
    used.
    """
    V = np.asarray(V, dtype=float)
    h, p = V.shape
    eps = cfg.smoothing_eps
    if coef is None:
        coef = group_coefficients(groups, cfg, h)
    H = _H(V, groups, eps)
    value = float(coef @ H)
    scale = np.divide(coef, H, out=np.zeros_like(H), where=H > 0)
    grad = V * scale[groups.membership]
    if cfg.kind is PenaltyKind.WANG_BASELINE and cfg.lam > 0 and p >= 2:
        n = np.sqrt(np.einsum("kj,kj->j", V, V) + eps * eps)
        off = cfg.dep_matrix - np.diag(np.diag(cfg.dep_matrix))
        norm = cfg.lam / (p * (p - 1))
        value += norm * float(n @ off @ n)
        w = norm * (off @ n + off.T @ n)
        grad = grad + V * np.divide(w, n, out=np.zeros_like(n), where=n > 0)
    return value, grad


def penalty_grad_V(wts, groups: GroupStructure, cfg: PenaltyConfig) -> np.ndarray:
    return penalty_value_and_grad(_V(wts), groups, cfg)[1]


def total_loss(wts: MlpWeights, X, Y, groups: GroupStructure, cfg: PenaltyConfig) -> float:
    """``E0 + lam * redundancy + mu * group lasso`` (smoothed when ``eps > 0``)."""
    E0, _, _ = loss_and_grad_arrays(wts.V, wts.U, np.asarray(X, float), np.asarray(Y, float))
    value, _ = penalty_value_and_grad(wts.V, groups, cfg)
    return E0 + value


def objective_and_grad(V, U, X, Y, groups: GroupStructure, cfg: PenaltyConfig, coef=None):
    """``(E, dU, dV)`` of the penalized loss at ``(V, U)``."""
    E0, dU, dV = loss_and_grad_arrays(V, U, X, Y)
    value, gV = penalty_value_and_grad(V, groups, cfg, coef)
    return E0 + value, dU, dV + gV
