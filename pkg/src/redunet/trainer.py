"""Full-batch gradient-descent training with trace recording and diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .data import Dataset, GroupStructure, singleton_groups
from .mlp import MlpWeights, NetworkShape, init_weights
from .penalty import (PenaltyConfig, PenaltyKind, group_coefficients,
                      group_norms, penalty_value_and_grad)


class TrainingDiverged(RuntimeError):
    """Non-finite loss during training; carries the last finite state."""

    def __init__(self, message, weights=None, trace=None):
        super().__init__(message)
        self.weights = weights
        self.trace = trace


@dataclass(frozen=True)
class TrainConfig:
    eta: float = 0.01
    max_iters: int = 500
    seed: int = 0
    penalty: PenaltyConfig = field(default_factory=PenaltyConfig)
    grad_tol: float = 0.0
    hidden: int = 10
    checkpoint_every: int = 50

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if self.max_iters < 0:
            raise ValueError(f"max_iters must be non-negative, got {self.max_iters}")
        if self.hidden < 1:
            raise ValueError(f"hidden must be >= 1, got {self.hidden}")
        if self.grad_tol < 0:
            raise ValueError("grad_tol must be non-negative")


@dataclass(frozen=True, eq=False)
class TrainTrace:
    """Per-iteration record; entry ``m`` describes the weights after ``m`` updates."""

    loss_history: np.ndarray
    group_norm_history: np.ndarray
    grad_norm_history: np.ndarray
    iterations_run: int
    checkpoints: dict = field(default_factory=dict)
    diverged: bool = False

    def to_csv(self, path, group_names=None) -> None:
        s = self.group_norm_history.shape[1]
        names = list(group_names) if group_names else [f"g{i + 1}" for i in range(s)]
        cols = ["iter", "total_loss", "grad_norm"] + [f"norm_{nm}" for nm in names]
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for m in range(self.iterations_run + 1):
                vals = [repr(float(v)) for v in (self.loss_history[m], self.grad_norm_history[m])]
                vals += [repr(float(v)) for v in self.group_norm_history[m]]
                fh.write(f"{m}," + ",".join(vals) + "\n")


def _xy(data, Y=None):
    if isinstance(data, Dataset):
        return data.features, data.labels
    return np.asarray(data, dtype=float), np.asarray(Y, dtype=float)


def train(data, groups: GroupStructure | None = None, cfg: TrainConfig = TrainConfig(), *,
          labels=None, init: MlpWeights | None = None, backend: str | None = None):
    """Minimize the penalized loss by ``w <- w - eta * grad`` from a seeded start.

    ``data`` is a :class:`Dataset` or a p x N array (with ``labels`` c x N).
    Returns ``(weights, trace)``. Raises :class:`TrainingDiverged` when the
    loss becomes non-finite.
    """
    X, Y = _xy(data, labels)
    p, c = X.shape[0], Y.shape[0]
    groups = groups or singleton_groups(p)
    if groups.p != p:
        raise ValueError(f"group structure covers {groups.p} features, data has {p}")
    if init is None:
        init = init_weights(NetworkShape(p, cfg.hidden, c), cfg.seed)
    elif init.V.shape[1] != p or init.U.shape[0] != c:
        raise ValueError("initial weights do not match the data")
    pen = cfg.penalty
    h = init.V.shape[0]

    if pen.kind is PenaltyKind.WANG_BASELINE and pen.lam > 0:
        out = _kernels.descend_generic(
            init.V, init.U, X, Y,
            lambda V: penalty_value_and_grad(V, groups, pen),
            lambda V: group_norms(V, groups),
            groups.s, cfg.eta, cfg.max_iters, cfg.grad_tol, cfg.checkpoint_every)
    else:
        coef = group_coefficients(groups, pen, h)
        out = _kernels.get_descend(backend)(
            init.V, init.U, X, Y, groups.membership, coef, pen.smoothing_eps,
            cfg.eta, cfg.max_iters, cfg.grad_tol, cfg.checkpoint_every)
    V, U, loss, gnorm, norms, run, status, ckpt = out
    trace = TrainTrace(loss, norms, gnorm, int(run),
                       {m: MlpWeights(*vu) for m, vu in ckpt.items()},
                       diverged=status == _kernels.DIVERGED)
    weights = MlpWeights(V, U)
    if trace.diverged:
        raise TrainingDiverged(
            f"non-finite loss after {run + 1} updates (eta={cfg.eta}); "
            f"returning the state after {run}", weights, trace)
    return weights, trace


@dataclass(frozen=True)
class MonotonicityResult:
    ok: bool
    first_violation: int | None

    def __bool__(self):
        return self.ok


def monotonicity_check(trace: TrainTrace, slack: float = 0.0) -> MonotonicityResult:
    """Whether ``loss[m + 1] <= loss[m] + slack`` for every step."""
    loss = np.asarray(trace.loss_history)
    if loss.size == 0:
        raise ValueError("empty trace")
    bad = np.flatnonzero(loss[1:] > loss[:-1] + slack)
    return MonotonicityResult(bad.size == 0, int(bad[0]) if bad.size else None)


@dataclass(frozen=True)
class ConvergenceResult:
    final_grad_norm: float
    initial_grad_norm: float
    tail_below_median: bool


def convergence_check(trace: TrainTrace) -> ConvergenceResult:
    """Final gradient norm and whether the last 20% of the run sits below the run median."""
    if trace.diverged:
        raise TrainingDiverged("trace comes from a diverged run", trace=trace)
    g = np.asarray(trace.grad_norm_history)
    if g.size == 0:
        raise ValueError("empty trace")
    flag = False
    if trace.iterations_run > 0:
        tail = g[-max(1, int(np.ceil(0.2 * g.size))):]
        flag = bool(np.all(tail < np.median(g)))
    return ConvergenceResult(float(g[-1]), float(g[0]), flag)
