"""Group selection from trained weights and the nested cross-validation harness."""

from __future__ import annotations

import csv
import enum
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import (DataError, Dataset, GroupStructure, SplitPlan, kfold, restrict,
                   split_train_test, zscore_normalize, zscore_stats)
from .dependency import correlation_matrix, group_dep_matrix
from .mlp import MlpWeights, accuracy, predict
from .penalty import PenaltyKind, group_norms, make_penalty
from .trainer import TrainConfig, TrainingDiverged, train

log = logging.getLogger(__name__)

THRESHOLD_RATIO = 0.1


class SelectionRule(enum.Enum):
    RELATIVE_THRESHOLD = "relative_threshold"
    TOP_D = "top_d"


class ExperimentFailure(RuntimeError):
    """Too many repeats failed for the run to be reported."""


@dataclass(frozen=True, eq=False)
class SelectionResult:
    selected: tuple[int, ...]
    norms: np.ndarray
    threshold: float
    rule: SelectionRule


def _norms(wts, groups):
    if isinstance(wts, MlpWeights):
        return group_norms(wts, groups)
    return np.asarray(wts, dtype=float)


def select_by_threshold(wts, groups: GroupStructure | None = None,
                        ratio: float = THRESHOLD_RATIO) -> SelectionResult:
    """Keep groups whose norm is at least ``ratio`` times the largest norm.

    ``wts`` is either trained weights (with ``groups``) or the norm vector.
    """
    n = _norms(wts, groups)
    top = float(n.max()) if n.size else 0.0
    if not top > 0:
        raise ValueError("no signal: every group norm is zero")
    theta = ratio * top
    sel = tuple(int(i) for i in np.flatnonzero(n >= theta))
    return SelectionResult(sel, n, theta, SelectionRule.RELATIVE_THRESHOLD)


def select_top_d(wts, groups: GroupStructure | None = None, d: int = 1) -> SelectionResult:
    """The ``d`` groups with the largest norms; ties go to the lower index."""
    n = _norms(wts, groups)
    if not 1 <= d <= n.size:
        raise ValueError(f"d must be in 1..{n.size}, got {d}")
    order = np.argsort(-n, kind="stable")
    sel = tuple(sorted(int(i) for i in order[:d]))
    return SelectionResult(sel, n, float(n[order[d - 1]]), SelectionRule.TOP_D)


@dataclass(frozen=True)
class RedundancyStats:
    max_abs_corr: float
    avg_abs_corr: float
    max_dep: float
    avg_dep: float


def redundancy_stats(d: Dataset, selection, groups: GroupStructure) -> RedundancyStats:
    """Correlation over unordered pairs of selected features, dependency over
    ordered pairs of distinct selected groups. One item gives zeros."""
    sel = list(selection.selected if isinstance(selection, SelectionResult) else selection)
    feats = groups.features_of(sel)
    mc = ac = md = ad = 0.0
    if feats.size > 1:
        R = np.abs(correlation_matrix(d.features[feats]))
        iu = np.triu_indices(feats.size, 1)
        mc, ac = float(R[iu].max()), float(R[iu].mean())
    if len(sel) > 1:
        D = group_dep_matrix(d.features, groups).values[np.ix_(sel, sel)]
        off = D[~np.eye(len(sel), dtype=bool)]
        md, ad = float(off.max()), float(off.mean())
    return RedundancyStats(mc, ac, md, ad)


def derive_seed(master: int, *key: int) -> int:
    """Independent 32-bit seed for a (repeat, stage, ...) position."""
    ss = np.random.SeedSequence(master, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1)[0])


def _map(fn, items, n_jobs):
    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def hidden_node_errors(train_set: Dataset, k: int = 10, seed: int = 0, h_range=range(2, 21),
                       eta: float = 0.01, max_iters: int = 500, n_jobs: int = 1,
                       backend: str | None = None) -> np.ndarray:
    """Validation misclassification rate, one row per candidate ``h`` and one column per fold.

    A cell whose training fails scores 1.0.
    """
    hs = list(h_range)
    plan = kfold(SplitPlan(np.arange(train_set.n_samples), np.array([], dtype=np.intp)), k, seed)
    cells = [(i, j) for i in range(len(hs)) for j in range(k)]

    def run(cell):
        i, j = cell
        val = plan.folds[j]
        fit = np.concatenate([f for q, f in enumerate(plan.folds) if q != j])
        cfg = TrainConfig(eta=eta, max_iters=max_iters, hidden=hs[i],
                          seed=derive_seed(seed, hs[i], j), checkpoint_every=0)
        try:
            w, _ = train(train_set.samples(fit), None, cfg, backend=backend)
        except (TrainingDiverged, FloatingPointError) as exc:
            log.warning("hidden-node search: h=%d fold=%d failed: %s", hs[i], j, exc)
            return 1.0
        val_set = train_set.samples(val)
        return 1.0 - accuracy(predict(w, val_set.features), val_set.labels)

    errs = np.array(_map(run, cells, n_jobs), dtype=float)
    return errs.reshape(len(hs), k)


def choose_hidden_nodes(train_set: Dataset, k: int = 10, seed: int = 0, h_range=range(2, 21),
                        **kw) -> int:
    """Candidate ``h`` with the lowest mean validation error; ties go to the smallest."""
    hs = list(h_range)
    if not hs:
        raise ValueError("empty hidden-node range")
    if len(hs) == 1:
        return hs[0]
    mean = hidden_node_errors(train_set, k, seed, hs, **kw).mean(axis=1)
    return hs[int(np.argmin(mean))]


@dataclass(frozen=True)
class EvaluationReport:
    test_accuracy: float
    distinct_selected: int
    avg_selected: float
    max_abs_corr: float
    avg_abs_corr: float
    max_dep: float
    avg_dep: float
    selected: tuple = ()
    hidden_nodes: int | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class CvReport:
    repeats: tuple[EvaluationReport, ...]
    chosen_hidden_nodes: tuple
    FinalTestAcc: float
    summary: EvaluationReport
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "FinalTestAcc": self.FinalTestAcc,
            "summary": _report_dict(self.summary),
            "chosen_hidden_nodes": list(self.chosen_hidden_nodes),
            "repeats": [_report_dict(r) for r in self.repeats],
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["repeat", "hidden_nodes", "test_accuracy", "n_selected", "selected",
                    "max_abs_corr", "avg_abs_corr", "max_dep", "avg_dep", "error"])
        for i, r in enumerate(self.repeats):
            w.writerow([i + 1, "" if r.hidden_nodes is None else r.hidden_nodes,
                        _num(r.test_accuracy), len(r.selected),
                        " ".join(str(j + 1) for j in r.selected),
                        _num(r.max_abs_corr), _num(r.avg_abs_corr), _num(r.max_dep),
                        _num(r.avg_dep), r.error or ""])
        return buf.getvalue()


def _num(x):
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def _report_dict(r: EvaluationReport) -> dict:
    out = asdict(r)
    out["selected"] = [j + 1 for j in r.selected]
    for k, v in out.items():
        if isinstance(v, float) and math.isnan(v):
            out[k] = None
    return out


def _failed(msg, h=None):
    nan = float("nan")
    return EvaluationReport(nan, 0, nan, nan, nan, nan, nan, (), h, msg)


def run_algorithm1(d: Dataset, groups: GroupStructure, lam: float = 0.0, mu: float = 0.0, *,
                   repeats: int = 10, seed: int = 0, eta: float = 0.01, max_iters: int = 500,
                   folds: int = 10, h_range=range(2, 21), split: SplitPlan | None = None,
                   train_fraction: float = 0.8, top_d: int | None = None,
                   normalize: str = "whole", kind: PenaltyKind = PenaltyKind.PROPOSED,
                   max_failures: int = 2, n_jobs: int = 1, backend: str | None = None) -> CvReport:
    """Repeated split / hidden-node search / penalized fit / selection / retrain / test.

    ``split`` pins the train/test partition for every repeat. ``normalize`` is
    ``"whole"`` (z-score the full data set once), ``"train"`` (statistics from
    each training split) or ``"none"``. Failed repeats are logged and left out
    of the means; more than ``max_failures`` of them raises
    :class:`ExperimentFailure`.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    if normalize not in ("whole", "train", "none"):
        raise ValueError(f"unknown normalize mode {normalize!r}")
    if groups.p != d.p:
        raise DataError(f"group structure covers {groups.p} features, data has {d.p}")
    kind = PenaltyKind(kind)
    base = zscore_normalize(d)[0] if normalize == "whole" else d

    def one(r):
        plan = split or split_train_test(d.n_samples, train_fraction, derive_seed(seed, r, 0))
        data = base
        if normalize == "train":
            data = zscore_stats(d.samples(plan.train_indices)).apply(d)
        tr, te = data.samples(plan.train_indices), data.samples(plan.test_indices)
        h = None
        try:
            h = choose_hidden_nodes(tr, folds, derive_seed(seed, r, 1), h_range, eta=eta,
                                    max_iters=max_iters, backend=backend)
            pen = make_penalty(tr.features, groups, lam, mu, kind)
            cfg = TrainConfig(eta=eta, max_iters=max_iters, seed=derive_seed(seed, r, 2),
                              penalty=pen, hidden=h, checkpoint_every=0)
            w, _ = train(tr, groups, cfg, backend=backend)
            sel = select_top_d(w, groups, top_d) if top_d else select_by_threshold(w, groups)
            feats = groups.features_of(sel.selected)
            assert feats.size > 0, "selection emptied the feature set"
            cfg2 = TrainConfig(eta=eta, max_iters=max_iters, seed=derive_seed(seed, r, 3),
                               hidden=h, checkpoint_every=0)
            w2, _ = train(restrict(tr, feats), None, cfg2, backend=backend)
            te_r = restrict(te, feats)
            acc = accuracy(predict(w2, te_r.features), te_r.labels)
        except (TrainingDiverged, FloatingPointError, ValueError) as exc:
            log.warning("repeat %d failed: %s", r + 1, exc)
            return _failed(f"{type(exc).__name__}: {exc}", h)
        st = redundancy_stats(base, sel, groups)
        n = len(sel.selected)
        return EvaluationReport(acc, n, float(n), st.max_abs_corr, st.avg_abs_corr,
                                st.max_dep, st.avg_dep, sel.selected, h)

    reports = tuple(_map(one, range(repeats), n_jobs))
    good = [r for r in reports if r.ok]
    n_bad = len(reports) - len(good)
    if n_bad > max_failures or not good:
        raise ExperimentFailure(f"{n_bad} of {repeats} repeats failed")
    if n_bad:
        log.warning("%d of %d repeats failed and are excluded", n_bad, repeats)

    def mean(attr):
        return float(np.mean([getattr(r, attr) for r in good]))

    union = sorted(set().union(*(r.selected for r in good)))
    final = mean("test_accuracy")
    summary = EvaluationReport(final, len(union), mean("avg_selected"), mean("max_abs_corr"),
                               mean("avg_abs_corr"), mean("max_dep"), mean("avg_dep"),
                               tuple(union))
    config = {"lambda": lam, "mu": mu, "seed": seed, "eta": eta, "max_iters": max_iters,
              "repeats": repeats, "folds": folds, "hidden_range": [min(h_range), max(h_range)],
              "penalty": kind.value, "selection": f"top_{top_d}" if top_d else "threshold",
              "normalize": normalize, "fixed_split": split is not None,
              "groups": [[j + 1 for j in g] for g in groups.groups]}
    return CvReport(reports, tuple(r.hidden_nodes for r in reports), final, summary, config)
