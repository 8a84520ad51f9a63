"""Dataset ingestion, normalization, splitting and feature-group handling.

Arrays follow the feature-major convention used throughout the package:
``features`` is ``p x N`` (one row per feature) and ``labels`` is a one-hot
``c x N`` matrix.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np


class DataError(ValueError):
    """Raised for malformed input files or invalid data arguments."""


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Labelled data set, ``features`` is p x N, ``labels`` is one-hot c x N."""

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]
    class_names: tuple[str, ...] = ()

    def __post_init__(self):
        X = _frozen(self.features)
        Y = _frozen(self.labels)
        if X.ndim != 2 or Y.ndim != 2:
            raise DataError("features and labels must be 2-D")
        p, n = X.shape
        c = Y.shape[0]
        if p < 1 or n < 2 or c < 2:
            raise DataError(f"need p >= 1, N >= 2, c >= 2; got p={p}, N={n}, c={c}")
        if Y.shape[1] != n:
            raise DataError(f"labels have {Y.shape[1]} columns, features have {n}")
        if not np.all(np.isfinite(X)):
            raise DataError("features contain non-finite values")
        if not (np.all((Y == 0) | (Y == 1)) and np.all(Y.sum(axis=0) == 1)):
            raise DataError("labels are not one-hot: every column needs exactly one 1")
        names = tuple(str(s) for s in self.feature_names)
        if len(names) != p:
            raise DataError(f"{len(names)} feature names for {p} features")
        cnames = tuple(str(s) for s in self.class_names) or tuple(str(k) for k in range(c))
        if len(cnames) != c:
            raise DataError(f"{len(cnames)} class names for {c} classes")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", Y)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "class_names", cnames)

    @property
    def p(self) -> int:
        return self.features.shape[0]

    @property
    def n_samples(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return self.labels.shape[0]

    @property
    def class_index(self) -> np.ndarray:
        return np.argmax(self.labels, axis=0)

    def samples(self, idx) -> "Dataset":
        """Column subset (samples), keeping all features."""
        idx = np.asarray(idx, dtype=np.intp)
        return Dataset(self.features[:, idx], self.labels[:, idx], self.feature_names, self.class_names)


@dataclass(frozen=True, eq=False)
class NormStats:
    """Per-feature mean and population standard deviation."""

    mean: np.ndarray
    std: np.ndarray

    def apply(self, d: Dataset) -> Dataset:
        scale = np.where(self.std > 0, self.std, 1.0)
        X = (d.features - self.mean[:, None]) / scale[:, None]
        X[self.std == 0] = 0.0
        return Dataset(X, d.labels, d.feature_names, d.class_names)


def _is_float(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def load_csv(path, label_column=-1, delimiter=None, header=None) -> Dataset:
    """Read a delimited text file into a :class:`Dataset`.

    Parameters
    ----------
    path : path-like
        CSV or TSV file.
    label_column : str or int
        Column holding the class label, by header name or 0-based index
        (negative indices count from the end).
    delimiter : str, optional
        Field separator. Defaults to tab for ``.tsv``/``.tab`` files and comma
        otherwise.
    header : bool, optional
        Whether the first row holds column names. Autodetected when ``None``:
        a first row with any non-numeric feature cell is taken as a header.

    Classes are numbered in order of first appearance.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    if delimiter is None:
        delimiter = "\t" if path.suffix.lower() in (".tsv", ".tab") else ","
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh, delimiter=delimiter) if any(c.strip() for c in r)]
    except (csv.Error, UnicodeDecodeError) as exc:
        raise DataError(f"{path}: parse failure: {exc}") from None
    if not rows:
        raise DataError(f"{path}: empty file")

    width = len(rows[0])
    if width < 2:
        raise DataError(f"{path}: need at least one feature column and one label column")

    names = None
    if header is None:
        if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
            header = True
        else:
            li = int(label_column) % width
            header = any(not _is_float(c) for k, c in enumerate(rows[0]) if k != li)
    if header:
        names = [c.strip() for c in rows[0]]
        rows = rows[1:]
        first_line = 2
    else:
        first_line = 1

    if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
        if names is None or label_column not in names:
            raise DataError(f"{path}: label column {label_column!r} not found in header")
        li = names.index(label_column)
    else:
        li = int(label_column)
        if not -width <= li < width:
            raise DataError(f"{path}: label column index {li} out of range for {width} columns")
        li %= width
    if names is None:
        names = [f"f{k + 1}" for k in range(width)]

    feats, labels = [], []
    for r, row in enumerate(rows):
        line = first_line + r
        if len(row) != width:
            raise DataError(f"{path}: ragged row at line {line}: {len(row)} fields, expected {width}")
        vals = []
        for k, cell in enumerate(row):
            if k == li:
                continue
            try:
                vals.append(float(cell))
            except ValueError:
                raise DataError(f"{path}: non-numeric feature cell {cell!r} at line {line}, column {k + 1}") from None
        feats.append(vals)
        labels.append(row[li].strip())

    classes = list(dict.fromkeys(labels))
    if len(classes) < 2:
        raise DataError(f"{path}: single-class label column {names[li]!r}")
    X = np.array(feats, dtype=float).T
    if not np.all(np.isfinite(X)):
        bad = np.argwhere(~np.isfinite(X))[0]
        raise DataError(f"{path}: non-finite value at line {first_line + bad[1]}, feature {bad[0]}")
    lookup = {c: k for k, c in enumerate(classes)}
    Y = np.zeros((len(classes), len(labels)))
    Y[[lookup[s] for s in labels], np.arange(len(labels))] = 1.0
    fnames = [nm for k, nm in enumerate(names) if k != li]
    return Dataset(X, Y, fnames, classes)


def zscore_stats(d: Dataset) -> NormStats:
    mean = d.features.mean(axis=1)
    std = d.features.std(axis=1)
    # exact-constant rows can leave round-off in std
    std = np.where(np.ptp(d.features, axis=1) == 0, 0.0, std)
    return NormStats(_frozen(mean), _frozen(std))


def zscore_normalize(d: Dataset) -> tuple[Dataset, NormStats]:
    """Standardize every feature row to mean 0 and population std 1.

    Constant rows map to zeros and record a std of 0.
    """
    stats = zscore_stats(d)
    return stats.apply(d), stats


@dataclass(frozen=True, eq=False)
class SplitPlan:
    train_indices: np.ndarray
    test_indices: np.ndarray
    folds: tuple[np.ndarray, ...] = ()
    seed: int | None = None

    def __post_init__(self):
        tr = _frozen(self.train_indices, np.intp)
        te = _frozen(self.test_indices, np.intp)
        if np.intersect1d(tr, te).size:
            raise DataError("train and test indices overlap")
        object.__setattr__(self, "train_indices", tr)
        object.__setattr__(self, "test_indices", te)
        object.__setattr__(self, "folds", tuple(_frozen(f, np.intp) for f in self.folds))


def split_train_test(n_samples: int, fraction: float = 0.8, seed: int = 0) -> SplitPlan:
    """Plain (unstratified) random split of ``range(n_samples)``."""
    if not 0.0 < fraction < 1.0:
        raise DataError(f"fraction must be in (0, 1), got {fraction}")
    n_train = int(round(fraction * n_samples))
    if fraction * n_samples < 1 or (1 - fraction) * n_samples < 1 or not 0 < n_train < n_samples:
        raise DataError(f"degenerate split: fraction {fraction} of {n_samples} samples")
    perm = np.random.default_rng(seed).permutation(n_samples)
    return SplitPlan(np.sort(perm[:n_train]), np.sort(perm[n_train:]), seed=seed)


def fixed_split(train_indices, test_indices, n_samples: int | None = None) -> SplitPlan:
    tr = np.asarray(train_indices, dtype=np.intp)
    te = np.asarray(test_indices, dtype=np.intp)
    if n_samples is not None:
        both = np.concatenate([tr, te])
        if both.size and (both.min() < 0 or both.max() >= n_samples):
            raise DataError(f"split index out of range for {n_samples} samples")
        if np.unique(both).size != n_samples or both.size != n_samples:
            raise DataError("fixed split must cover every sample exactly once")
    return SplitPlan(tr, te)


def load_fixed_split(path, n_samples: int | None = None) -> SplitPlan:
    """Read two lines of comma-separated 0-based indices: train, then test."""
    lines = [ln.strip() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if len(lines) != 2:
        raise DataError(f"{path}: expected 2 index lines, found {len(lines)}")
    try:
        tr, te = ([int(t) for t in ln.split(",") if t.strip()] for ln in lines)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    return fixed_split(tr, te, n_samples)


def kfold(plan: SplitPlan, k: int, seed: int = 0) -> SplitPlan:
    """Partition the training indices into ``k`` random folds of near-equal size."""
    n = plan.train_indices.size
    if not 1 <= k <= n:
        raise DataError(f"cannot make {k} folds from {n} training samples")
    perm = np.random.default_rng(seed).permutation(plan.train_indices)
    folds = tuple(np.sort(f) for f in np.array_split(perm, k))
    return SplitPlan(plan.train_indices, plan.test_indices, folds, plan.seed)


@dataclass(frozen=True)
class GroupStructure:
    """Partition of 0-based feature indices into ``s`` groups."""

    groups: tuple[tuple[int, ...], ...]
    p: int
    names: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        groups = tuple(tuple(int(j) for j in g) for g in self.groups)
        if not groups:
            raise DataError("at least one group is required")
        seen = {}
        for gi, g in enumerate(groups):
            if not g:
                raise DataError(f"group {gi + 1} is empty")
            for j in g:
                if not 0 <= j < self.p:
                    raise DataError(f"feature index {j + 1} out of range 1..{self.p}")
                if j in seen:
                    raise DataError(f"overlap at index {j + 1} (groups {seen[j] + 1} and {gi + 1})")
                seen[j] = gi
        missing = sorted(set(range(self.p)) - set(seen))
        if missing:
            raise DataError(f"missing indices {[m + 1 for m in missing]}")
        names = tuple(self.names) or tuple(f"G{i + 1}" for i in range(len(groups)))
        if len(names) != len(groups):
            raise DataError(f"{len(names)} names for {len(groups)} groups")
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "names", names)

    @property
    def s(self) -> int:
        return len(self.groups)

    @cached_property
    def sizes(self) -> np.ndarray:
        return _frozen([len(g) for g in self.groups], np.intp)

    @cached_property
    def membership(self) -> np.ndarray:
        """Group index of every feature."""
        out = np.empty(self.p, dtype=np.intp)
        for gi, g in enumerate(self.groups):
            out[list(g)] = gi
        out.setflags(write=False)
        return out

    @property
    def is_singleton(self) -> bool:
        return self.s == self.p

    def features_of(self, selected) -> np.ndarray:
        """Sorted feature indices covered by the given group indices."""
        idx = [j for gi in selected for j in self.groups[gi]]
        return np.array(sorted(idx), dtype=np.intp)


def singleton_groups(p: int, names: Sequence[str] | None = None) -> GroupStructure:
    return GroupStructure(tuple((j,) for j in range(p)), p, tuple(names) if names else ())


_ITEM = re.compile(r"^\s*(\d+)\s*(?:-\s*(\d+)\s*)?$")


def parse_groups(spec: str, p: int) -> GroupStructure:
    """Parse ``"1-2;3,5;4"``-style text: ``;`` separates groups, ``,`` lists
    members, ``a-b`` is an inclusive range, indices are 1-based.

    Lines that are blank or start with ``#`` are ignored.
    """
    body = ";".join(
        ln.split("#", 1)[0] for ln in spec.splitlines() if ln.split("#", 1)[0].strip()
    )
    groups = []
    for part in body.split(";"):
        if not part.strip():
            continue
        members = []
        for item in part.split(","):
            m = _ITEM.match(item)
            if m is None:
                raise DataError(f"bad group item {item.strip()!r}")
            lo = int(m.group(1))
            hi = int(m.group(2) or lo)
            if hi < lo:
                raise DataError(f"descending range {lo}-{hi}")
            members.extend(range(lo - 1, hi))
        groups.append(tuple(members))
    if not groups:
        raise DataError("empty group specification")
    # report overlap ahead of range/missing errors: it is the most common slip
    seen = set()
    for g in groups:
        for j in g:
            if j in seen:
                raise DataError(f"overlap at index {j + 1}")
            seen.add(j)
    return GroupStructure(tuple(groups), p)


def load_groups(path, p: int) -> GroupStructure:
    return parse_groups(Path(path).read_text(encoding="utf-8"), p)


def restrict(d: Dataset, indices) -> Dataset:
    """Keep only the listed feature rows, in the order given."""
    idx = np.asarray(indices, dtype=np.intp).ravel()
    if idx.size == 0:
        raise DataError("empty selection")
    if idx.min() < 0 or idx.max() >= d.p:
        raise DataError(f"feature index out of range 0..{d.p - 1}")
    return Dataset(d.features[idx], d.labels, [d.feature_names[j] for j in idx], d.class_names)
