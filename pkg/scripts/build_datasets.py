"""Build the benchmark CSV files under ``data/`` from the KEEL repository dump.

The KEEL files ship inside the ``keel_ds`` wheel, which is reachable from a
plain package index, so no web access is needed::

    pip download --no-deps -d /tmp/keel keel-ds
    python scripts/build_datasets.py /tmp/keel/keel_ds-*.whl

Outputs (all comma separated, header row, label in the last column):

iris.csv, iris.groups
    UCI Iris (150 x 4, 3 classes); groups are sepal / petal.
wbc.csv
    Wisconsin breast cancer, complete cases only (683 x 9, 2 classes).
thyroid.csv
    new-thyroid features (215 x 5). KEEL only distributes the
    hyperthyroid-vs-rest binarization, so this file has 2 classes.
landsat.csv, landsat.groups, landsat.split
    Statlog satellite (6435 x 44, 6 classes). The 36 raw columns are cut
    into four blocks of nine consecutive columns; each block is augmented
    with its row-wise mean and standard deviation, giving four groups of 11.
    The split file holds the first 4435 rows as training and the last 2000
    as test.
"""

import argparse
import csv
import io
import sys
import zipfile
from pathlib import Path

import numpy as np

RAW = "keel_ds/data/{kind}/raw/{name}.dat"

WBC_NAMES = [
    "clump_thickness", "cell_size", "cell_shape", "marginal_adhesion",
    "epithelial_size", "bare_nuclei", "bland_chromatin", "normal_nucleoli",
    "mitoses",
]
THYROID_NAMES = ["t3_resin", "thyroxin", "triiodothyronine", "tsh", "tsh_diff"]
IRIS_NAMES = ["sepal_length", "sepal_width", "petal_length", "petal_width"]


def read_keel(zf, kind, name):
    rows = []
    text = zf.read(RAW.format(kind=kind, name=name)).decode()
    for line in io.StringIO(text):
        line = line.strip()
        if not line or line.startswith("@"):
            continue
        rows.append([t.strip() for t in line.split(",")])
    return rows


def write_csv(path, names, features, labels):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(names) + ["class"])
        for x, y in zip(features, labels):
            w.writerow([_fmt(v) for v in x] + [y])


def _fmt(v):
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def landsat_features(raw):
    cols, names = [], []
    for b in range(4):
        block = raw[:, 9 * b:9 * b + 9]
        cols.append(block)
        cols.append(block.mean(axis=1, keepdims=True))
        cols.append(block.std(axis=1, keepdims=True))
        names += [f"s{b + 1}_v{k + 1}" for k in range(9)]
        names += [f"s{b + 1}_mean", f"s{b + 1}_std"]
    return np.hstack(cols), names


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("wheel", type=Path, help="path to a keel_ds wheel")
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "data")
    args = ap.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)
    zf = zipfile.ZipFile(args.wheel)

    rows = read_keel(zf, "balanced", "iris")
    write_csv(args.out / "iris.csv", IRIS_NAMES, [r[:4] for r in rows], [r[4] for r in rows])
    (args.out / "iris.groups").write_text("# sepal; petal\n1-2;3-4\n")

    rows = read_keel(zf, "balanced", "wisconsin")
    labels = ["benign" if r[9] == "2" else "malignant" for r in rows]
    write_csv(args.out / "wbc.csv", WBC_NAMES, [r[:9] for r in rows], labels)

    rows = read_keel(zf, "imbalanced", "new-thyroid1")
    labels = ["hyper" if r[5] == "positive" else "other" for r in rows]
    write_csv(args.out / "thyroid.csv", THYROID_NAMES, [r[:5] for r in rows], labels)

    rows = read_keel(zf, "balanced", "satimage")
    raw = np.array([[float(v) for v in r[:36]] for r in rows])
    feats, names = landsat_features(raw)
    write_csv(args.out / "landsat.csv", names, feats, [r[36] for r in rows])
    (args.out / "landsat.groups").write_text("# four sensors of 9 values + mean + std\n1-11;12-22;23-33;34-44\n")
    n = len(rows)
    with open(args.out / "landsat.split", "w") as fh:
        fh.write(",".join(str(i) for i in range(4435)) + "\n")
        fh.write(",".join(str(i) for i in range(4435, n)) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
