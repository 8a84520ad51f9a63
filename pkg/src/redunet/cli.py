"""``redunet`` command line: deps, train, select, cv, trace, sweep.

Exit codes: 0 success, 2 input or usage error, 3 experiment failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import _kernels
from .data import (DataError, load_csv, load_fixed_split, load_groups, singleton_groups,
                   zscore_normalize)
from .dependency import feature_dep_matrix, group_dep_matrix
from .mlp import MlpWeights, accuracy, predict
from .penalty import PenaltyKind, make_penalty
from .selection import (ExperimentFailure, select_by_threshold, select_top_d, run_algorithm1)
from .trainer import TrainConfig, TrainingDiverged, train

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_OK, EXIT_INPUT, EXIT_FAILURE = 0, 2, 3

log = logging.getLogger("redunet")


class UsageError(Exception):
    pass


def _label(text):
    try:
        return int(text)
    except ValueError:
        return text


def _grid(text):
    try:
        vals = [float(t) for t in str(text).replace(";", ",").split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number list: {text!r}") from None
    return vals


def _nonneg(text):
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return v


def _pos(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return v


def _data_args(p, out_help, out_required=True):
    p.add_argument("--config", type=Path, help="TOML file supplying any flag (command line wins)")
    p.add_argument("--data", type=Path, required=True, help="CSV file, one sample per row")
    p.add_argument("--label", type=_label, default=-1,
                   help="label column: header name or 0-based index (default: last)")
    p.add_argument("--groups", type=Path, help="group spec file (default: one group per feature)")
    p.add_argument("--out", type=Path, required=out_required, help=out_help)


def _model_args(p):
    p.add_argument("--lambda", dest="lam", type=_nonneg, default=0.0, help="redundancy weight")
    p.add_argument("--mu", type=_nonneg, default=0.0, help="group lasso weight")
    p.add_argument("--eta", type=_pos, default=0.01, help="learning rate")
    p.add_argument("--iters", type=int, default=500, help="maximum iterations")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=_nonneg, default=0.0, help="norm smoothing epsilon")
    p.add_argument("--penalty", choices=[k.value for k in PenaltyKind], default="proposed")
    p.add_argument("--normalize", choices=["whole", "train", "none"], default="whole",
                   help="z-score the whole data set, each training split, or nothing")
    p.add_argument("--backend", choices=sorted(_kernels.BACKENDS), default=None)


def _cv_args(p):
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--hidden-min", type=int, default=2)
    p.add_argument("--hidden-max", type=int, default=20)
    p.add_argument("--split", type=Path, help="fixed train/test index file")
    p.add_argument("--top-d", type=int, default=None, help="keep the d largest groups instead of thresholding")
    p.add_argument("--jobs", type=int, default=1, help="worker threads")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="redunet", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("deps", help="dependency matrix (squared Pearson) as CSV")
    _data_args(p, "output CSV")

    p = sub.add_parser("train", help="train once and save the weights as JSON")
    _data_args(p, "weights JSON")
    _model_args(p)
    p.add_argument("--hidden", type=int, default=10)
    p.add_argument("--trace", type=Path, help="also write the trace CSV here")

    p = sub.add_parser("select", help="train once (or load weights) and select groups")
    _data_args(p, "selection JSON (default: stdout)", out_required=False)
    _model_args(p)
    p.add_argument("--hidden", type=int, default=10)
    p.add_argument("--weights", type=Path, help="select from saved weights instead of training")
    p.add_argument("--top-d", type=int, default=None)

    p = sub.add_parser("cv", help="full repeated selection experiment")
    _data_args(p, "output directory (report.json, repeats.csv)")
    _model_args(p)
    _cv_args(p)

    p = sub.add_parser("trace", help="per-iteration loss, gradient norm and group norms as CSV")
    _data_args(p, "output CSV")
    _model_args(p)
    p.add_argument("--hidden", type=int, default=10)

    p = sub.add_parser("sweep", help="cv over a lambda x mu grid, one CSV row per cell")
    _data_args(p, "output CSV")
    _model_args(p)
    _cv_args(p)
    p.add_argument("--lambdas", type=_grid, default=[0.0])
    p.add_argument("--mus", type=_grid, default=[0.0])
    return ap


def _apply_config(ap, argv):
    """Re-parse with defaults taken from ``--config`` so explicit flags win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=Path)
    known, _ = pre.parse_known_args(argv)
    if known.config is None:
        return ap.parse_args(argv)
    try:
        with open(known.config, "rb") as fh:
            conf = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise UsageError(f"cannot read config {known.config}: {exc}") from None
    cmd = next((a for a in argv if a in _subparsers(ap)), None)
    flat = {k: v for k, v in conf.items() if not isinstance(v, dict)}
    if cmd and isinstance(conf.get(cmd), dict):
        flat.update(conf[cmd])
    sp = _subparsers(ap).get(cmd)
    if sp is None:
        return ap.parse_args(argv)
    actions = {a.dest: a for a in sp._actions}
    aliases = {"lambda": "lam", "hidden-min": "hidden_min", "hidden-max": "hidden_max", "top-d": "top_d"}
    defaults = {}
    for key, val in flat.items():
        dest = aliases.get(key, key.replace("-", "_"))
        if dest not in actions or dest in ("help", "config"):
            raise UsageError(f"config: unknown key {key!r} for {cmd}")
        act = actions[dest]
        if act.type is not None and not isinstance(val, list):
            try:
                val = act.type(str(val))
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"config: bad value for {key!r}: {exc}") from None
        elif isinstance(val, list) and act.type is _grid:
            val = [float(v) for v in val]
        if act.choices is not None and val not in act.choices:
            raise UsageError(f"config: {key!r} must be one of {sorted(act.choices)}")
        defaults[dest] = val
        act.required = False
    sp.set_defaults(**defaults)
    return ap.parse_args(argv)


def _subparsers(ap):
    for a in ap._actions:
        if isinstance(a, argparse._SubParsersAction):
            return a.choices
    return {}


def _load(args):
    d = load_csv(args.data, label_column=args.label)
    g = load_groups(args.groups, d.p) if args.groups else singleton_groups(d.p, d.feature_names)
    return d, g


def _prepared(args):
    d, g = _load(args)
    if getattr(args, "normalize", "none") != "none":
        d = zscore_normalize(d)[0]
    return d, g


def _train_cfg(args, d, g, max_iters=None):
    pen = make_penalty(d.features, g, args.lam, args.mu, args.penalty, args.eps)
    iters = args.iters if max_iters is None else max_iters
    if iters < 0 or args.hidden < 1:
        raise UsageError("--iters must be >= 0 and --hidden >= 1")
    return TrainConfig(eta=args.eta, max_iters=iters, seed=args.seed, penalty=pen, hidden=args.hidden)


def _write_matrix(path, M, names):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in np.atleast_2d(M):
            w.writerow([repr(float(v)) for v in row])


def cmd_deps(args):
    d, g = _load(args)
    if args.groups:
        _write_matrix(args.out, group_dep_matrix(d.features, g).values, g.names)
    else:
        _write_matrix(args.out, feature_dep_matrix(d.features).values, d.feature_names)
    return EXIT_OK


def cmd_train(args):
    d, g = _prepared(args)
    w, tr = train(d, g, _train_cfg(args, d, g), backend=args.backend)
    w.save(args.out)
    if args.trace:
        tr.to_csv(args.trace)
    acc = accuracy(predict(w, d.features), d.labels)
    print(f"iterations {tr.iterations_run}  loss {tr.loss_history[-1]:.6g}  "
          f"train accuracy {acc:.4f}")
    return EXIT_OK


def cmd_select(args):
    d, g = _prepared(args)
    if args.weights:
        try:
            w = MlpWeights.load(args.weights)
        except (OSError, KeyError, TypeError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read weights {args.weights}: {exc}") from None
        if w.V.shape[1] != d.p:
            raise DataError(f"weights expect {w.V.shape[1]} features, data has {d.p}")
    else:
        w, _ = train(d, g, _train_cfg(args, d, g), backend=args.backend)
    sel = select_top_d(w, g, args.top_d) if args.top_d else select_by_threshold(w, g)
    out = {"selected": [i + 1 for i in sel.selected],
           "selected_names": [g.names[i] for i in sel.selected],
           "features": [int(j) + 1 for j in g.features_of(sel.selected)],
           "norms": [float(v) for v in sel.norms], "threshold": sel.threshold,
           "rule": sel.rule.value}
    text = json.dumps(out, indent=2) + "\n"
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cv(args, d, g, lam, mu):
    if args.hidden_min < 1 or args.hidden_max < args.hidden_min:
        raise UsageError("need 1 <= --hidden-min <= --hidden-max")
    split = load_fixed_split(args.split, d.n_samples) if args.split else None
    return run_algorithm1(
        d, g, lam, mu, repeats=args.repeats, seed=args.seed, eta=args.eta,
        max_iters=args.iters, folds=args.folds,
        h_range=range(args.hidden_min, args.hidden_max + 1), split=split,
        top_d=args.top_d, normalize=args.normalize, kind=PenaltyKind(args.penalty),
        n_jobs=args.jobs, backend=args.backend)


def cmd_cv(args):
    d, g = _load(args)
    rep = _cv(args, d, g, args.lam, args.mu)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "report.json").write_text(rep.to_json())
    (args.out / "repeats.csv").write_text(rep.to_csv())
    print(f"FinalTestAcc {rep.FinalTestAcc:.4f}  avg selected {rep.summary.avg_selected:.2f}  "
          f"distinct {rep.summary.distinct_selected}")
    return EXIT_OK


def cmd_trace(args):
    d, g = _prepared(args)
    cfg = _train_cfg(args, d, g)
    try:
        _, tr = train(d, g, cfg, backend=args.backend)
    except TrainingDiverged as exc:
        if exc.trace is not None:
            exc.trace.to_csv(args.out)
        raise
    tr.to_csv(args.out)
    return EXIT_OK


def cmd_sweep(args):
    if not args.lambdas or not args.mus:
        raise UsageError("--lambdas and --mus must be non-empty")
    d, g = _load(args)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lambda", "mu", "FinalTestAcc", "avg_selected", "max_dep", "avg_dep"])
        for lam in args.lambdas:
            for mu in args.mus:
                if lam < 0 or mu < 0:
                    raise UsageError("grid values must be >= 0")
                s = _cv(args, d, g, lam, mu)
                w.writerow([repr(lam), repr(mu), repr(s.FinalTestAcc), repr(s.summary.avg_selected),
                            repr(s.summary.max_dep), repr(s.summary.avg_dep)])
                fh.flush()
    return EXIT_OK


COMMANDS = {"deps": cmd_deps, "train": cmd_train, "select": cmd_select, "cv": cmd_cv,
            "trace": cmd_trace, "sweep": cmd_sweep}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        args = _apply_config(ap, argv)
    except UsageError as exc:
        print(f"redunet: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, DataError, OSError) as exc:
        print(f"redunet: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ExperimentFailure, TrainingDiverged, FloatingPointError) as exc:
        print(f"redunet: experiment failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except ValueError as exc:
        print(f"redunet: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
