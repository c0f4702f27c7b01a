"""Command-line interface: ``rankad <command> [options]``.

Every command accepts ``--config FILE`` with ``key = value`` lines whose keys
match the long option names; explicit flags win over file values.  The
resolved configuration is echoed to stderr as ``# key = value`` lines.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical failure.
"""

import argparse
import csv
import logging
import sys

import numpy as np

from . import datagen, evaluation, knn, storage
from .detector import AkLpe
from .knn import DataError
from .pairs import DEFAULT_PAIR_CAP
from .pipeline import RankAD
from .selection import (
    CV_SOLVER,
    DEFAULT_C_VALUES,
    DEFAULT_CV_PAIR_CAP,
    DEFAULT_SIGMA_EXPONENTS,
    ParamGrid,
    cv_select,
)
from .solver import NumericalError, SolverConfig, TrainingError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
log = logging.getLogger("rankad")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text):
    try:
        return [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}")
    return [int(v) for v in vals]


def _bool(text):
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _add_common(p):
    p.add_argument("--config", help="key=value file; flags override its values")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_fit_options(p, pair_cap=DEFAULT_PAIR_CAP):
    p.add_argument("-K", "--K", dest="K", type=int, default=knn.DEFAULT_K, help="k-NN size (default 10)")
    p.add_argument("-m", "--levels", dest="levels", type=int, default=knn.DEFAULT_LEVELS, help="rank levels (default 3)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pair-cap", type=int, default=pair_cap)
    p.add_argument("--has-labels", type=_bool, nargs="?", const=True, default=False,
                   help="input has a trailing 0/1 label column; only label-0 rows are used")


def build_parser():
    parser = _Parser(prog="rankad", description="Ranking-based anomaly detection")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic dataset to CSV")
    _add_common(p)
    p.add_argument("--spec", default="fig2", help=f"built-in spec {sorted(datagen.BUILTIN_SPECS)} or 'config'")
    p.add_argument("--n", type=int, default=600)
    p.add_argument("--n-anomaly", type=int, default=0, help="append uniform-box anomalies and a label column")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weights", type=_floats, help="config mixture: component weights")
    p.add_argument("--means", type=_floats, help="config mixture: means, components separated by ';'")
    p.add_argument("--covs", type=_floats, help="config mixture: row-major covariances, separated by ';'")
    p.add_argument("--box-lower", type=_floats)
    p.add_argument("--box-upper", type=_floats)
    p.add_argument("-o", "--output", required=False)

    p = sub.add_parser("train", help="fit a detector on nominal data")
    _add_common(p)
    p.add_argument("--data", required=False)
    _add_fit_options(p)
    p.add_argument("--C", dest="C", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--cv", type=_bool, nargs="?", const=True, default=False,
                   help="choose C and sigma by cross-validation over the standard grid")
    p.add_argument("--folds", type=int, default=4)
    p.add_argument("--cv-pair-cap", type=int, default=DEFAULT_CV_PAIR_CAP,
                   help="pair cap of each cross-validation split")
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--max-epochs", type=int, default=500_000,
                   help="epoch cap; shrinking keeps late epochs cheap")
    p.add_argument("--model", required=False, help="output model file")

    p = sub.add_parser("detect", help="score and flag test points")
    _add_common(p)
    p.add_argument("--model")
    p.add_argument("--data")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--has-labels", type=_bool, nargs="?", const=True, default=False)
    p.add_argument("-o", "--output")

    p = sub.add_parser("eval", help="AUC, ROC curve and false alarm on labelled data")
    _add_common(p)
    p.add_argument("--model")
    p.add_argument("--data", help="CSV with trailing 0/1 label column")
    p.add_argument("--alphas", type=_floats, default=[0.05, 0.1, 0.2])
    p.add_argument("--roc-output", help="write the ROC curve here")
    p.add_argument("-o", "--output")

    p = sub.add_parser("cv", help="grid-search report")
    _add_common(p)
    p.add_argument("--data")
    _add_fit_options(p, DEFAULT_CV_PAIR_CAP)
    p.add_argument("--folds", type=int, default=4)
    p.add_argument("--c-values", type=_floats, default=list(DEFAULT_C_VALUES))
    p.add_argument("--sigma-exponents", type=_ints, default=list(DEFAULT_SIGMA_EXPONENTS),
                   help="sigma = 2**i * mean k-NN distance")
    p.add_argument("--sigma-values", type=_floats, help="explicit sigma list (overrides exponents)")
    p.add_argument("--tol", type=float, default=CV_SOLVER.tol)
    p.add_argument("--max-epochs", type=int, default=CV_SOLVER.max_epochs)
    p.add_argument("-o", "--output")

    p = sub.add_parser("level-grid", help="evaluate the scorer on a 2-D grid")
    _add_common(p)
    p.add_argument("--model")
    p.add_argument("--bbox", type=_floats, default=[-1.0, 9.0, -5.0, 5.0], help="xmin,xmax,ymin,ymax")
    p.add_argument("--resolution", type=_ints, default=[50])
    p.add_argument("-o", "--output")

    p = sub.add_parser("bench", help="per-point test latency vs the aK-LPE baseline")
    _add_common(p)
    p.add_argument("--model")
    p.add_argument("--train-data", help="nominal training CSV for the aK-LPE baseline")
    p.add_argument("--test-data")
    p.add_argument("-K", "--K", dest="K", type=int, default=knn.DEFAULT_K)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--max-points", type=int, default=500)
    p.add_argument("--has-labels", type=_bool, nargs="?", const=True, default=False,
                   help="test data has a trailing label column (ignored)")
    p.add_argument("-o", "--output")
    return parser


REQUIRED = {
    "synth": ["output"],
    "train": ["data", "model"],
    "detect": ["model", "data"],
    "eval": ["model", "data"],
    "cv": ["data"],
    "level-grid": ["model"],
    "bench": ["model", "train_data", "test_data"],
}


def _subparser(parser, command):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise KeyError(command)


def parse(argv):
    """Parse ``argv`` with config-file defaults applied under explicit flags."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError(parser.format_usage().strip())
    if args.config:
        try:
            values = storage.read_config(args.config)
        except OSError as exc:
            raise storage.ConfigError(f"cannot read config: {exc}") from None
        sp = _subparser(parser, args.command)
        dests = {a.dest: a for a in sp._actions}
        known = {}
        for key, raw in values.items():
            if key not in dests:
                print(f"# ignoring config key {key!r} (not an option of {args.command})", file=sys.stderr)
                continue
            known[key] = raw
        sp.set_defaults(**known)
        args = parser.parse_args(argv)
        # string defaults from the file are converted by argparse only for typed actions
        for key in known:
            action = dests[key]
            val = getattr(args, key)
            if isinstance(val, str) and action.type is not None:
                setattr(args, key, action.type(val))
    missing = [k for k in REQUIRED[args.command] if getattr(args, k, None) in (None, "")]
    if missing:
        raise UsageError(f"{args.command}: missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))
    return args


def _echo_config(args):
    for key, val in sorted(vars(args).items()):
        if key in ("verbose",):
            continue
        print(f"# {key} = {val}", file=sys.stderr)


def _open_out(path):
    return sys.stdout if path in (None, "-") else open(path, "w", newline="")


def _write_rows(path, header, rows):
    fh = _open_out(path)
    try:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    finally:
        if fh is not sys.stdout:
            fh.close()


def _fmt(x):
    return repr(float(x))


def _nominal_rows(path, has_labels):
    if not has_labels:
        return storage.load_dataset(path)
    X, y = storage.load_dataset(path, has_labels=True)
    return X[y == 0]


def _mixture_from_args(args):
    if args.spec != "config":
        if args.spec not in datagen.BUILTIN_SPECS:
            raise UsageError(f"unknown spec {args.spec!r}")
        return datagen.BUILTIN_SPECS[args.spec]
    if not (args.weights and args.means and args.covs):
        raise storage.ConfigError("spec=config needs weights, means and covs")
    k = len(args.weights)
    d = len(args.means) // k
    if d * k != len(args.means) or len(args.covs) != k * d * d:
        raise storage.ConfigError("means/covs sizes do not match the number of weights")
    try:
        return datagen.MixtureSpec(args.weights, np.reshape(args.means, (k, d)), np.reshape(args.covs, (k, d, d)))
    except ValueError as exc:
        raise storage.ConfigError(str(exc)) from None


def cmd_synth(args):
    spec = _mixture_from_args(args)
    if isinstance(spec, datagen.UniformBoxSpec):
        X = datagen.sample_uniform_box(spec, args.n, args.seed)
    else:
        X = datagen.sample_mixture(spec, args.n, args.seed)
    labels = None
    if args.n_anomaly:
        if args.box_lower and args.box_upper:
            box = datagen.UniformBoxSpec(args.box_lower, args.box_upper)
        elif args.spec == "fig2":
            box = datagen.GAUSSIAN_TOY_ANOMALY
        else:
            raise storage.ConfigError("anomalies need box_lower and box_upper for this spec")
        A = datagen.sample_uniform_box(box, args.n_anomaly, args.seed + 1)
        X = np.vstack([X, A])
        labels = np.r_[np.zeros(args.n, int), np.ones(args.n_anomaly, int)]
    storage.save_dataset(args.output, X, labels)
    print(f"# wrote {X.shape[0]} rows x {X.shape[1]} features to {args.output}", file=sys.stderr)


def cmd_train(args):
    X = _nominal_rows(args.data, args.has_labels)
    est = RankAD(
        K=args.K, m=args.levels, C=args.C, sigma=args.sigma, cv=args.cv, folds=args.folds,
        pair_cap=args.pair_cap, cv_pair_cap=args.cv_pair_cap, seed=args.seed, tol=args.tol,
        max_epochs=args.max_epochs,
    ).fit(X)
    info = est.model_.info
    params = est.params()
    params.update(
        mean_knn_distance=est.mean_knn_distance_,
        n_train=int(X.shape[0]),
    )
    storage.save_model(est.detector_, args.model, params)
    for key in ("C", "sigma", "n_pairs"):
        print(f"# {key} = {params[key]}", file=sys.stderr)
    print(
        f"# support = {est.model_.n_support}/{X.shape[0]}, epochs = {info.epochs}, "
        f"converged = {info.converged}, max_violation = {info.max_violation:.3g}",
        file=sys.stderr,
    )


def cmd_detect(args):
    det = storage.load_model(args.model)
    X = _nominal_rows(args.data, False) if not args.has_labels else storage.load_dataset(args.data, True)[0]
    scores, ranks, flags = det.classify_many(X, args.alpha)
    rows = [(_fmt(s), _fmt(r), int(f)) for s, r, f in zip(scores, ranks, flags)]
    _write_rows(args.output, ["score", "rank", "is_anomaly"], rows)


def cmd_eval(args):
    det = storage.load_model(args.model)
    X, y = storage.load_dataset(args.data, has_labels=True)
    if not (y == 0).any() or not (y == 1).any():
        raise DataError("evaluation data needs both nominal (0) and anomalous (1) rows")
    scores = det.score(X)
    curve, auc = evaluation.roc_auc(scores[y == 0], scores[y == 1])
    rows = [("auc", _fmt(auc))]
    for a in args.alphas:
        rows.append((f"false_alarm@{a:g}", _fmt(evaluation.empirical_false_alarm(det, X[y == 0], a))))
        rows.append((f"detection@{a:g}", _fmt(np.mean(det.flags(X[y == 1], a)))))
    _write_rows(args.output, ["metric", "value"], rows)
    if args.roc_output:
        _write_rows(
            args.roc_output,
            ["threshold", "fpr", "tpr"],
            [(_fmt(t), _fmt(f), _fmt(p)) for t, f, p in zip(curve.thresholds, curve.fpr, curve.tpr)],
        )


def cmd_cv(args):
    X = _nominal_rows(args.data, args.has_labels)
    if args.sigma_values:
        sigmas = sorted(args.sigma_values)
    else:
        dk = knn.mean_knn_distance(X, args.K)
        sigmas = [2.0**i * dk for i in sorted(args.sigma_exponents)]
    grid = ParamGrid(tuple(sorted(args.c_values)), tuple(sigmas))
    rep = cv_select(
        X, grid, args.folds, args.seed, K=args.K, m=args.levels, pair_cap=args.pair_cap,
        solver=SolverConfig(tol=args.tol, max_epochs=args.max_epochs),
    )
    header = ["C", "sigma", "mean_disagreement"] + [f"fold_{k + 1}" for k in range(rep.folds)]
    header += ["converged", "skipped", "chosen"]
    rows = []
    for c in sorted(rep.candidates, key=lambda c: (c.sigma, c.C)):
        folds = ["" if r is None else _fmt(r) for r in c.fold_rates]
        rows.append(
            [_fmt(c.C), _fmt(c.sigma), _fmt(c.mean_rate), *folds,
             int(all(c.converged)), int(c.skipped), int(c is rep.chosen)]
        )
    _write_rows(args.output, header, rows)
    print(f"# chosen C = {rep.C} sigma = {rep.sigma} disagreement = {rep.chosen.mean_rate:.4f}", file=sys.stderr)


def cmd_level_grid(args):
    det = storage.load_model(args.model)
    if len(args.bbox) != 4:
        raise UsageError("--bbox needs xmin,xmax,ymin,ymax")
    res = args.resolution[0] if len(args.resolution) == 1 else tuple(args.resolution[:2])
    grid = evaluation.level_grid(det.score, args.bbox, res, dim=det.model.dim)
    nodes = grid.nodes()
    rows = [(_fmt(x), _fmt(y), _fmt(v)) for (x, y), v in zip(nodes, grid.values.ravel())]
    _write_rows(args.output, ["x", "y", "score"], rows)


def cmd_bench(args):
    det = storage.load_model(args.model)
    base = AkLpe(storage.load_dataset(args.train_data), args.K)
    if args.has_labels:
        T = storage.load_dataset(args.test_data, has_labels=True)[0]
    else:
        T = storage.load_dataset(args.test_data)
    T = T[: args.max_points]
    rep = evaluation.latency_benchmark(det, base, T, args.repeats)
    rows = []
    for name, samples in (("rankad", rep.detector_samples), ("aklpe", rep.aklpe_samples)):
        rows.append([name, _fmt(np.median(samples)), *map(_fmt, samples)])
    _write_rows(args.output, ["method", "median_seconds"] + [f"repeat_{k + 1}" for k in range(args.repeats)], rows)
    print(f"# n_support = {rep.n_support}, n_train_scores = {rep.n_train}, n_baseline = {base.n}", file=sys.stderr)


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "detect": cmd_detect,
    "eval": cmd_eval,
    "cv": cmd_cv,
    "level-grid": cmd_level_grid,
    "bench": cmd_bench,
}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except storage.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except argparse.ArgumentTypeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="# %(message)s")
    _echo_config(args)
    try:
        COMMANDS[args.command](args)
    except (UsageError, storage.ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, storage.ModelFileError, TrainingError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
