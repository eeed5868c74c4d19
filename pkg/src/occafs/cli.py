"""
Command-line interface.

Subcommands: ``rank``, ``solve``, ``eval``, ``experiment``,
``compare-solvers`` and ``inject-noise``. Options may also come from a
``key = value`` config file (``--config``); command-line flags override the
file, which overrides built-in defaults.

Exit codes: 0 success, 2 input error, 3 numerical failure, 4 invariant
violation.
"""
import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from .baselines import pebfs_rank, pebfs_solve, ttest_rank
from .datasets import inject_noise_features, load_dataset, save_csv
from .exceptions import InvalidInputError, InvariantViolationError, NumericalError
from .locg import locg_solve
from .model import assemble_problem
from .pipeline import (
    DEFAULT_Q_GRID,
    METHODS,
    FeatureRanking,
    one_nn_evaluate,
    random_split,
    rank_features,
    run_experiment,
    select_top_q,
)
from .scf import SolverConfig, initial_point, scf_solve

EXIT_INPUT, EXIT_NUMERICAL, EXIT_INVARIANT = 2, 3, 4
TIMING_KEYS = ("seconds",)


def nonneg_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not v >= 0 or not np.isfinite(v):
        raise argparse.ArgumentTypeError(f"must be a finite value >= 0, got {text}")
    return v


def pos_float(text):
    v = nonneg_float(text)
    if v == 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return v


def pos_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def int_list(text):
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}")
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("values must be >= 1")
    return vals


def str_list(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def load_config_file(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            if not sep or not key.strip():
                raise InvalidInputError(f"{path}:{lineno}: expected key = value")
            out[key.strip().replace("-", "_")] = val.strip()
    return out


# ---------------------------------------------------------------- parser

def _data_args(p):
    p.add_argument("--config", help=argparse.SUPPRESS)
    p.add_argument("--data", required=True, help="dataset file")
    p.add_argument("--format", choices=("csv", "libsvm"), default="csv")
    p.add_argument("--label-column", type=int, default=-1,
                   help="CSV column holding the label (default: last)")


def _model_args(p):
    p.add_argument("--alpha", type=nonneg_float, default=0.01)
    p.add_argument("--eps0", type=nonneg_float, default=None,
                   help="row-norm perturbation (default 1e-3*sqrt(k/n))")
    p.add_argument("--allow-rank-deficient", action="store_true",
                   help="warn instead of failing when rank(A) < n-k+1")


def _solver_args(p, solver=True):
    if solver:
        p.add_argument("--solver", choices=("nepv", "accnepv"), default="accnepv")
    p.add_argument("--kkt-tol", type=pos_float, default=1e-5)
    p.add_argument("--max-iter", type=pos_int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-cache", action="store_true",
                   help="recompute A @ P instead of reusing A @ W (accnepv)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="occafs",
        description="Supervised feature selection by orthogonal CCA with "
                    "(2,1)-norm regularization.")
    parser.add_argument("--config", help="key = value defaults file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rank", help="rank features of a dataset")
    _data_args(p); _model_args(p); _solver_args(p)
    p.add_argument("--method", choices=METHODS, default="occa-fs")
    p.add_argument("--out", default="ranking.json")
    p.add_argument("--trace", help="write the solver trace CSV here")

    p = sub.add_parser("solve", help="solve the OCCA21 problem and save P")
    _data_args(p); _model_args(p); _solver_args(p)
    p.add_argument("--out", default="solution.json",
                   help="summary JSON (P is written next to it as .csv)")
    p.add_argument("--trace", help="write the solver trace CSV here")

    p = sub.add_parser("eval", help="1-NN accuracy of a saved ranking")
    _data_args(p)
    p.add_argument("--ranking", required=True, help="ranking JSON from `rank`")
    p.add_argument("--q", type=int_list, default=[10])
    p.add_argument("--test", help="separate test dataset (same format)")
    p.add_argument("--split-frac", type=pos_float, default=0.6)
    p.add_argument("--stratify", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the accuracies as JSON here")

    p = sub.add_parser("experiment", help="repeated-holdout 1-NN protocol")
    _data_args(p); _model_args(p); _solver_args(p)
    p.add_argument("--methods", type=str_list, default=list(METHODS))
    p.add_argument("--q", type=int_list, default=list(DEFAULT_Q_GRID),
                   help="comma-separated q grid")
    p.add_argument("--repeats", type=pos_int, default=10)
    p.add_argument("--split-frac", type=pos_float, default=0.6)
    p.add_argument("--stratify", action="store_true")
    p.add_argument("--workers", type=pos_int, default=os.cpu_count() or 1)
    p.add_argument("--out-json", default="experiment.json")
    p.add_argument("--out-csv", default="experiment.csv")
    p.add_argument("--trace-dir", help="one trace CSV per solver run")

    p = sub.add_parser("compare-solvers",
                       help="nepv vs accnepv from the same starting point")
    _data_args(p); _model_args(p); _solver_args(p, solver=False)
    p.add_argument("--noise", type=int, default=0,
                   help="inject this many blocks of 1000 noise features first")
    p.add_argument("--out-dir", default=".")

    p = sub.add_parser("inject-noise", help="append uniform noise features")
    _data_args(p)
    p.add_argument("--t", type=pos_int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV")
    return parser


def parse_args(argv=None):
    """Parse with config-file defaults applied beneath command-line flags."""
    parser = build_parser()
    pre_cfg = argparse.ArgumentParser(add_help=False)
    pre_cfg.add_argument("--config")
    known, _ = pre_cfg.parse_known_args(argv)
    if known.config:
        try:
            values = load_config_file(known.config)
        except (OSError, InvalidInputError) as exc:
            parser.error(str(exc))
        sub_action = next(a for a in parser._actions
                          if isinstance(a, argparse._SubParsersAction))
        for name, sp in sub_action.choices.items():
            defaults = {}
            dests = {a.dest: a for a in sp._actions}
            for key, raw in values.items():
                if key not in dests:
                    continue
                action = dests[key]
                if isinstance(action, argparse._StoreTrueAction):
                    defaults[key] = raw.lower() in ("1", "true", "yes", "on")
                else:
                    try:
                        defaults[key] = action.type(raw) if action.type else raw
                    except argparse.ArgumentTypeError as exc:
                        parser.error(f"config {key}: {exc}")
                    if action.choices and defaults[key] not in action.choices:
                        parser.error(f"config {key}: invalid choice {raw!r}")
                if action.required:
                    action.required = False
            sp.set_defaults(**defaults)
        unknown = set(values) - {a.dest for sp in sub_action.choices.values()
                                 for a in sp._actions}
        if unknown:
            parser.error(f"unknown config keys: {', '.join(sorted(unknown))}")
    args = parser.parse_args(argv)
    for req in ("data",):
        if hasattr(args, req) and getattr(args, req) is None:
            parser.error(f"--{req} is required")
    return args


# ---------------------------------------------------------------- helpers

def _load(args, path=None):
    path = path or args.data
    if not Path(path).is_file():
        raise InvalidInputError(f"no such file: {path}")
    kw = {"label_column": args.label_column} if args.format == "csv" else {}
    return load_dataset(path, args.format, **kw)


def _solver_config(args):
    return SolverConfig(kkt_tol=args.kkt_tol, max_iter=args.max_iter,
                        seed=args.seed, cache=not args.no_cache)


def _rank_check(args):
    return "warn" if args.allow_rank_deficient else "raise"


def _split_timing(d):
    timing = {k: d.pop(k) for k in TIMING_KEYS if k in d}
    return d, timing


def _write_json(path, obj):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def _report(msg):
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------- commands

def cmd_rank(args):
    ds = _load(args)
    cfg = _solver_config(args)
    if args.method == "occa-fs":
        r = rank_features(ds, args.alpha, args.solver, cfg, args.eps0,
                          _rank_check(args))
    elif args.method == "peb-fs":
        r = pebfs_rank(ds, args.alpha, cfg, args.eps0, _rank_check(args))
    else:
        r = ttest_rank(ds)
    d = r.to_dict()
    d["metadata"], timing = _split_timing(dict(d["metadata"]))
    d["timing"] = timing
    _write_json(args.out, d)
    if args.trace and r.trace is not None:
        r.trace.to_csv(args.trace)
    _report(f"wrote {args.out}; top features: "
            f"{[int(i) for i in r.order[:10]]}")
    return 0


def cmd_solve(args):
    ds = _load(args)
    pd = assemble_problem(ds.X, ds.labels, alpha=args.alpha, eps0=args.eps0,
                          rank_check=_rank_check(args))
    solve = {"nepv": scf_solve, "accnepv": locg_solve}[args.solver]
    t0 = time.perf_counter()
    P, trace = solve(pd, _solver_config(args))
    seconds = time.perf_counter() - t0
    p_path = str(Path(args.out).with_suffix(".csv"))
    np.savetxt(p_path, P, delimiter=",", fmt="%.17g")
    _write_json(args.out, {"solver": args.solver, "alpha": args.alpha,
                           "eps0": pd.eps0, "P": p_path, **trace.summary(),
                           "timing": {"seconds": seconds}})
    if args.trace:
        trace.to_csv(args.trace)
    _report(f"{trace.termination} after {trace.n_iter} iterations, "
            f"objective {trace.final.objective:.10g}")
    return 0


def cmd_eval(args):
    ds = _load(args)
    ranking = FeatureRanking.from_json(args.ranking)
    if len(ranking.order) != ds.n:
        raise InvalidInputError(
            f"ranking covers {len(ranking.order)} features, data has {ds.n}")
    if args.test:
        train, test = ds, _load(args, args.test)
        if test.n != ds.n:
            raise InvalidInputError("train and test feature counts differ")
    else:
        tr, te = random_split(ds.labels, args.split_frac,
                              np.random.default_rng(args.seed), args.stratify)
        train, test = ds.samples(tr), ds.samples(te)
    acc = {int(q): one_nn_evaluate(train, test, select_top_q(ranking, q))
           for q in args.q}
    for q, a in acc.items():
        print(f"q={q} accuracy={a:.4f}")
    if args.out:
        _write_json(args.out, {"method": ranking.method,
                               "accuracy": {str(q): a for q, a in acc.items()}})
    return 0


def cmd_experiment(args):
    ds = _load(args)
    for m in args.methods:
        if m not in METHODS:
            raise InvalidInputError(f"unknown method {m!r}")
    res = run_experiment(ds, methods=args.methods, q_grid=args.q,
                         alpha=args.alpha, repeats=args.repeats,
                         split_frac=args.split_frac, master_seed=args.seed,
                         solver=args.solver, cfg=_solver_config(args),
                         eps0=args.eps0, stratify=args.stratify,
                         rank_check=_rank_check(args), workers=args.workers)
    Path(args.out_json).parent.mkdir(parents=True, exist_ok=True)
    res.to_json(args.out_json)
    res.to_csv(args.out_csv)
    if args.trace_dir:
        tdir = Path(args.trace_dir)
        tdir.mkdir(parents=True, exist_ok=True)
        for (r, m), tr in sorted(res.traces.items()):
            tr.to_csv(tdir / f"trace_r{r:02d}_{m}.csv")
    print(res.format_table())
    return 0


def cmd_compare_solvers(args):
    ds = _load(args)
    if args.noise < 0:
        raise InvalidInputError("--noise must be >= 0")
    if args.noise:
        ds = inject_noise_features(ds, args.noise, seed=args.seed)
    pd = assemble_problem(ds.X, ds.labels, alpha=args.alpha, eps0=args.eps0,
                          rank_check=_rank_check(args))
    cfg = _solver_config(args)
    P0 = initial_point(pd, cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary, timing = {"n": pd.n, "k": pd.k, "alpha": args.alpha}, {}
    for name, solve in (("nepv", scf_solve), ("accnepv", locg_solve)):
        t0 = time.perf_counter()
        _, trace = solve(pd, cfg, P0=P0)
        timing[name] = time.perf_counter() - t0
        trace.to_csv(out / f"trace_{name}.csv")
        summary[name] = {**trace.summary(), "monotone": trace.is_monotone()}
    f1 = summary["nepv"]["objective"]
    f2 = summary["accnepv"]["objective"]
    summary["relative_difference"] = abs(f1 - f2) / max(abs(f1), 1e-300)
    timing["speedup"] = timing["nepv"] / max(timing["accnepv"], 1e-12)
    summary["timing"] = timing
    _write_json(out / "summary.json", summary)
    print(f"nepv    {summary['nepv']['iterations']:5d} it  {timing['nepv']:9.2f} s"
          f"  f = {f1:.12g}")
    print(f"accnepv {summary['accnepv']['iterations']:5d} it  "
          f"{timing['accnepv']:9.2f} s  f = {f2:.12g}")
    print(f"speedup {timing['speedup']:.1f}x, relative difference "
          f"{summary['relative_difference']:.2e}")
    return 0


def cmd_inject_noise(args):
    ds = _load(args)
    save_csv(inject_noise_features(ds, args.t, seed=args.seed), args.out)
    _report(f"wrote {args.out}")
    return 0


COMMANDS = {
    "rank": cmd_rank,
    "solve": cmd_solve,
    "eval": cmd_eval,
    "experiment": cmd_experiment,
    "compare-solvers": cmd_compare_solvers,
    "inject-noise": cmd_inject_noise,
}


def main(argv=None):
    args = parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (InvalidInputError, OSError) as exc:
        _report(f"error: {exc}")
        return EXIT_INPUT
    except InvariantViolationError as exc:
        _report(f"invariant violation: {exc}")
        return EXIT_INVARIANT
    except NumericalError as exc:
        _report(f"numerical failure: {exc}")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
