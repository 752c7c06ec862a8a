"""Command-line interface: ``cra generate | solve | diagnose | bench | ingest``.

Output goes to ``--out``, else ``$CRA_OUTPUT_DIR``, else the current
directory. Every command writes ``manifest_<command>.json`` listing its
outputs. Exit codes: 0 success, 1 usage error, 2 runtime failure.

Configuration precedence (highest first): command-line flags, the JSON
config file, built-in defaults.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .io import canonical_json, read_matrix, read_vector, write_matrix, write_table

OUTPUT_ENV = "CRA_OUTPUT_DIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def config_digest(cfg):
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()


def _out_dir(args):
    d = args.out or os.environ.get(OUTPUT_ENV) or "."
    os.makedirs(d, exist_ok=True)
    return d


def _write_manifest(out, command, cfg, outputs, started, extra=None):
    manifest = {
        "command": command,
        "version": __version__,
        "config": cfg,
        "config_digest": config_digest(cfg),
        "seed": cfg.get("seed"),
        "started": started,
        "finished": _now(),
        "outputs": sorted(os.path.basename(p) for p in outputs),
    }
    if extra:
        manifest.update(extra)
    path = os.path.join(out, f"manifest_{command}.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    return path


def _load_config(args):
    from .experiments import ExperimentConfig
    cfg = {}
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{args.config}: invalid JSON ({exc})") from None
        if not isinstance(cfg, dict):
            raise ValueError(f"{args.config}: top level must be an object")
    overrides = {
        "seed": args.seed, "trials_per_level": getattr(args, "trials", None),
        "snr_grid": getattr(args, "snr", None), "estimators": getattr(args, "estimators", None),
        "q": getattr(args, "q", None), "s": getattr(args, "s", None),
        "clustering_method": getattr(args, "clustering", None),
    }
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(cfg)


# ---------------------------------------------------------------- commands

def cmd_generate(args):
    from .ensembles import add_noise_snr, sample_sparse_beta
    from .experiments import build_design
    from .rng import make_rng
    started = _now()
    config = _load_config(args)
    out = _out_dir(args)
    X, truth = build_design(config)
    rng = make_rng(config.seed, 1, 0, 0)  # same stream as the first bench trial
    beta = sample_sparse_beta(X.shape[1], config.s, rng)
    snr = config.snr_grid[0]
    y, eta = add_noise_snr(X @ beta, snr, rng)
    outputs = [write_matrix(os.path.join(out, "X.csv"), X),
               write_matrix(os.path.join(out, "beta.csv"), beta),
               write_matrix(os.path.join(out, "y.csv"), y)]
    meta = {"n": X.shape[0], "p": X.shape[1], "s": config.s, "snr_db": snr, "eta": eta,
            "kind": config.ensemble["kind"]}
    if truth is not None:
        outputs.append(write_matrix(os.path.join(out, "centroids.csv"), truth.centroids))
        outputs.append(write_matrix(os.path.join(out, "labels.csv"), truth.labels))
    meta_path = os.path.join(out, "truth.json")
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    outputs.append(meta_path)
    _write_manifest(out, "generate", config.to_dict(), outputs, started)
    return 0


def cmd_solve(args):
    from .linalg import normalize_columns
    from .pipeline import run_cra
    from .rng import make_rng
    from .solvers import SolverOptions, bpdn, iht, omp, swap_refine
    started = _now()
    X = read_matrix(args.X)
    y = read_vector(args.y)
    if X.shape[0] != y.size:
        raise ValueError(f"dimension mismatch: X has {X.shape[0]} rows, y has {y.size} entries")
    eta = float(np.linalg.norm(y)) if args.eta is None else args.eta
    opts = SolverOptions(max_iter=args.max_iter)
    method = args.method
    if method in ("omp", "iht", "swap") and args.s is None:
        raise UsageError(f"method {method} needs --s")
    if method == "cra":
        Xn, norms = normalize_columns(X)
        est = run_cra(Xn, y, args.q, eta, args.clustering, "bpdn", opts, make_rng(args.seed))
        res = est.solver_result
        beta = np.where(norms > 0, est.beta_hat / np.where(norms > 0, norms, 1.0), 0.0)
    elif method == "bpdn":
        res = bpdn(X, y, eta, opts)
        beta = res.coefficients
    elif method == "omp":
        res = omp(X, y, args.s)
        beta = res.coefficients
    elif method == "iht":
        res = iht(X, y, args.s, opts)
        beta = res.coefficients
    else:
        init = np.argsort(-np.abs(bpdn(X, y, eta, opts).coefficients), kind="stable")[:args.s]
        res = swap_refine(X, y, init, opts)
        beta = res.coefficients
    out = _out_dir(args)
    path = write_matrix(os.path.join(out, "estimate.csv"), beta)
    cfg = {"X": args.X, "y": args.y, "method": method, "eta": eta, "q": args.q, "s": args.s,
           "seed": args.seed, "clustering": args.clustering, "max_iter": args.max_iter}
    _write_manifest(out, "solve", cfg, [path], started,
                    {"converged": res.converged, "status": res.status,
                     "iterations": res.iterations})
    return 0


def cmd_diagnose(args):
    from . import diagnostics as dg
    from .pipeline import build_transform, estimate_cluster
    from .rng import make_rng
    started = _now()
    out = _out_dir(args)
    rng = make_rng(args.seed)
    outputs = []
    X = read_matrix(args.X) if args.X else None
    needs_x = {"rip", "unitary", "gram", "spectrum"} & set(args.check)
    if needs_x and X is None:
        raise UsageError(f"checks {sorted(needs_x)} need --X")
    for check in args.check:
        path = os.path.join(out, f"{check}.csv")
        if check == "rip":
            est = dg.rip_constant(X, args.k, args.mode, args.budget, rng, args.threads)
            write_table([{"order": est.order, "delta": est.delta, "mode": est.mode,
                          "subsets_checked": est.subsets_checked,
                          "lower_bound": est.is_lower_bound}], path)
        elif check == "unitary":
            rep = dg.verify_unitary_invariance(X, args.q, args.k, args.trials, rng)
            write_table([{"order": rep.order, "trial": i, "delta": d,
                          "deviation": abs(d - rep.base_delta)} for i, d in enumerate(rep.deltas)]
                        + [{"order": rep.order, "trial": "base", "delta": rep.base_delta,
                            "deviation": rep.max_deviation}], path)
        elif check == "gram":
            write_matrix(path, dg.gram_matrix(X))
        elif check == "spectrum":
            cluster = estimate_cluster(X, args.q, args.clustering, rng=rng)
            xt = build_transform(X, cluster).x_tilde
            write_table(dg.spectrum_report(X, xt, rng=rng), path)
        elif check == "sample_complexity":
            write_table(dg.sample_complexity_curve(args.n_grid, args.p, args.q, args.height,
                                                   args.k, trials=args.trials, rng=rng,
                                                   budget=args.budget), path)
        outputs.append(path)
    cfg = {k: v for k, v in vars(args).items() if k not in ("func", "out")}
    _write_manifest(out, "diagnose", cfg, outputs, started)
    return 0


def cmd_bench(args):
    from .experiments import run_experiment, timing_report
    started = _now()
    config = _load_config(args)
    out = _out_dir(args)
    res = run_experiment(config, threads=args.threads)
    paths = res.write(out)
    tpath = os.path.join(out, "timing_report.csv")
    write_table(timing_report(res.records, res.clustering_time), tpath,
                ["estimator", "trials", "mean_wall_time"])
    _write_manifest(out, "bench", config.to_dict(), list(paths.values()) + [tpath], started,
                    {"design_digest": res.design_digest, "hard_failures": res.hard_failures,
                     "threads": args.threads})
    if res.hard_failures:
        print(f"{res.hard_failures} estimator run(s) failed; see records.csv", file=sys.stderr)
        return 2
    return 0


def cmd_ingest(args):
    from .ingestion import load_csv, preprocess
    started = _now()
    table = load_csv(args.input)
    X, labels = preprocess(table, args.detrend)
    out = _out_dir(args)
    xpath = write_matrix(os.path.join(out, "X.csv"), X)
    lpath = os.path.join(out, "labels.csv")
    with open(lpath, "w") as fh:
        fh.write("\n".join(labels or []) + "\n")
    cfg = {"input": args.input, "detrend": args.detrend, "seed": None}
    _write_manifest(out, "ingest", cfg, [xpath, lpath], started,
                    {"dropped_rows": table.dropped_rows, "n": X.shape[0], "p": X.shape[1]})
    return 0


# ---------------------------------------------------------------- parser

def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _words(text):
    return [v.strip() for v in text.split(",") if v.strip()]


def build_parser():
    p = _Parser(prog="cra", description="Sparse regression with correlated predictors.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or .)")
        sp.add_argument("--seed", type=int, default=None)

    g = sub.add_parser("generate", help="draw a design, planted beta and observations")
    common(g)
    g.add_argument("--config", required=True, help="JSON experiment config")
    g.add_argument("--s", type=int)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="recover beta from X and y")
    common(s)
    s.add_argument("--X", required=True)
    s.add_argument("--y", required=True)
    s.add_argument("--method", choices=["cra", "bpdn", "omp", "iht", "swap"], default="cra")
    s.add_argument("--eta", type=float, help="noise bound (default ||y||)")
    s.add_argument("--q", type=int, default=1)
    s.add_argument("--s", type=int)
    s.add_argument("--clustering", choices=["kmeans", "top_subspace"], default="kmeans")
    s.add_argument("--max-iter", type=int, default=10000)
    s.set_defaults(func=cmd_solve)

    d = sub.add_parser("diagnose", help="RIP, unitary invariance, Gram, spectrum, sample complexity")
    common(d)
    d.add_argument("--X")
    d.add_argument("--check", type=_words, default=["rip"],
                   help="comma list of rip,unitary,gram,spectrum,sample_complexity")
    d.add_argument("--k", type=int, default=2)
    d.add_argument("--mode", choices=["exhaustive", "monte_carlo"], default="exhaustive")
    d.add_argument("--budget", type=int, default=10 ** 6)
    d.add_argument("--q", type=int, default=1)
    d.add_argument("--trials", type=int, default=50)
    d.add_argument("--clustering", choices=["kmeans", "top_subspace"], default="kmeans")
    d.add_argument("--n-grid", type=_ints, default=[32, 64, 128])
    d.add_argument("--p", type=int, default=256)
    d.add_argument("--height", type=float, default=0.8)
    d.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    d.set_defaults(func=cmd_diagnose)

    b = sub.add_parser("bench", help="run a Monte Carlo sweep")
    common(b)
    b.add_argument("--config", required=True)
    b.add_argument("--trials", type=int)
    b.add_argument("--snr", type=_floats, help="comma list of SNR levels in dB")
    b.add_argument("--estimators", type=_words)
    b.add_argument("--q", type=int)
    b.add_argument("--s", type=int)
    b.add_argument("--clustering", choices=["kmeans", "top_subspace"])
    b.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    b.set_defaults(func=cmd_bench)

    i = sub.add_parser("ingest", help="load and preprocess a column-series CSV")
    common(i)
    i.add_argument("--input", required=True)
    i.add_argument("--detrend", choices=["none", "mean", "linear"], default="linear")
    i.set_defaults(func=cmd_ingest)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "check", None):
            bad = set(args.check) - {"rip", "unitary", "gram", "spectrum", "sample_complexity"}
            if bad:
                raise UsageError(f"unknown check(s): {sorted(bad)}")
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (OSError, ValueError, KeyError, TypeError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
