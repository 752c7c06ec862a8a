"""Monte Carlo harness: paired trials over an SNR grid for five sparse estimators."""
from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .ensembles import (CapEnsembleSpec, FactorModelSpec, add_noise_snr, generate_cap_matrix,
                        generate_factor_matrix, sample_sparse_beta)
from .io import digest, write_table
from .linalg import normalize_columns
from .pipeline import build_transform, estimate_cluster, solve_transformed
from .rng import make_rng
from .solvers import SolverOptions, best_k_approx, bpdn, ols_debias, swap_refine

ESTIMATORS = ("cra", "cra_ols", "bpdn", "bpdn_ols", "swap")
RECORD_COLUMNS = ["snr_db", "trial", "estimator", "relative_error", "tpr", "converged", "status",
                  "input_digest"]
TIMING_COLUMNS = ["snr_db", "trial", "estimator", "wall_time"]
SUMMARY_COLUMNS = ["estimator", "snr_db", "trials", "failures", "mean_relative_error", "mean_tpr"]

# stream keys under the base seed
_DESIGN, _TRIAL, _CLUSTER = 0, 1, 2


def relative_error(beta, beta_hat, s):
    """``||beta - beta_hat^{(s)}||_2 / ||beta||_2`` with ``beta_hat^{(s)}`` the best s-term approximation."""
    beta = np.asarray(beta, dtype=np.float64).reshape(-1)
    nb = np.linalg.norm(beta)
    if nb == 0:
        raise ValueError("true coefficient vector is zero")
    return float(np.linalg.norm(beta - best_k_approx(beta_hat, s)) / nb)


def tpr(beta, beta_hat, s):
    """Fraction of ``supp(beta)`` found in the support of ``beta_hat^{(s)}``."""
    true = np.flatnonzero(np.asarray(beta).reshape(-1))
    if true.size == 0:
        raise ValueError("true support is empty")
    est = np.flatnonzero(best_k_approx(beta_hat, s))
    return float(np.intersect1d(true, est).size / true.size)


@dataclass
class ExperimentConfig:
    """A sweep definition.

    ``ensemble`` is a dict with ``kind`` equal to ``factor`` (fields of
    :class:`FactorModelSpec`), ``cap`` (``n, p, q, height``) or ``csv``
    (``path``, optional ``detrend``). ``rows`` keeps only the last ``rows``
    observations of the design (then renormalizes); ``q`` defaults to the
    ensemble's own ``q``.
    """

    ensemble: dict
    s: int = 20
    snr_grid: tuple = tuple(range(10, 101, 5))
    trials_per_level: int = 30
    estimators: tuple = ESTIMATORS
    q: int | None = None
    clustering_method: str = "kmeans"
    seed: int = 0
    rows: int | None = None
    solver: dict = field(default_factory=dict)

    def __post_init__(self):
        self.snr_grid = tuple(float(v) for v in self.snr_grid)
        self.estimators = tuple(self.estimators)
        if not self.snr_grid:
            raise ValueError("snr_grid must be nonempty")
        if self.trials_per_level < 1:
            raise ValueError("trials_per_level must be at least 1")
        if self.s < 1:
            raise ValueError("sparsity s must be positive")
        bad = set(self.estimators) - set(ESTIMATORS)
        if bad:
            raise ValueError(f"unknown estimator(s) {sorted(bad)}; choose from {list(ESTIMATORS)}")
        kind = self.ensemble.get("kind") if isinstance(self.ensemble, dict) else None
        if kind not in ("factor", "cap", "csv"):
            raise ValueError("ensemble.kind must be one of factor, cap, csv")
        if self.clustering_method not in ("kmeans", "top_subspace"):
            raise ValueError(f"unknown clustering method {self.clustering_method!r}")
        SolverOptions(**self.solver)  # validate early

    @property
    def cluster_count(self):
        return int(self.q if self.q is not None else self.ensemble.get("q", 0))

    def to_dict(self):
        d = asdict(self)
        d["snr_grid"] = list(self.snr_grid)
        d["estimators"] = list(self.estimators)
        return d

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config key(s): {sorted(extra)}")
        if "ensemble" not in d:
            raise ValueError("config needs an 'ensemble' section")
        return cls(**d)


@dataclass
class TrialRecord:
    snr_db: float
    trial: int
    estimator: str
    relative_error: float
    tpr: float
    wall_time: float
    converged: bool = True
    status: str = "ok"
    input_digest: str = ""

    @property
    def failed(self):
        return self.status.startswith("failed")


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list
    summary: list
    clustering_time: float
    design_digest: str
    error_inflation: float = float("nan")

    @property
    def hard_failures(self):
        return sum(r.failed for r in self.records)

    def write(self, out_dir, prefix=""):
        """Write ``records``, ``summary`` and ``timings`` CSVs; returns the paths.

        Records and summary are deterministic for a given config. Wall times
        are kept in the separate timings table.
        """
        paths = {
            "records": os.path.join(out_dir, f"{prefix}records.csv"),
            "summary": os.path.join(out_dir, f"{prefix}summary.csv"),
            "timings": os.path.join(out_dir, f"{prefix}timings.csv"),
        }
        write_table([asdict(r) for r in self.records], paths["records"], RECORD_COLUMNS)
        write_table(self.summary, paths["summary"], SUMMARY_COLUMNS)
        write_table([asdict(r) for r in self.records], paths["timings"], TIMING_COLUMNS)
        return paths


def build_design(config):
    """Design matrix (unit columns) and, for synthetic ensembles, the true cluster model."""
    ens = dict(config.ensemble)
    kind = ens.pop("kind")
    rng = make_rng(config.seed, _DESIGN)
    truth = None
    if kind == "factor":
        spec = FactorModelSpec(**{k: tuple(v) if k == "ar_coeffs" else v for k, v in ens.items()})
        X = generate_factor_matrix(spec, rng)
    elif kind == "cap":
        spec = CapEnsembleSpec.random(ens["n"], ens["p"], ens["q"], ens["height"], rng)
        X, truth = generate_cap_matrix(spec, rng)
    else:
        from .ingestion import load_csv, preprocess
        table = load_csv(ens["path"])
        X, _ = preprocess(table, ens.get("detrend", "linear"))
    if config.rows is not None:
        if not 1 <= config.rows <= X.shape[0]:
            raise ValueError(f"rows = {config.rows} must lie in [1, {X.shape[0]}]")
        X = X[X.shape[0] - config.rows:]
        truth = None  # true centroids no longer live in the truncated space
    X, _ = normalize_columns(X)
    return X, truth


def _timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


def _run_trial(X, transform, config, opts, snr_idx, snr, trial_idx, x_digest):
    rng = make_rng(config.seed, _TRIAL, snr_idx, trial_idx)
    s = config.s
    beta = sample_sparse_beta(X.shape[1], s, rng)
    y, eta = add_noise_snr(X @ beta, snr, rng)
    wanted = config.estimators
    records = []
    cache = {}

    def record(name, fn):
        # every estimator call hashes exactly the inputs it receives
        dig = digest(np.frombuffer(bytes.fromhex(x_digest), dtype=np.uint8), beta, y, eta)
        try:
            (beta_hat, res), wall = _timed(fn)
            rec = TrialRecord(snr, trial_idx, name, relative_error(beta, beta_hat, s),
                              tpr(beta, beta_hat, s), wall,
                              bool(res.converged) if res is not None else True,
                              "ok" if res is None or res.converged else f"not converged: {res.status}",
                              dig)
            cache[name] = (beta_hat, wall)
        except Exception as exc:  # recorded, the sweep continues
            rec = TrialRecord(snr, trial_idx, name, float("nan"), float("nan"), float("nan"),
                              False, f"failed: {type(exc).__name__}: {exc}", dig)
        if name in wanted:
            records.append(rec)

    def cra():
        _, b, res, _ = solve_transformed(transform, y, eta, "bpdn", opts)
        return b, res

    def bp():
        res = bpdn(X, y, eta, opts)
        return res.coefficients, res

    def ols_on(base):
        def fn():
            sup = np.flatnonzero(best_k_approx(cache[base][0], s))
            if sup.size == 0:  # base estimate is zero, nothing to refit
                return np.zeros(X.shape[1]), None
            return ols_debias(X, y, sup), None
        return fn

    def swap():
        b0, _ = cache["bpdn"]
        sup = np.flatnonzero(best_k_approx(b0, s))
        if sup.size == 0:
            sup = np.arange(s)  # zero initializer: start from the first s columns
        res = swap_refine(X, y, sup, opts)
        return res.coefficients, res

    if {"cra", "cra_ols"} & set(wanted):
        record("cra", cra)
        if "cra_ols" in wanted and "cra" in cache:
            record("cra_ols", ols_on("cra"))
    if {"bpdn", "bpdn_ols", "swap"} & set(wanted):
        record("bpdn", bp)
        if "bpdn_ols" in wanted and "bpdn" in cache:
            record("bpdn_ols", ols_on("bpdn"))
        if "swap" in wanted and "bpdn" in cache:
            record("swap", swap)
    # estimators that build on a failed base are reported as failed too
    have = {r.estimator for r in records}
    for name in wanted:
        if name not in have:
            records.append(TrialRecord(snr, trial_idx, name, float("nan"), float("nan"),
                                       float("nan"), False, "failed: base estimator failed", ""))
    # derived estimators include the cost of their base solve
    for r in records:
        if r.estimator in ("cra_ols", "bpdn_ols", "swap") and not r.failed:
            base = "cra" if r.estimator == "cra_ols" else "bpdn"
            r.wall_time += cache[base][1]
    order = {e: i for i, e in enumerate(ESTIMATORS)}
    return sorted(records, key=lambda r: order[r.estimator])


def summarize(records, estimators=ESTIMATORS, snr_grid=None):
    """Per-(estimator, SNR) means over non-failed trials."""
    snrs = snr_grid if snr_grid is not None else sorted({r.snr_db for r in records})
    rows = []
    for est in estimators:
        for snr in snrs:
            group = [r for r in records if r.estimator == est and r.snr_db == snr]
            if not group:
                continue
            ok = [r for r in group if not r.failed]
            rows.append({
                "estimator": est, "snr_db": snr, "trials": len(group),
                "failures": len(group) - len(ok),
                "mean_relative_error": float(np.mean([r.relative_error for r in ok])) if ok else float("nan"),
                "mean_tpr": float(np.mean([r.tpr for r in ok])) if ok else float("nan"),
            })
    return rows


def run_experiment(config, threads=1):
    """Run the full sweep.

    The design is drawn once. The centroid subspace is estimated once (timed
    separately). Each (SNR index, trial index) pair has its own random
    stream, so results do not depend on ``threads``. Within a trial every
    estimator receives the same ``(X, beta, u, eta)`` with ``eta = ||u||``.
    """
    X, truth = build_design(config)
    opts = SolverOptions(**config.solver)
    x_digest = digest(X)
    q = config.cluster_count
    transform, t_cluster, inflation = None, 0.0, float("nan")
    if {"cra", "cra_ols"} & set(config.estimators):
        cluster, t_cluster = _timed(estimate_cluster, X, q, config.clustering_method,
                                    rng=make_rng(config.seed, _CLUSTER))
        transform = build_transform(X, cluster)
        keep = transform.retained
        inflation = float(np.max(1.0 / transform.normalizers[keep]))
    jobs = [(i, snr, t) for i, snr in enumerate(config.snr_grid)
            for t in range(config.trials_per_level)]

    def work(job):
        i, snr, t = job
        return _run_trial(X, transform, config, opts, i, snr, t, x_digest)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(work, jobs))
    else:
        chunks = [work(j) for j in jobs]
    records = [r for c in chunks for r in c]
    summary = summarize(records, [e for e in ESTIMATORS if e in config.estimators], config.snr_grid)
    return ExperimentResult(config, records, summary, t_cluster, x_digest, inflation)


def reduced_observation_study(config, n_values, threads=1):
    """TPR sweep repeated with the design truncated to each ``n`` in ``n_values``.

    Returns one row per (estimator, SNR, consecutive pair) holding both mean
    TPRs and ``tpr_drop = tpr(n_from) - tpr(n_to)``.
    """
    n_values = list(n_values)
    if any(a < b for a, b in zip(n_values, n_values[1:])):
        raise ValueError("n_values must be sorted in descending order")
    means = []
    for n in n_values:
        cfg = ExperimentConfig.from_dict({**config.to_dict(), "rows": int(n)})
        res = run_experiment(cfg, threads)
        means.append({(r["estimator"], r["snr_db"]): r["mean_tpr"] for r in res.summary})
    rows = []
    for (n_from, m_from), (n_to, m_to) in zip(zip(n_values, means), zip(n_values[1:], means[1:])):
        for key in m_from:
            est, snr = key
            rows.append({"estimator": est, "snr_db": snr, "n_from": n_from, "n_to": n_to,
                         "tpr_from": m_from[key], "tpr_to": m_to[key],
                         "tpr_drop": m_from[key] - m_to[key]})
    return rows


def timing_report(records, clustering_time=None):
    """Mean wall time per estimator (failed trials excluded), plus an optional clustering row."""
    rows = []
    names = []
    for r in records:
        if r.estimator not in names:
            names.append(r.estimator)
    for est in names:
        times = [r.wall_time for r in records if r.estimator == est and not r.failed]
        rows.append({"estimator": est, "trials": len(times),
                     "mean_wall_time": float(np.mean(times)) if times else float("nan")})
    if clustering_time is not None and rows:
        rows.append({"estimator": "clustering", "trials": 1, "mean_wall_time": float(clustering_time)})
    return rows
