"""Empirical checks of the theory: RIP constants, unitary invariance, projected uniformity, spectra."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy import stats

from . import kernels
from .ensembles import CapEnsembleSpec, cap_height_cdf, generate_cap_matrix, sample_uniform_sphere
from .linalg import OrthonormalBasis, as_matrix, singular_values
from .pipeline import build_transform
from .rng import as_generator

EXHAUSTIVE_LIMIT = 10 ** 6


@dataclass(frozen=True)
class RipEstimate:
    """Restricted isometry constant of order ``order``.

    In ``monte_carlo`` mode, unless every subset was visited, ``delta`` is
    only a lower bound on the true constant.
    """

    order: int
    delta: float
    mode: str
    subsets_checked: int
    lam_min: float
    lam_max: float

    @property
    def is_lower_bound(self):
        return self.mode == "monte_carlo" and not self.exhaustive_coverage

    @property
    def exhaustive_coverage(self):
        return self.subsets_checked == self._total

    _total: int = 0


def _delta(lo, hi):
    return max(hi - 1.0, 1.0 - lo, 0.0)


def _enumerate(gram, k, total, threads):
    if threads <= 1 or total < 4096:
        return kernels.rip_range(gram, k, 0, total)
    bounds = np.linspace(0, total, threads + 1).astype(np.int64)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(
            lambda ab: kernels.rip_range(gram, k, int(ab[0]), int(ab[1] - ab[0])),
            zip(bounds[:-1], bounds[1:])))
    return min(p[0] for p in parts), max(p[1] for p in parts)


def random_subsets(p, k, m, rng):
    """``m`` uniformly random k-subsets of ``range(p)`` (rows, sorted)."""
    keys = rng.random((m, p))
    return np.sort(np.argpartition(keys, k - 1, axis=1)[:, :k], axis=1)


def rip_constant(X, k, mode="exhaustive", budget=EXHAUSTIVE_LIMIT, rng=None, threads=1):
    """Restricted isometry constant ``delta_k`` by brute force.

    ``delta_k`` is the largest deviation from 1 of any eigenvalue of
    ``X_T^T X_T`` over column subsets ``|T| = k``.

    Parameters
    ----------
    mode : {"exhaustive", "monte_carlo"}
        ``exhaustive`` visits all ``C(p, k)`` subsets and refuses when that
        exceeds ``budget``. ``monte_carlo`` visits ``budget`` random subsets
        (or all of them when ``budget >= C(p, k)``) and yields a lower bound.
    """
    X = as_matrix(X, "X")
    p = X.shape[1]
    if not 1 <= k <= p:
        raise ValueError(f"order k = {k} must lie in [1, p = {p}]")
    gram = X.T @ X
    total = comb(p, k)
    if mode == "exhaustive" or (mode == "monte_carlo" and budget >= total):
        if mode == "exhaustive" and total > budget:
            raise ValueError(
                f"exhaustive RIP needs C({p}, {k}) = {total} subsets, over the budget of {budget}; "
                "use mode='monte_carlo' for a lower bound")
        lo, hi = _enumerate(gram, k, total, threads)
        checked = total
    elif mode == "monte_carlo":
        subsets = random_subsets(p, k, int(budget), as_generator(rng))
        lo, hi = kernels.rip_subsets(gram, subsets)
        checked = int(budget)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return RipEstimate(k, _delta(lo, hi), mode, checked, lo, hi, total)


def haar_orthogonal(m, rng=None):
    """Haar-distributed ``m x m`` orthogonal matrix (QR of a Gaussian, signs fixed)."""
    rng = as_generator(rng)
    Q, R = np.linalg.qr(rng.standard_normal((m, m)))
    return Q * np.sign(np.diag(R))


@dataclass
class UnitaryInvarianceReport:
    order: int
    base_delta: float
    deltas: list
    max_deviation: float

    def passed(self, tol=1e-10):
        return self.max_deviation <= tol


def verify_unitary_invariance(A, q, k, trials=50, rng=None, unitaries=None):
    """Compare ``delta_k(A)`` with ``delta_k(U [A; 0_{q x p}])`` for orthogonal ``U``.

    ``unitaries`` overrides the random Haar draws.
    """
    A = as_matrix(A, "A")
    m = A.shape[0] + q
    padded = np.vstack([A, np.zeros((q, A.shape[1]))])
    base = rip_constant(A, k, "exhaustive").delta
    rng = as_generator(rng)
    if unitaries is None:
        unitaries = (haar_orthogonal(m, rng) for _ in range(trials))
    deltas = [rip_constant(np.asarray(U) @ padded, k, "exhaustive").delta for U in unitaries]
    dev = max((abs(d - base) for d in deltas), default=0.0)
    return UnitaryInvarianceReport(k, base, deltas, dev)


def sphere_marginal_cdf(t, m):
    """CDF of ``<x, v>`` for ``x`` uniform on ``S^{m-1}`` and a fixed unit ``v``."""
    return cap_height_cdf(t, m)


@dataclass
class UniformityReport:
    passed: bool
    dimension: int
    n_samples: int
    alpha: float
    mean_z: np.ndarray
    z_threshold: float
    ks_statistics: list
    ks_pvalues: list
    p_threshold: float


def uniformity_test(samples, subspace, alpha=0.01, n_directions=5, rng=None):
    """Test that unit vectors are uniform on the unit sphere of ``subspace``'s complement.

    ``samples`` holds one vector per column. They are written in an
    orthonormal basis of the complement (dimension ``m``); then

    * each coordinate mean is z-tested against 0 (sd ``1/sqrt(m N)``);
    * for ``n_directions`` random directions, a KS test compares the
      projections with the exact marginal CDF of the uniform law.

    All ``m + n_directions`` tests share ``alpha`` by Bonferroni.
    """
    S = as_matrix(samples, "samples")
    if isinstance(subspace, OrthonormalBasis):
        comp = subspace.complement()
    else:
        comp = OrthonormalBasis(subspace).complement()
    m = comp.dim
    if m <= 1:
        raise ValueError("complement dimension must be at least 2 for this test")
    if comp.ambient_dim != S.shape[0]:
        raise ValueError("samples and subspace disagree on the ambient dimension")
    coords = comp.vectors.T @ S
    N = coords.shape[1]
    n_tests = m + n_directions
    z = coords.mean(axis=1) * np.sqrt(m * N)
    z_thr = float(stats.norm.isf(alpha / (2 * n_tests)))
    p_thr = alpha / n_tests
    rng = as_generator(rng)
    dirs = sample_uniform_sphere(m, rng, size=n_directions)
    ks_stat, ks_p = [], []
    for j in range(n_directions):
        res = stats.kstest(dirs[:, j] @ coords, lambda t: sphere_marginal_cdf(t, m))
        ks_stat.append(float(res.statistic))
        ks_p.append(float(res.pvalue))
    passed = bool(np.all(np.abs(z) <= z_thr) and min(ks_p) > p_thr)
    return UniformityReport(passed, m, N, alpha, z, z_thr, ks_stat, ks_p, p_thr)


def gram_matrix(X, scale=None):
    """``X^T X / scale`` with ``scale = n`` by default."""
    X = as_matrix(X, "X")
    return X.T @ X / (X.shape[0] if scale is None else scale)


def max_coherence(X):
    """Largest off-diagonal magnitude of ``X^T X``."""
    G = as_matrix(X).T @ as_matrix(X)
    np.fill_diagonal(G, 0.0)
    return float(np.abs(G).max()) if G.size > 1 else 0.0


def uniform_reference(n, p, rng=None, dim=None):
    """``n x p`` matrix whose columns are uniform on the sphere of the first ``dim`` coordinates."""
    dim = n if dim is None else dim
    M = np.zeros((n, p))
    M[:dim] = sample_uniform_sphere(dim, as_generator(rng), size=p)
    return M


def spectrum_report(X, X_tilde, reference=None, rng=None):
    """Aligned singular-value sequences of ``X``, ``X_tilde`` and a uniform-columns reference.

    Returns a list of row dicts (``index, x, x_tilde, reference``); shorter
    sequences are padded with NaN.
    """
    X = as_matrix(X, "X")
    if reference is None:
        reference = uniform_reference(*X.shape, rng=rng)
    seqs = [singular_values(X), singular_values(X_tilde), singular_values(reference)]
    length = max(s.size for s in seqs)
    rows = []
    for i in range(length):
        vals = [s[i] if i < s.size else float("nan") for s in seqs]
        rows.append({"index": i + 1, "x": vals[0], "x_tilde": vals[1], "reference": vals[2]})
    return rows


def sample_complexity_curve(n_grid, p, q, height, k, delta_target=0.5, trials=10,
                            rng=None, budget=2000):
    """Monte Carlo ``delta_k`` of the decorrelated cap ensemble across ``n_grid``.

    For each ``n`` and trial: draw a cap ensemble, remove the span of the true
    centers, renormalize, and estimate ``delta_k`` from ``budget`` random
    subsets (a lower bound). Rows report the mean, standard deviation and the
    fraction of trials below ``delta_target``.
    """
    rng = as_generator(rng)
    rows = []
    for n in n_grid:
        deltas = []
        for _ in range(trials):
            spec = CapEnsembleSpec.random(n, p, q, height, rng)
            X, truth = generate_cap_matrix(spec, rng)
            Xt = build_transform(X, truth).x_tilde
            deltas.append(rip_constant(Xt, k, "monte_carlo", budget, rng).delta)
        d = np.asarray(deltas)
        rows.append({
            "n": int(n), "k": int(k), "trials": int(trials),
            "mean_delta": float(d.mean()), "std_delta": float(d.std(ddof=0)),
            "frac_below_target": float(np.mean(d <= delta_target)),
        })
    return rows
