"""Random design generators: spherical caps, AR(2) factor model, noise, sparse signals."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .clustering import ClusterModel
from .linalg import as_vector, qr_orthonormalize
from .rng import as_generator, make_rng


@dataclass(frozen=True)
class CapSpec:
    """Spherical cap ``{x in S^{n-1} : <x, center> >= height}``."""

    center: np.ndarray
    height: float

    def __post_init__(self):
        c = as_vector(self.center, "center")
        if abs(np.linalg.norm(c) - 1.0) > 1e-10:
            raise ValueError("cap center must have unit norm")
        if not -1.0 < self.height < 1.0:
            raise ValueError("cap height must lie in (-1, 1)")
        c.setflags(write=False)
        object.__setattr__(self, "center", c)

    @property
    def dim(self):
        return self.center.size


@dataclass(frozen=True)
class CapEnsembleSpec:
    """Columns ``i`` drawn independently and uniformly from ``caps[assignment[i]]``."""

    caps: tuple
    assignment: np.ndarray

    def __post_init__(self):
        caps = tuple(self.caps)
        if not caps:
            raise ValueError("at least one cap is required")
        n = caps[0].dim
        if any(c.dim != n for c in caps):
            raise ValueError("all caps must live in the same dimension")
        if len(caps) > n:
            raise ValueError(f"q = {len(caps)} caps exceeds ambient dimension n = {n}")
        a = np.asarray(self.assignment, dtype=np.intp).reshape(-1)
        if a.size and (a.min() < 0 or a.max() >= len(caps)):
            raise ValueError("assignment refers to a cap that does not exist")
        a.setflags(write=False)
        object.__setattr__(self, "caps", caps)
        object.__setattr__(self, "assignment", a)

    @property
    def n(self):
        return self.caps[0].dim

    @property
    def p(self):
        return self.assignment.size

    @property
    def q(self):
        return len(self.caps)

    @classmethod
    def random(cls, n, p, q, height, rng=None, centers=None):
        """Balanced ensemble with ``q`` caps of equal ``height``.

        Centers are drawn uniformly on the sphere unless given (as an
        ``n x q`` array). Columns are assigned to caps in contiguous blocks.
        """
        if q > n:
            raise ValueError(f"q = {q} caps exceeds ambient dimension n = {n}")
        if centers is None:
            centers = sample_uniform_sphere(n, as_generator(rng), size=q)
        centers = np.asarray(centers, dtype=np.float64).reshape(n, q)
        caps = tuple(CapSpec(centers[:, j] / np.linalg.norm(centers[:, j]), height)
                     for j in range(q))
        assignment = (np.arange(p) * q) // p
        return cls(caps, assignment)


@dataclass(frozen=True)
class FactorModelSpec:
    """``X = F Lambda + Z`` with AR(2) factors (columns then scaled to unit norm)."""

    n: int
    p: int
    q: int
    ar_coeffs: tuple = (0.5, 0.3)
    idiosyncratic_std: float = 1.0
    loading_std: float = 1.0
    burn_in: int = 500

    def __post_init__(self):
        if min(self.n, self.p, self.q) < 1:
            raise ValueError("n, p, q must be positive")
        if self.q >= self.n:
            raise ValueError("factor count q must be smaller than n")
        a1, a2 = self.ar_coeffs
        # AR(2) stationarity triangle
        if not (a1 + a2 < 1 and a2 - a1 < 1 and abs(a2) < 1):
            raise ValueError(f"AR coefficients {self.ar_coeffs} are not stationary")
        if self.idiosyncratic_std < 0 or self.loading_std < 0:
            raise ValueError("standard deviations must be nonnegative")


@dataclass(frozen=True)
class NoiseSpec:
    snr_db: float
    rng_seed: int = 0


def sample_uniform_sphere(n, rng=None, size=None):
    """Uniform draw(s) from ``S^{n-1}``; ``size`` draws come back as columns."""
    if n < 1:
        raise ValueError("dimension must be at least 1")
    rng = as_generator(rng)
    m = 1 if size is None else size
    g = rng.standard_normal((n, m))
    nrm = np.linalg.norm(g, axis=0)
    while np.any(nrm == 0):  # measure-zero, but cheap to guard
        bad = nrm == 0
        g[:, bad] = rng.standard_normal((n, int(bad.sum())))
        nrm = np.linalg.norm(g, axis=0)
    out = g / nrm
    return out[:, 0] if size is None else out


def cap_height_sf(t, n):
    """Survival function of the height ``<x, z>`` for ``x`` uniform on ``S^{n-1}``."""
    a = (n - 1) / 2.0
    return stats.beta.sf((1.0 + np.asarray(t)) / 2.0, a, a)


def cap_height_cdf(t, n):
    a = (n - 1) / 2.0
    return stats.beta.cdf((1.0 + np.asarray(t)) / 2.0, a, a)


def _sample_heights(n, t0, rng, m):
    # conditional law of <x, z> given <x, z> >= t0: density ~ (1 - t^2)^((n-3)/2) on [t0, 1],
    # i.e. (1 + t)/2 is Beta((n-1)/2, (n-1)/2) truncated; invert through the survival
    # function so tight caps in high dimension keep full precision
    a = (n - 1) / 2.0
    tail = stats.beta.sf((1.0 + t0) / 2.0, a, a)
    u = rng.uniform(0.0, 1.0, m) * tail
    x = stats.beta.isf(u, a, a)
    return np.clip(2.0 * x - 1.0, t0, 1.0)


def sample_cap(spec, rng=None, size=None):
    """Uniform draw(s) from the spherical cap ``spec``; ``size`` draws come back as columns."""
    rng = as_generator(rng)
    z = spec.center
    n = z.size
    m = 1 if size is None else size
    if n == 1:
        out = np.tile(z[:, None], (1, m))
        return out[:, 0] if size is None else out
    t = _sample_heights(n, spec.height, rng, m)
    g = rng.standard_normal((n, m))
    g -= np.outer(z, z @ g)
    g /= np.linalg.norm(g, axis=0)
    out = z[:, None] * t + g * np.sqrt(np.maximum(1.0 - t * t, 0.0))
    out /= np.linalg.norm(out, axis=0)
    return out[:, 0] if size is None else out


def generate_cap_matrix(spec, rng=None):
    """Draw the design ``X`` of a cap ensemble.

    Returns
    -------
    X : ndarray, shape (n, p)
        Unit-norm columns, column ``i`` uniform on cap ``spec.assignment[i]``.
    truth : ClusterModel
        Ground-truth labels, the true centers as centroids, and their span.
    """
    rng = as_generator(rng)
    X = np.empty((spec.n, spec.p))
    for j, cap in enumerate(spec.caps):
        idx = np.nonzero(spec.assignment == j)[0]
        if idx.size:
            X[:, idx] = sample_cap(cap, rng, size=idx.size)
    centers = np.column_stack([c.center for c in spec.caps])
    truth = ClusterModel(
        labels=spec.assignment.copy(),
        centroids=centers,
        subspace=qr_orthonormalize(centers),
    )
    return X, truth


def ar2_factors(n, q, ar_coeffs=(0.5, 0.3), burn_in=500, rng=None):
    """``n x q`` matrix of independent AR(2) series with N(0, 1) innovations."""
    rng = as_generator(rng)
    a1, a2 = ar_coeffs
    T = burn_in + n
    v = rng.standard_normal((T, q))
    F = np.zeros((T, q))
    for t in range(T):
        prev1 = F[t - 1] if t >= 1 else 0.0
        prev2 = F[t - 2] if t >= 2 else 0.0
        F[t] = a1 * prev1 + a2 * prev2 + v[t]
    return F[burn_in:]


def generate_factor_matrix(spec, rng=None, normalize=True, return_factors=False):
    """Draw ``X = F Lambda + Z`` from a :class:`FactorModelSpec`.

    With ``normalize`` (the default) columns are scaled to unit norm. With
    ``return_factors`` the factor matrix ``F`` is returned as well.
    """
    rng = as_generator(rng)
    F = ar2_factors(spec.n, spec.q, spec.ar_coeffs, spec.burn_in, rng)
    loadings = spec.loading_std * rng.standard_normal((spec.q, spec.p))
    Z = spec.idiosyncratic_std * rng.standard_normal((spec.n, spec.p))
    X = F @ loadings + Z
    if normalize:
        norms = np.linalg.norm(X, axis=0)
        X = X / np.where(norms > 0, norms, 1.0)
    return (X, F) if return_factors else X


def add_noise_snr(signal, spec, rng=None):
    """Add Gaussian noise scaled so the realized SNR equals ``spec.snr_db`` exactly.

    Parameters
    ----------
    signal : array_like
        Clean observations ``y0 = X beta``.
    spec : NoiseSpec or float
        Target SNR in dB (``inf`` means no noise).
    rng : Generator, optional
        Overrides ``spec.rng_seed`` when given.

    Returns
    -------
    y : ndarray
        ``y0 + u``.
    eta : float
        ``||u||_2``.
    """
    if not isinstance(spec, NoiseSpec):
        spec = NoiseSpec(float(spec))
    y0 = as_vector(signal, "signal")
    s_norm = np.linalg.norm(y0)
    if s_norm == 0:
        raise ValueError("signal is identically zero; SNR is undefined")
    if math.isinf(spec.snr_db) and spec.snr_db > 0:
        return y0.copy(), 0.0
    rng = make_rng(spec.rng_seed) if rng is None else as_generator(rng)
    g = rng.standard_normal(y0.size)
    target = s_norm / 10.0 ** (spec.snr_db / 20.0)
    u = g * (target / np.linalg.norm(g))
    return y0 + u, float(np.linalg.norm(u))


def sample_sparse_beta(p, s, rng=None, low=1.0, high=2.0):
    """``s``-sparse vector with uniformly random support and i.i.d. U[low, high] entries."""
    if s > p:
        raise ValueError(f"sparsity s = {s} exceeds dimension p = {p}")
    if s < 0:
        raise ValueError("sparsity must be nonnegative")
    rng = as_generator(rng)
    beta = np.zeros(p)
    if s == 0:
        return beta
    support = rng.choice(p, size=s, replace=False)
    beta[support] = rng.uniform(low, high, size=s)
    return beta
