"""The Clustering Removal Algorithm end to end.

cluster columns -> centroid subspace -> project onto its orthogonal
complement and renormalize -> sparse solve -> unnormalize.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .clustering import ClusterModel, kmeans_columns, top_subspace
from .linalg import OrthonormalBasis, as_matrix, as_vector, project_complement
from .solvers import RecoveryResult, SolverOptions, bpdn, iht, omp


@dataclass
class CraTransform:
    """Decorrelated design and the bookkeeping needed to map back to ``beta``.

    ``x_tilde`` has unit columns orthogonal to ``subspace``; dropped columns
    (complement projection below ``drop_tol``) are stored as zero columns and
    excluded from the solve. ``normalizers[i]`` is the norm of the projected
    column ``i``.
    """

    subspace: OrthonormalBasis
    x_tilde: np.ndarray
    normalizers: np.ndarray
    dropped_columns: tuple = ()

    @property
    def retained(self):
        mask = np.ones(self.x_tilde.shape[1], dtype=bool)
        mask[list(self.dropped_columns)] = False
        return mask

    def project(self, v):
        """Apply the complement projector to a vector or matrix."""
        arr = np.asarray(v, dtype=np.float64)
        out = project_complement(arr if arr.ndim == 2 else arr[:, None], self.subspace)
        return out if arr.ndim == 2 else out[:, 0]


@dataclass
class CraEstimate:
    gamma_hat: np.ndarray
    beta_hat: np.ndarray
    transform: CraTransform
    solver_result: RecoveryResult
    cluster: ClusterModel | None = None
    y_tilde: np.ndarray | None = None
    timings: dict = field(default_factory=dict)


def build_transform(X, cluster, drop_tol=None):
    """Project ``X`` off the centroid subspace and renormalize each column.

    Parameters
    ----------
    X : ndarray, shape (n, p)
    cluster : ClusterModel or OrthonormalBasis
        Supplies the subspace to remove.
    drop_tol : float, optional
        Absolute threshold on the projected norm; defaults to
        ``1e-8 * ||X_i||`` per column.
    """
    X = as_matrix(X, "X")
    basis = cluster.subspace if isinstance(cluster, ClusterModel) else cluster
    if basis.dim >= X.shape[0]:
        raise ValueError("centroid subspace fills the whole space; nothing left to project onto")
    P = project_complement(X, basis)
    norms = np.linalg.norm(P, axis=0)
    thresh = 1e-8 * np.linalg.norm(X, axis=0) if drop_tol is None else np.full(norms.shape, drop_tol)
    dropped = norms <= thresh
    if np.all(dropped):
        raise ValueError("design entirely inside centroid subspace: every column was dropped")
    x_tilde = np.zeros_like(P)
    keep = ~dropped
    x_tilde[:, keep] = P[:, keep] / norms[keep]
    return CraTransform(
        subspace=basis,
        x_tilde=x_tilde,
        normalizers=norms,
        dropped_columns=tuple(int(i) for i in np.flatnonzero(dropped)),
    )


def error_inflation_factor(transform):
    """``max_i 1 / ||P_perp X_i||`` over retained columns."""
    keep = transform.retained
    if not np.any(keep):
        raise ValueError("no retained columns")
    return float(np.max(1.0 / transform.normalizers[keep]))


def estimate_cluster(X, q, method="kmeans", rng=None, **kwargs):
    """Cluster the columns and estimate the centroid subspace (``kmeans`` or ``top_subspace``)."""
    if q == 0:
        return ClusterModel.empty(X)
    if method == "kmeans":
        return kmeans_columns(X, q, rng=rng, **kwargs)
    if method == "top_subspace":
        return top_subspace(X, q)
    raise ValueError(f"unknown clustering method {method!r}")


def solve_transformed(transform, y, eta, solver="bpdn", opts=None, s=None):
    """Project y, solve the decorrelated problem and unnormalize, given a transform."""
    y = as_vector(y, "y")
    y_tilde = transform.project(y)
    keep = transform.retained
    A = transform.x_tilde[:, keep]
    if solver == "bpdn":
        res = bpdn(A, y_tilde, eta, opts)
    elif solver == "omp":
        res = omp(A, y_tilde, s if s is not None else min(A.shape))
    elif solver == "iht":
        if s is None:
            raise ValueError("iht needs a sparsity level s")
        res = iht(A, y_tilde, s, opts)
    else:
        raise ValueError(f"unknown solver {solver!r}")
    p = transform.x_tilde.shape[1]
    gamma = np.zeros(p)
    gamma[keep] = res.coefficients
    beta = np.zeros(p)
    beta[keep] = gamma[keep] / transform.normalizers[keep]
    full = RecoveryResult(gamma, float(np.linalg.norm(transform.x_tilde @ gamma - y_tilde)),
                          res.iterations, res.converged, res.status, res.trace)
    return gamma, beta, full, y_tilde


def run_cra(X, y, q, eta, clustering_method="kmeans", solver="bpdn", opts=None,
            rng=None, s=None, drop_tol=None, cluster=None):
    """Clustering Removal Algorithm.

    Parameters
    ----------
    X : ndarray, shape (n, p)
        Design with (ideally) unit-norm columns.
    y : ndarray, shape (n,)
    q : int
        Number of clusters to remove, ``0 <= q < n``. ``q = 0`` is the plain solve.
    eta : float
        Noise bound; passed unchanged to the projected problem since the
        projection cannot increase ``||u||``.
    clustering_method : {"kmeans", "top_subspace"}
    solver : {"bpdn", "omp", "iht"}
    cluster : ClusterModel, optional
        Precomputed clustering (e.g. true centroids); skips clustering.

    Returns
    -------
    CraEstimate
    """
    X = as_matrix(X, "X")
    y = as_vector(y, "y")
    if X.shape[0] != y.size:
        raise ValueError("X and y disagree on the number of observations")
    if not 0 <= q < X.shape[0]:
        raise ValueError(f"q = {q} must satisfy 0 <= q < n = {X.shape[0]}")
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    t0 = time.perf_counter()
    if cluster is None:
        cluster = estimate_cluster(X, q, clustering_method, rng=rng)
    t1 = time.perf_counter()
    transform = build_transform(X, cluster, drop_tol)
    gamma, beta, res, y_tilde = solve_transformed(transform, y, eta, solver, opts, s)
    t2 = time.perf_counter()
    return CraEstimate(gamma, beta, transform, res, cluster, y_tilde,
                       {"clustering": t1 - t0, "solve": t2 - t1})
