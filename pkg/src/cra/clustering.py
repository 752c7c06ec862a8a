"""Column clustering and centroid-subspace estimation."""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .linalg import OrthonormalBasis, as_matrix, qr_orthonormalize
from .rng import as_generator


@dataclass
class ClusterModel:
    """Column partition, centroid matrix (``n x q``) and an orthonormal basis of its range."""

    labels: np.ndarray
    centroids: np.ndarray
    subspace: OrthonormalBasis
    objective: float = float("nan")
    history: list = field(default_factory=list)

    @property
    def q(self):
        return self.centroids.shape[1]

    @classmethod
    def empty(cls, X):
        """The trivial model with no centroids (CRA then reduces to the plain solve)."""
        n, p = np.shape(X)
        return cls(np.zeros(p, dtype=np.intp), np.zeros((n, 0)), OrthonormalBasis.empty(n))


def estimate_centroids(X, labels, q=None):
    """Centroid ``j`` = arithmetic mean of the columns labelled ``j``."""
    X = as_matrix(X, "X")
    labels = np.asarray(labels, dtype=np.intp).reshape(-1)
    if labels.size != X.shape[1]:
        raise ValueError("labels must cover every column of X")
    if q is None:
        q = int(labels.max()) + 1 if labels.size else 0
    counts = np.bincount(labels, minlength=q)
    if counts.size > q or np.any(counts[:q] == 0):
        empty = np.nonzero(counts[:q] == 0)[0].tolist()
        raise ValueError(f"cluster(s) {empty} have no members")
    sums = np.zeros((X.shape[0], q))
    np.add.at(sums.T, labels, X.T)
    return sums / counts


def _kmeanspp(X, q, rng, sq_norms):
    p = X.shape[1]
    centers = np.empty((X.shape[0], q))
    first = rng.integers(p)
    centers[:, 0] = X[:, first]
    d2 = np.maximum(sq_norms - 2 * X.T @ centers[:, 0] + sq_norms[first], 0.0)
    for j in range(1, q):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(p)
        else:
            idx = rng.choice(p, p=d2 / total)
        centers[:, j] = X[:, idx]
        d2 = np.minimum(d2, np.maximum(sq_norms - 2 * X.T @ X[:, idx] + sq_norms[idx], 0.0))
    return centers


def _sq_dists(X, centers, sq_norms):
    c_sq = np.einsum("ij,ij->j", centers, centers)
    return np.maximum(sq_norms[:, None] - 2 * X.T @ centers + c_sq[None, :], 0.0)


def _lloyd(X, q, max_iter, rng, sq_norms):
    centers = _kmeanspp(X, q, rng, sq_norms)
    labels = None
    history = []
    for _ in range(max_iter):
        d = _sq_dists(X, centers, sq_norms)
        new = np.argmin(d, axis=1)
        counts = np.bincount(new, minlength=q)
        # empty clusters: reseed from the column farthest from its current centroid
        for j in np.nonzero(counts == 0)[0]:
            own = d[np.arange(new.size), new]
            own[counts[new] <= 1] = -1.0  # never strip a singleton cluster
            far = int(np.argmax(own))
            new[far] = j
            counts = np.bincount(new, minlength=q)
            d[far, j] = 0.0
        centers = np.zeros_like(centers)
        np.add.at(centers.T, new, X.T)
        centers /= counts
        obj = float(_sq_dists(X, centers, sq_norms)[np.arange(new.size), new].sum())
        history.append(obj)
        if labels is not None and np.array_equal(new, labels):
            labels = new
            break
        labels = new
    return labels, centers, history


def kmeans_columns(X, q, restarts=10, max_iter=100, rng=None, n_jobs=1):
    """Cluster the columns of ``X`` by k-means (squared Euclidean distance).

    Each restart uses k-means++ seeding on its own random stream. The run with
    the lowest within-cluster sum of squares wins (ties go to the earliest
    restart). Centroids are the raw member means; the returned subspace
    orthonormalizes them.
    """
    X = as_matrix(X, "X")
    p = X.shape[1]
    if not 1 <= q <= p:
        raise ValueError(f"cluster count q = {q} must satisfy 1 <= q <= p = {p}")
    norms = np.linalg.norm(X, axis=0)
    if not np.allclose(norms, 1.0, atol=1e-6):
        warnings.warn("kmeans_columns expects unit-norm columns; proceeding anyway",
                      stacklevel=2)
    sq_norms = norms ** 2
    streams = as_generator(rng).spawn(restarts)

    def run(g):
        return _lloyd(X, q, max_iter, g, sq_norms)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            runs = list(pool.map(run, streams))
    else:
        runs = [run(g) for g in streams]
    best = min(range(restarts), key=lambda i: (runs[i][2][-1], i))
    labels, centers, history = runs[best]
    return ClusterModel(
        labels=labels,
        centroids=centers,
        subspace=qr_orthonormalize(centers),
        objective=history[-1],
        history=history,
    )


def top_subspace(X, q):
    """Span of the top-``q`` left singular vectors of ``X`` as a :class:`ClusterModel`.

    Labels assign each column to the singular direction nearest its normalized
    projection; they are informational only.
    """
    X = as_matrix(X, "X")
    n, p = X.shape
    if not 0 <= q <= min(n, p):
        raise ValueError(f"q = {q} must not exceed min(n, p) = {min(n, p)}")
    if q == 0:
        return ClusterModel.empty(X)
    U, s, _ = np.linalg.svd(X, full_matrices=False)
    U = U[:, :q]
    coords = U.T @ X
    cn = np.linalg.norm(coords, axis=0)
    coords = coords / np.where(cn > 0, cn, 1.0)
    labels = np.argmax(coords, axis=0)  # nearest unit direction <=> largest coordinate
    return ClusterModel(labels=labels, centroids=U * s[:q], subspace=OrthonormalBasis(U))


def scree(X):
    """Singular values and cumulative energy fraction, for choosing ``q`` by eye."""
    s = np.linalg.svd(as_matrix(X, "X"), compute_uv=False)
    energy = np.cumsum(s ** 2) / max(np.sum(s ** 2), np.finfo(float).tiny)
    return s, energy
