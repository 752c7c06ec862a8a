"""Dense linear-algebra kernels: orthonormalization, projections, spectra.

Matrices are plain ``float64`` NumPy arrays; every function returns fresh
arrays and leaves its inputs untouched.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def as_matrix(M, name="matrix"):
    """Validate and return ``M`` as a finite 2-D float64 array (copy-free if possible)."""
    arr = np.asarray(M, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_vector(v, name="vector"):
    arr = np.asarray(v, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class OrthonormalBasis:
    """Orthonormal basis stored column-wise in an ``ambient_dim x dim`` array."""

    vectors: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError("basis vectors must be a 2-D array (one vector per column)")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)

    @classmethod
    def empty(cls, ambient_dim):
        return cls(np.zeros((ambient_dim, 0)))

    @property
    def ambient_dim(self):
        return self.vectors.shape[0]

    @property
    def dim(self):
        return self.vectors.shape[1]

    def projector(self):
        """Dense orthogonal projector onto the span."""
        return self.vectors @ self.vectors.T

    def complement(self):
        """Orthonormal basis of the orthogonal complement."""
        n, r = self.vectors.shape
        if r == 0:
            return OrthonormalBasis(np.eye(n))
        q, _ = np.linalg.qr(self.vectors, mode="complete")
        return OrthonormalBasis(q[:, r:])


def qr_orthonormalize(vectors, tol=None):
    """Orthonormal basis for the span of ``vectors`` with rank detection.

    Modified Gram-Schmidt with a second re-orthogonalization pass. A vector
    whose residual after projecting out the earlier basis vectors has norm
    ``<= tol`` is dropped.

    Parameters
    ----------
    vectors : array_like, shape (n, m) or sequence of length-n vectors
        Input vectors; a 2-D array is read column-wise.
    tol : float, optional
        Rank threshold. Defaults to ``1e-10 * max column norm``.

    Returns
    -------
    OrthonormalBasis
    """
    if isinstance(vectors, np.ndarray) and vectors.ndim == 2:
        V = np.array(vectors, dtype=np.float64)
    else:
        vecs = [np.asarray(v, dtype=np.float64).reshape(-1) for v in vectors]
        if not vecs:
            return OrthonormalBasis(np.zeros((0, 0)))
        dims = {v.size for v in vecs}
        if len(dims) != 1:
            raise ValueError("all vectors must share the same ambient dimension")
        V = np.column_stack(vecs)
    if not np.all(np.isfinite(V)):
        raise ValueError("vectors contain non-finite entries")
    n, m = V.shape
    if m == 0:
        return OrthonormalBasis.empty(n)
    if tol is None:
        tol = 1e-10 * max(np.linalg.norm(V, axis=0).max(), np.finfo(float).tiny)
    if tol <= 0:
        raise ValueError("tol must be positive")
    basis = []
    for j in range(m):
        w = V[:, j].copy()
        for _ in range(2):
            for b in basis:
                w -= (b @ w) * b
        nrm = np.linalg.norm(w)
        if nrm > tol:
            basis.append(w / nrm)
    if not basis:
        return OrthonormalBasis.empty(n)
    return OrthonormalBasis(np.column_stack(basis))


def project_complement(M, B):
    """Project every column of ``M`` onto the orthogonal complement of ``span(B)``."""
    M = as_matrix(M)
    if B.ambient_dim != M.shape[0]:
        raise ValueError(
            f"basis ambient dimension {B.ambient_dim} != matrix rows {M.shape[0]}"
        )
    if B.dim == 0:
        return M.copy()
    V = B.vectors
    return M - V @ (V.T @ M)


def project_onto(M, B):
    """Project every column of ``M`` onto ``span(B)``."""
    M = as_matrix(M)
    if B.ambient_dim != M.shape[0]:
        raise ValueError("dimension mismatch between basis and matrix")
    V = B.vectors
    return V @ (V.T @ M)


def singular_values(M):
    """Singular values in nonincreasing order (length ``min(rows, cols)``)."""
    M = as_matrix(M)
    if M.size == 0:
        return np.zeros(0)
    return np.linalg.svd(M, compute_uv=False)


def pseudo_inverse_solve(M, y):
    """Minimum-norm least-squares solution of ``M x ~= y``."""
    M = as_matrix(M)
    y = as_vector(y, "y")
    if M.shape[0] != y.size:
        raise ValueError(f"matrix has {M.shape[0]} rows but y has length {y.size}")
    x, *_ = np.linalg.lstsq(M, y, rcond=None)
    return x


def normalize_columns(M):
    """Return ``(M / column norms, norms)``; zero columns are left at zero."""
    M = as_matrix(M)
    norms = np.linalg.norm(M, axis=0)
    safe = np.where(norms > 0, norms, 1.0)
    return M / safe, norms
