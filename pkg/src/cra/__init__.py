"""Clustering Removal Algorithm toolkit.

Sparse regression when predictors come in tightly correlated clusters:
estimate the cluster centroids, project them out, renormalize, and solve a
well-conditioned sparse recovery problem.
"""
__version__ = "0.1.0"

from .clustering import ClusterModel, kmeans_columns, top_subspace
from .ensembles import (CapEnsembleSpec, CapSpec, FactorModelSpec, NoiseSpec, add_noise_snr,
                        generate_cap_matrix, generate_factor_matrix, sample_cap,
                        sample_sparse_beta, sample_uniform_sphere)
from .linalg import OrthonormalBasis, project_complement, qr_orthonormalize
from .pipeline import CraEstimate, CraTransform, build_transform, error_inflation_factor, run_cra
from .solvers import SolverOptions, RecoveryResult, best_k_approx, bpdn, iht, omp, swap_refine

__all__ = [
    "CapEnsembleSpec", "CapSpec", "ClusterModel", "CraEstimate", "CraTransform",
    "FactorModelSpec", "NoiseSpec", "OrthonormalBasis", "RecoveryResult", "SolverOptions",
    "add_noise_snr", "best_k_approx", "bpdn", "build_transform", "error_inflation_factor",
    "generate_cap_matrix", "generate_factor_matrix", "iht", "kmeans_columns", "omp",
    "project_complement", "qr_orthonormalize", "run_cra", "sample_cap", "sample_sparse_beta",
    "sample_uniform_sphere", "swap_refine", "top_subspace",
]
