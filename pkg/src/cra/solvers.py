"""Sparse-recovery engines: BPDN, OMP, IHT, a SWAP refinement, and OLS debiasing."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .kernels import project_l1_ball
from .linalg import as_matrix, as_vector, pseudo_inverse_solve

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverOptions:
    """Iteration limits and tolerances shared by the solvers.

    ``max_iter`` bounds the total inner (projected-gradient) iterations of
    :func:`bpdn` and the iterations/swaps of the greedy methods; ``max_outer``
    bounds the Newton updates of the Pareto-curve root finder.
    """

    max_iter: int = 10000
    opt_tol: float = 1e-6
    feas_tol: float = 1e-6
    max_outer: int = 30
    verbosity: int = 0
    trace: bool = False

    def __post_init__(self):
        if self.opt_tol <= 0 or self.feas_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1 or self.max_outer < 1:
            raise ValueError("iteration limits must be positive")


@dataclass
class RecoveryResult:
    coefficients: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    status: str = ""
    trace: list = field(default_factory=list)

    @property
    def support(self):
        return np.flatnonzero(self.coefficients)


def _result(X, y, z, iterations, converged, status, trace=None):
    return RecoveryResult(
        coefficients=z,
        residual_norm=float(np.linalg.norm(X @ z - y)),
        iterations=int(iterations),
        converged=bool(converged),
        status=status,
        trace=trace or [],
    )


def _check_xy(X, y):
    X = as_matrix(X, "X")
    y = as_vector(y, "y")
    if X.shape[0] != y.size:
        raise ValueError(f"X has {X.shape[0]} rows but y has length {y.size}")
    return X, y


def write_trace_csv(result, path):
    """Dump a solver trace as CSV with columns iteration, residual, l1_norm, tau."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "residual", "l1_norm", "tau"])
        for row in result.trace:
            w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])


# ---------------------------------------------------------------- BPDN

_STEP_MIN, _STEP_MAX = 1e-16, 1e16
_N_PREV = 10
_INNER_REL = 0.1


def _spg_lasso(X, y, tau, x, eta, opts, budget, it0, trace):
    """Spectral projected gradient on  min 0.5||Xx - y||^2  s.t. ||x||_1 <= tau.

    Runs until the relative duality gap is small enough for the outer Newton
    step (loose far from the root, ``opt_tol`` near it) or the budget runs out.
    """
    x = project_l1_ball(x, tau)
    r = y - X @ x
    g = -(X.T @ r)
    f = 0.5 * (r @ r)
    d = project_l1_ball(x - g, tau) - x
    dn = np.max(np.abs(d)) if d.size else 0.0
    step = _STEP_MAX if dn < 1.0 / _STEP_MAX else min(_STEP_MAX, max(_STEP_MIN, 1.0 / dn))
    last_f = np.full(_N_PREV, -np.inf)
    last_f[0] = f
    it = 0
    upper = eta * (1.0 + opts.feas_tol) if eta > 0 else opts.feas_tol
    while True:
        gnorm = np.max(np.abs(g)) if g.size else 0.0
        rnorm = np.sqrt(2.0 * f)
        gap = abs(r @ (r - y) + tau * gnorm)
        rgap = gap / max(1.0, f)
        excess = f - 0.5 * eta * eta
        if opts.trace:
            trace.append((it0 + it, rnorm, float(np.abs(x).sum()), tau))
        # accurate enough for a Newton step: gap small relative to the distance
        # from the target residual, or small in absolute terms once on target
        if gap <= _INNER_REL * excess or (
                rgap <= opts.opt_tol and (excess <= 0 or rnorm <= upper)):
            return x, r, g, f, rgap, it, True
        if it >= budget:
            return x, r, g, f, rgap, it, False
        it += 1
        d = project_l1_ball(x - step * g, tau) - x
        gtd = g @ d
        if gtd >= 0:  # projected gradient vanished: x is optimal for this tau
            return x, r, g, f, 0.0, it, True
        fmax = last_f.max()
        alpha = 1.0
        Xd = X @ d
        for _ in range(40):
            r_new = r - alpha * Xd
            f_new = 0.5 * (r_new @ r_new)
            if f_new <= fmax + 1e-4 * alpha * gtd:
                break
            alpha *= 0.5
        else:
            return x, r, g, f, rgap, it, False
        s = alpha * d
        x = x + s
        r = r_new
        g_new = -(X.T @ r)
        yv = g_new - g
        g = g_new
        f = f_new
        sty = s @ yv
        step = _STEP_MAX if sty <= 0 else min(_STEP_MAX, max(_STEP_MIN, (s @ s) / sty))
        last_f[it % _N_PREV] = f


def bpdn(X, y, eta, opts=None):
    """Basis pursuit denoise: ``min ||z||_1  s.t.  ||X z - y||_2 <= eta``.

    Root-finding on the Pareto curve ``phi(tau) = ||y - X z_tau||_2`` where
    ``z_tau`` solves the l1-ball constrained least-squares problem. Newton
    steps on ``tau`` use ``phi'(tau) = -||X^T r||_inf / ||r||_2``; each
    subproblem is solved by a nonmonotone spectral projected gradient method
    warm-started from the previous iterate.

    Parameters
    ----------
    X : ndarray, shape (n, p)
    y : ndarray, shape (n,)
    eta : float
        Residual bound, ``eta >= 0``.
    opts : SolverOptions, optional

    Returns
    -------
    RecoveryResult
        ``converged`` is False whenever the iteration limits were hit or no
        point with ``||X z - y|| <= eta`` exists.
    """
    opts = opts or SolverOptions()
    X, y = _check_xy(X, y)
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    n, p = X.shape
    bnorm = float(np.linalg.norm(y))
    trace = []
    if eta >= bnorm:
        return _result(X, y, np.zeros(p), 0, True, "zero solution is feasible", trace)
    ftol = opts.feas_tol * max(1.0, eta)
    # accept from below within ftol, from above only within a relative feas_tol
    # (an absolute slack when eta = 0, where no relative bound is attainable)
    upper = eta * (1.0 + opts.feas_tol) if eta > 0 else ftol
    x = np.zeros(p)
    tau = 0.0
    used = 0
    status = "iteration limit"
    converged = False
    r = y.copy()
    for outer in range(opts.max_outer + 1):
        x, r, g, f, rgap, it, ok = _spg_lasso(
            X, y, tau, x, eta, opts, opts.max_iter - used, used, trace)
        used += it
        rnorm = float(np.linalg.norm(r))
        gnorm = float(np.max(np.abs(g)))
        if opts.verbosity:
            logger.info("bpdn outer %d: tau=%.6g rnorm=%.6g rgap=%.3g iters=%d",
                        outer, tau, rnorm, rgap, used)
        if eta - ftol <= rnorm <= upper and ok:
            status, converged = "root found", True
            break
        if gnorm <= 1e-10 * max(rnorm, 1.0):
            status = "eta below least-squares residual"
            break
        if not ok or used >= opts.max_iter or outer == opts.max_outer:
            break
        tau_new = max(0.0, tau + (rnorm - eta) * rnorm / gnorm)
        if tau_new < tau:
            x = project_l1_ball(x, tau_new)
        tau = tau_new
    return _result(X, y, x, used, converged, status, trace)


# ---------------------------------------------------------------- greedy

def best_k_approx(b, k):
    """Keep the ``k`` largest-magnitude entries of ``b`` (ties: lowest index wins)."""
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if not 0 <= k <= b.size:
        raise ValueError(f"k = {k} must lie in [0, {b.size}]")
    out = np.zeros_like(b)
    if k:
        keep = np.argsort(-np.abs(b), kind="stable")[:k]
        out[keep] = b[keep]
    return out


def best_k_error(b, k, ord=1):
    """``sigma_k(b)`` in the l_ord norm."""
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    return float(np.linalg.norm(b - best_k_approx(b, k), ord))


def ols_debias(X, y, support):
    """Least squares restricted to ``support`` (minimum-norm if rank deficient); zeros elsewhere."""
    X, y = _check_xy(X, y)
    support = np.unique(np.asarray(list(support), dtype=np.intp))
    if support.size == 0:
        raise ValueError("support must be nonempty")
    z = np.zeros(X.shape[1])
    z[support] = pseudo_inverse_solve(X[:, support], y)
    return z


def omp(X, y, s, opts=None):
    """Orthogonal matching pursuit with at most ``s`` atoms."""
    X, y = _check_xy(X, y)
    n, p = X.shape
    if s > min(n, p):
        raise ValueError(f"s = {s} exceeds min(n, p) = {min(n, p)}")
    z = np.zeros(p)
    support = []
    r = y.copy()
    ynorm = np.linalg.norm(y)
    for _ in range(s):
        if np.linalg.norm(r) <= 1e-12 * max(ynorm, 1.0):
            break
        c = np.abs(X.T @ r)
        c[support] = -np.inf
        j = int(np.argmax(c))
        support.append(j)
        coef = pseudo_inverse_solve(X[:, support], y)
        r = y - X[:, support] @ coef
        z[:] = 0.0
        z[support] = coef
    return _result(X, y, z, len(support), True, "done")


def _power_sigma_max(X, iters=20):
    v = np.ones(X.shape[1]) / np.sqrt(X.shape[1])
    sigma = 0.0
    for _ in range(iters):
        w = X.T @ (X @ v)
        nrm = np.linalg.norm(w)
        if nrm == 0:
            return 0.0
        v = w / nrm
        sigma = np.sqrt(nrm)
    return float(sigma)


def _hard_threshold(z, s):
    return best_k_approx(z, s)


def iht(X, y, s, opts=None):
    """Iterative hard thresholding with fixed step ``0.9 / sigma_max(X)^2``."""
    opts = opts or SolverOptions()
    X, y = _check_xy(X, y)
    if s < 1:
        raise ValueError("s must be at least 1")
    p = X.shape[1]
    sig = _power_sigma_max(X)
    z = np.zeros(p)
    if sig == 0 or not np.any(y):
        return _result(X, y, z, 0, True, "trivial")
    mu = 0.9 / sig ** 2
    best = np.linalg.norm(y)
    for it in range(1, opts.max_iter + 1):
        z_new = _hard_threshold(z + mu * (X.T @ (y - X @ z)), s)
        res = np.linalg.norm(y - X @ z_new)
        if res > 10 * best:
            return _result(X, y, z_new, it, False, "diverged")
        best = min(best, res)
        done = np.linalg.norm(z_new - z) <= opts.opt_tol
        z = z_new
        if done:
            return _result(X, y, z, it, True, "step below tolerance")
    return _result(X, y, z, opts.max_iter, False, "iteration limit")


def swap_refine(X, y, initial_support, opts=None):
    """Best-improvement swapping of one support index for one outside index.

    Starting from ``initial_support`` (size ``s``), every sweep evaluates all
    ``s * (p - s)`` single swaps and accepts the one that lowers the
    least-squares residual on the support the most. Stops at a local minimum,
    so the output always has exactly ``s`` candidate indices. This follows the
    one-line description of SWAP and is a best-effort reconstruction.
    """
    opts = opts or SolverOptions()
    X, y = _check_xy(X, y)
    n, p = X.shape
    S = sorted({int(i) for i in initial_support})
    s = len(S)
    if s < 1:
        raise ValueError("initial support must be nonempty")
    col_sq = np.einsum("ij,ij->j", X, X)

    def ls_residual(sup):
        coef = pseudo_inverse_solve(X[:, sup], y)
        return float(np.linalg.norm(y - X[:, sup] @ coef))

    current = ls_residual(S)
    swaps = 0
    for _ in range(opts.max_iter):
        best_val, best_pair = current ** 2, None
        outside = np.setdiff1d(np.arange(p), S)
        for pos, i in enumerate(S):
            rest = S[:pos] + S[pos + 1:]
            if rest:
                Q, _ = np.linalg.qr(X[:, rest])
                r = y - Q @ (Q.T @ y)
                proj_sq = np.einsum("ij,ij->j", *(2 * [Q.T @ X[:, outside]]))
            else:
                r = y
                proj_sq = np.zeros(outside.size)
            w_sq = col_sq[outside] - proj_sq
            ok = w_sq > 1e-10 * np.maximum(col_sq[outside], np.finfo(float).tiny)
            if not np.any(ok):
                continue
            gain = np.zeros(outside.size)
            gain[ok] = (r @ X[:, outside[ok]]) ** 2 / w_sq[ok]
            cand = r @ r - gain
            cand[~ok] = np.inf
            j = int(np.argmin(cand))
            if cand[j] < best_val * (1 - 1e-12):
                best_val, best_pair = cand[j], (pos, int(outside[j]))
        if best_pair is None:
            break
        trial = S.copy()
        trial[best_pair[0]] = best_pair[1]
        trial.sort()
        new = ls_residual(trial)
        if not new < current:  # guard against rounding in the rank-one update
            break
        S, current = trial, new
        swaps += 1
    z = ols_debias(X, y, S)
    return _result(X, y, z, swaps, True, "local minimum")
