"""Pure-Python/NumPy versions of the hot kernels.

These mirror the compiled routines in ``_kernels.pyx`` one for one and are
used whenever the extension is unavailable (or ``CRA_PURE_PYTHON=1``).
"""
from __future__ import annotations

import numpy as np

from ._combinatorics import next_combination, unrank_combination

_CHUNK = 4096


def project_l1_ball(b, tau):
    """Euclidean projection of ``b`` onto ``{x : ||x||_1 <= tau}``.

    Sort-and-threshold: sort magnitudes in decreasing order (stable, so
    equal magnitudes keep index order), locate the soft threshold, shrink.
    """
    b = np.asarray(b, dtype=np.float64)
    if tau <= 0.0:
        return np.zeros_like(b)
    a = np.abs(b)
    if a.sum() <= tau:
        return b.copy()
    order = np.argsort(-a, kind="stable")
    srt = a[order]
    csum = np.cumsum(srt) - tau
    ks = np.arange(1, srt.size + 1)
    active = srt - csum / ks > 0
    rho = np.nonzero(active)[0][-1]
    theta = csum[rho] / (rho + 1.0)
    return np.sign(b) * np.maximum(a - theta, 0.0)


def _extremes(gram, combos):
    sub = gram[combos[:, :, None], combos[:, None, :]]
    ev = np.linalg.eigvalsh(sub)
    return ev[:, 0].min(), ev[:, -1].max()


def rip_range(gram, k, start, count):
    """Extreme Gram eigenvalues over ``count`` k-subsets from lexicographic rank ``start``.

    Returns ``(lam_min, lam_max)``.
    """
    gram = np.ascontiguousarray(gram, dtype=np.float64)
    p = gram.shape[0]
    lo, hi = np.inf, -np.inf
    if count <= 0:
        return lo, hi
    combo = unrank_combination(p, k, start)
    done = 0
    buf = np.empty((min(_CHUNK, count), k), dtype=np.intp)
    while done < count:
        m = min(_CHUNK, count - done)
        for i in range(m):
            buf[i] = combo
            if done + i + 1 < count:
                next_combination(combo, p)
        a, b = _extremes(gram, buf[:m])
        lo, hi = min(lo, a), max(hi, b)
        done += m
    return float(lo), float(hi)


def rip_subsets(gram, subsets):
    """Extreme Gram eigenvalues over explicit subsets (rows of ``subsets``)."""
    gram = np.ascontiguousarray(gram, dtype=np.float64)
    subsets = np.asarray(subsets, dtype=np.intp)
    lo, hi = np.inf, -np.inf
    for s in range(0, subsets.shape[0], _CHUNK):
        a, b = _extremes(gram, subsets[s:s + _CHUNK])
        lo, hi = min(lo, a), max(hi, b)
    return float(lo), float(hi)
