import itertools
from math import comb

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from cra import _kernels_py, kernels
from cra._combinatorics import next_combination, unrank_combination

try:
    from cra import _kernels as _kernels_c
except ImportError:  # compiled extension not built
    _kernels_c = None

needs_c = pytest.mark.skipif(_kernels_c is None, reason="compiled kernels unavailable")


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")


@pytest.mark.parametrize("p,k", [(5, 1), (6, 3), (7, 7), (9, 4)])
def test_unrank_matches_itertools(p, k):
    combos = list(itertools.combinations(range(p), k))
    for r, c in enumerate(combos):
        assert tuple(unrank_combination(p, k, r)) == c
    c = np.array(combos[0], dtype=np.intp)
    seen = [tuple(c)]
    while next_combination(c, p):
        seen.append(tuple(c))
    assert seen == combos
    with pytest.raises(ValueError):
        unrank_combination(p, k, comb(p, k))


def _proj_ref(b, tau):
    # bisection on the soft threshold, an independent route to the projection
    if np.abs(b).sum() <= tau:
        return b.copy()
    lo, hi = 0.0, np.abs(b).max()
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.maximum(np.abs(b) - mid, 0).sum() > tau:
            lo = mid
        else:
            hi = mid
    return np.sign(b) * np.maximum(np.abs(b) - hi, 0)


@given(arrays(np.float64, st.integers(1, 30), elements=st.floats(-5, 5)), st.floats(0.01, 20))
def test_l1_projection_against_bisection(b, tau):
    for impl in filter(None, (_kernels_py, _kernels_c)):
        x = impl.project_l1_ball(b, tau)
        assert np.abs(x).sum() <= tau * (1 + 1e-9) + 1e-12
        assert np.allclose(x, _proj_ref(b, tau), atol=1e-8)


def test_l1_projection_ties_and_edges():
    assert np.array_equal(kernels.project_l1_ball(np.array([1.0, -1.0]), 0.0), [0.0, 0.0])
    x = kernels.project_l1_ball(np.array([2.0, -2.0, 1.0]), 2.0)
    assert np.allclose(x, [1.0, -1.0, 0.0])


def _rip_brute(G, k):
    lo, hi = np.inf, -np.inf
    for T in itertools.combinations(range(G.shape[0]), k):
        ev = np.linalg.eigvalsh(G[np.ix_(T, T)])
        lo, hi = min(lo, ev[0]), max(hi, ev[-1])
    return lo, hi


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_rip_range_against_brute_force(rng, k):
    X = rng.standard_normal((8, 9))
    X /= np.linalg.norm(X, axis=0)
    G = X.T @ X
    ref = _rip_brute(G, k)
    total = comb(9, k)
    for impl in filter(None, (_kernels_py, _kernels_c)):
        assert np.allclose(impl.rip_range(G, k, 0, total), ref, atol=1e-12)
        # split ranges reduce to the same extremes
        a = impl.rip_range(G, k, 0, total // 2)
        b = impl.rip_range(G, k, total // 2, total - total // 2)
        assert np.isclose(min(a[0], b[0]), ref[0]) and np.isclose(max(a[1], b[1]), ref[1])


@needs_c
def test_backends_agree(rng):
    X = rng.standard_normal((10, 14))
    X /= np.linalg.norm(X, axis=0)
    G = X.T @ X
    subsets = np.sort(np.argsort(rng.random((300, 14)), axis=1)[:, :5], axis=1)
    assert np.allclose(_kernels_py.rip_subsets(G, subsets), _kernels_c.rip_subsets(G, subsets),
                       atol=1e-12)
    b = rng.standard_normal(500)
    assert np.allclose(_kernels_py.project_l1_ball(b, 3.0), _kernels_c.project_l1_ball(b, 3.0),
                       atol=1e-13)


def test_pure_python_switch(monkeypatch):
    import importlib
    monkeypatch.setenv("CRA_PURE_PYTHON", "1")
    mod = importlib.reload(kernels)
    try:
        assert mod.BACKEND == "python"
    finally:
        monkeypatch.delenv("CRA_PURE_PYTHON")
        importlib.reload(kernels)
