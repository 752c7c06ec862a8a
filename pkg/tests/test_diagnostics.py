import itertools
from math import comb

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cra import diagnostics as dg
from cra.ensembles import CapEnsembleSpec, generate_cap_matrix, sample_uniform_sphere
from cra.linalg import OrthonormalBasis, qr_orthonormalize
from cra.pipeline import build_transform
from cra.rng import make_rng

from conftest import unit_columns


def _delta_ref(X, k):
    # brute force straight from the definition, on Gram submatrices
    G = X.T @ X
    d = 0.0
    for T in itertools.combinations(range(X.shape[1]), k):
        ev = np.linalg.eigvalsh(G[np.ix_(T, T)])
        d = max(d, ev[-1] - 1, 1 - ev[0])
    return d


def test_rip_orthonormal_is_zero(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((8, 5)))
    for k in (1, 3, 5):
        assert dg.rip_constant(Q, k).delta == pytest.approx(0.0, abs=1e-12)


def test_rip_duplicated_column():
    X = np.column_stack([np.eye(3)[:, 0]] * 2)
    assert dg.rip_constant(X, 2).delta == pytest.approx(1.0, abs=1e-12)


def test_rip_exhaustive_vs_full_coverage_monte_carlo(rng):
    X = unit_columns(rng, 12, 20)
    ex = dg.rip_constant(X, 3, "exhaustive")
    mc = dg.rip_constant(X, 3, "monte_carlo", budget=comb(20, 3), rng=make_rng(0))
    assert ex.subsets_checked == comb(20, 3) == mc.subsets_checked
    assert ex.delta == mc.delta
    assert not mc.is_lower_bound
    assert ex.delta == pytest.approx(_delta_ref(X, 3), abs=1e-12)


def test_rip_budget_refusal(rng):
    X = unit_columns(rng, 10, 40)
    with pytest.raises(ValueError, match="budget"):
        dg.rip_constant(X, 5, "exhaustive", budget=1000)
    with pytest.raises(ValueError):
        dg.rip_constant(X, 41)
    est = dg.rip_constant(X, 5, "monte_carlo", budget=500, rng=make_rng(1))
    assert est.is_lower_bound and est.subsets_checked == 500


def test_rip_threads_do_not_change_result(rng):
    X = unit_columns(rng, 10, 24)
    a = dg.rip_constant(X, 4, threads=1)
    b = dg.rip_constant(X, 4, threads=3)
    assert a.delta == b.delta


@given(st.integers(0, 10 ** 6))
def test_rip_monotone_in_k_and_mc_below_exhaustive(seed):
    rng = make_rng(seed)
    X = unit_columns(rng, 6, 9)
    ds = [dg.rip_constant(X, k).delta for k in range(1, 6)]
    assert all(a <= b + 1e-12 for a, b in zip(ds, ds[1:]))
    mc = dg.rip_constant(X, 3, "monte_carlo", budget=20, rng=rng)
    assert mc.delta <= ds[2] + 1e-12 and mc.delta >= 0


def test_unitary_identity_and_permutation(rng):
    A = unit_columns(rng, 6, 9)
    I = np.eye(8)
    P = I[rng.permutation(8)]
    assert dg.verify_unitary_invariance(A, 2, 2, unitaries=[I]).max_deviation == 0.0
    # a permutation only reorders floating-point sums
    assert dg.verify_unitary_invariance(A, 2, 2, unitaries=[P]).max_deviation <= 1e-15


def test_unitary_invariance_random(rng):
    A = unit_columns(rng, 10, 16)
    rep = dg.verify_unitary_invariance(A, 3, 2, trials=50, rng=make_rng(2))
    assert len(rep.deltas) == 50 and rep.max_deviation <= 1e-10


def test_haar_orthogonal(rng):
    Q = dg.haar_orthogonal(6, make_rng(3))
    assert np.allclose(Q.T @ Q, np.eye(6), atol=1e-12)


def _uniform_complement(n, basis, N, rng):
    C = basis.complement().vectors
    return C @ sample_uniform_sphere(C.shape[1], rng, size=N)


def test_uniformity_calibration():
    n = 10
    basis = qr_orthonormalize(make_rng(4).standard_normal((n, 2)))
    passes = sum(dg.uniformity_test(_uniform_complement(n, basis, 500, make_rng(5, i)), basis,
                                    0.01, rng=make_rng(6, i)).passed for i in range(100))
    assert passes >= 95


def test_uniformity_rejects_constant_samples():
    basis = qr_orthonormalize(np.eye(6)[:, :1])
    v = np.zeros(6)
    v[3] = 1.0
    rep = dg.uniformity_test(np.tile(v[:, None], (1, 600)), basis, 0.01, rng=make_rng(7))
    assert not rep.passed


def test_uniformity_of_projected_cap_samples():
    spec = CapEnsembleSpec.random(16, 5000, 2, 0.6, make_rng(8))
    X, truth = generate_cap_matrix(spec, make_rng(9))
    T = build_transform(X, truth)
    rep = dg.uniformity_test(T.x_tilde, truth.subspace, 0.01, rng=make_rng(10))
    assert rep.dimension == 14 and rep.passed


def test_uniformity_degenerate_subspace():
    with pytest.raises(ValueError):
        dg.uniformity_test(np.eye(3), qr_orthonormalize(np.eye(3)[:, :2]), 0.01)


def test_gram_matrix():
    Q, _ = np.linalg.qr(make_rng(11).standard_normal((7, 4)))
    assert np.allclose(dg.gram_matrix(Q), np.eye(4) / 7)


def test_spectrum_single_column():
    x = np.array([[3.0], [4.0]])
    rows = dg.spectrum_report(x, x / 5, rng=make_rng(12))
    assert len(rows) == 1 and rows[0]["x"] == pytest.approx(5.0)


def test_spectrum_on_cap_ensemble():
    X, truth = generate_cap_matrix(CapEnsembleSpec.random(250, 1000, 25, 0.95, make_rng(13)),
                                   make_rng(14))
    Xt = build_transform(X, truth).x_tilde
    rows = dg.spectrum_report(X, Xt, rng=make_rng(15))
    top = rows[0]
    assert abs(top["x_tilde"] - top["reference"]) <= 0.25 * top["reference"]
    assert top["x"] > 2 * top["reference"]
    assert all(np.isfinite(r["x"]) for r in rows) and len(rows) == 250


def test_sample_complexity_trend():
    rows = dg.sample_complexity_curve([32, 64, 128], 256, 2, 0.5, 4, trials=10, rng=make_rng(16),
                                      budget=1000)
    means = [r["mean_delta"] for r in rows]
    assert means[0] > means[1] > means[2]


def test_sample_complexity_deterministic():
    a = dg.sample_complexity_curve([40], 60, 2, 0.5, 3, trials=2, rng=make_rng(17), budget=200)
    b = dg.sample_complexity_curve([40], 60, 2, 0.5, 3, trials=2, rng=make_rng(17), budget=200)
    assert a == b


def test_rip_near_zero_for_orthonormalized_square(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((30, 30)))
    assert dg.rip_constant(Q, 4, "monte_carlo", budget=2000, rng=make_rng(18)).delta < 1e-12


def test_coherence_helper(rng):
    X = unit_columns(rng, 5, 7)
    G = X.T @ X
    np.fill_diagonal(G, 0)
    assert dg.max_coherence(X) == pytest.approx(np.abs(G).max())
