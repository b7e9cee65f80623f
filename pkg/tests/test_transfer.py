import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from blaschke_lab import presets
from blaschke_lab.blaschke import BlaschkeProduct, random_product
from blaschke_lab.cocycle import NEG_INFINITY, lyapunov_lambda
from blaschke_lab.errors import DimensionMismatch, NotExpanding
from blaschke_lab.transfer import (
    LaurentTruncation,
    analytic_spectrum,
    apply,
    apply_operator,
    autonomous_eigenvalues,
    build_matrix,
    degenerate_blocks,
    qr_lyapunov,
)

SQUARE = BlaschkeProduct.monic(0, 0)
HALF = BlaschkeProduct.monic(0, 0.5)
LOG_HALF = math.log(0.5)


def test_truncation():
    t = LaurentTruncation(30)
    assert t.dimension == 61 and t.sample_count >= 4 * 30 + 4
    with pytest.raises(ValueError):
        LaurentTruncation(4)
    with pytest.raises(ValueError):
        LaurentTruncation(30, sample_count=100)


def _brute_force_L(bp, f, z):
    """Sum over preimages, found by brute-force root polishing of our own."""
    out = []
    for zz in np.atleast_1d(z):
        # z^2 only: the two square roots
        w = np.sqrt(zz) * np.array([1, -1])
        out.append(np.sum(f(w) / (2 * w)))
    return np.array(out)


def test_square_examples():
    t = LaurentTruncation(12)
    m = build_matrix(SQUARE, t)
    z = np.exp(2j * np.pi * np.array([0.1, 0.37, 0.8]))
    # L(1/z) = 1/z
    assert np.allclose(_brute_force_L(SQUARE, lambda w: 1 / w, z), 1 / z, atol=1e-14)
    assert np.allclose(apply(m, t.basis_vector(-1)), t.basis_vector(-1), atol=1e-12)
    # the two preimage terms of L(1) cancel: L(1) = 0 in this realization
    assert np.allclose(_brute_force_L(SQUARE, lambda w: np.ones_like(w), z), 0, atol=1e-14)
    assert np.allclose(apply(m, t.basis_vector(0)), 0, atol=1e-12)


def test_matrix_entries_match_pointwise():
    t = LaurentTruncation(10)
    m = build_matrix(HALF, t)
    z = np.exp(2j * np.pi * np.arange(7) / 7 + 0.1j)
    for k in (-3, -1, 0, 2):
        direct = apply_operator(HALF, lambda w: w**k, z)
        via = t.evaluate(m.entries[:, k + t.K], z)
        assert np.allclose(direct, via, atol=1e-10)


def test_rejects_non_expanding():
    with pytest.raises(NotExpanding):
        build_matrix(BlaschkeProduct.monic(0.99, 0.99, 0.99))


def test_inverse_z_fixed_by_origin_fixing_fibers(rng):
    t = LaurentTruncation(30)
    e = t.basis_vector(-1)
    for _ in range(20):
        bp = random_product(rng, int(rng.integers(2, 5)), fix_origin=True, max_modulus=0.6)
        assert np.max(np.abs(apply(build_matrix(bp, t), e) - e)) < 1e-8


def test_apply():
    t = LaurentTruncation(8)
    m = build_matrix(HALF, t)
    assert np.all(apply(m, np.zeros(t.dimension)) == 0)
    with pytest.raises(DimensionMismatch):
        apply(m, np.zeros(5))


@given(st.integers(0, 10**6))
def test_apply_linear(seed):
    t = LaurentTruncation(8)
    m = build_matrix(HALF, t, check=False)
    r = np.random.default_rng(seed)
    u, v = r.normal(size=(2, t.dimension)) + 1j * r.normal(size=(2, t.dimension))
    assert np.max(np.abs(apply(m, u + v) - apply(m, u) - apply(m, v))) < 1e-12


def test_constant_spectrum():
    est = qr_lyapunov(presets.constant((0.5,)), m=5, steps=2000)
    assert np.all(np.diff(est.exponents) <= 0)
    assert np.allclose(est.exponents, analytic_spectrum(LOG_HALF, 5), atol=1e-2)
    assert degenerate_blocks(est.exponents) == [(pytest.approx(0, abs=1e-3), 1),
                                                (pytest.approx(LOG_HALF, abs=1e-3), 2),
                                                (pytest.approx(2 * LOG_HALF, abs=1e-3), 2)]


def test_square_top_exponent():
    est = qr_lyapunov(presets.constant((0.0,)), m=1, steps=200)
    assert abs(est.exponents[0]) < 1e-2


def test_rotating_spectrum():
    c = presets.rotating()
    lam = lyapunov_lambda(c)
    est = qr_lyapunov(c, 0.1, m=3, steps=400, burnin=20)
    assert np.allclose(est.exponents, analytic_spectrum(lam, 3), atol=2e-2)


def test_cosine_spectrum_matches_lambda():
    c = presets.cosine()
    lam = lyapunov_lambda(c)
    est = qr_lyapunov(c, 0.1, LaurentTruncation(20), m=3, steps=600, burnin=20)
    assert np.allclose(est.exponents, analytic_spectrum(lam, 3), atol=2e-2)


def test_variance_shrinks_with_steps():
    c = presets.rotating()
    short = qr_lyapunov(c, 0.1, LaurentTruncation(12), m=3, steps=200, burnin=10)
    long = qr_lyapunov(c, 0.1, LaurentTruncation(12), m=3, steps=800, burnin=10)
    assert np.all(long.running_variance[1:] < short.running_variance[1:])


def test_truncation_stability():
    c = presets.constant((0.5,))
    a = qr_lyapunov(c, m=5, steps=2000, trunc=LaurentTruncation(30)).exponents
    b = qr_lyapunov(c, m=5, steps=2000, trunc=LaurentTruncation(60)).exponents
    assert np.max(np.abs(a - b)) < 1e-3


def test_analytic_spectrum_examples():
    assert np.allclose(analytic_spectrum(LOG_HALF, 5), [0, LOG_HALF, LOG_HALF, 2 * LOG_HALF, 2 * LOG_HALF])
    s = analytic_spectrum(NEG_INFINITY, 3)
    assert s[0] == 0 and np.all(np.isneginf(s[1:]))
    assert list(analytic_spectrum(-1.0, 1)) == [0]


def test_autonomous_eigenvalues():
    t = LaurentTruncation(30)
    ev = autonomous_eigenvalues(HALF, t)
    assert np.allclose(ev[:5], [1, 0.5, 0.5, 0.25, 0.25], atol=1e-3)
    sq = autonomous_eigenvalues(SQUARE, t)
    # nilpotent below the top eigenvalue; 1e-2 allows for the ill-conditioned Jordan chain
    assert abs(sq[0] - 1) < 1e-6 and sq[1] < 1e-2


def test_spectral_radius_one(rng):
    t = LaurentTruncation(30)
    for _ in range(5):
        bp = random_product(rng, 3, fix_origin=True, max_modulus=0.7)
        assert abs(autonomous_eigenvalues(bp, t)[0] - 1) < 1e-6


def test_qr_matches_eigen_oracle():
    t = LaurentTruncation(30)
    est = qr_lyapunov(presets.constant((0.5,)), trunc=t, m=5, steps=2000)
    logs = np.log(autonomous_eigenvalues(HALF, t)[:5])
    assert np.max(np.abs(est.exponents - logs)) < 5e-3


def test_degenerate_blocks():
    assert degenerate_blocks([0.0, -0.5, -0.501, -1.0]) == [(0.0, 1), (pytest.approx(-0.5005), 2), (-1.0, 1)]
