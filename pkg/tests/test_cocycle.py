import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from blaschke_lab import presets
from blaschke_lab.blaschke import BlaschkeProduct, evaluate
from blaschke_lab.cocycle import (
    NEG_INFINITY,
    BlaschkeCocycle,
    CircleRotation,
    CoefficientField,
    DegreeBlock,
    StaticDisk,
    admissible,
    classify_stability,
    essinf_product,
    fiber_map,
    iterate,
    lyapunov_lambda,
    pullback_fixed_point,
    pullback_gaps,
)
from blaschke_lab.errors import ClassMismatch, DomainError, NotAdmissible


def _field(fn, **kw):
    return CoefficientField.single(2, lambda w: np.asarray(fn(np.asarray(w)), dtype=complex), **kw)


def non_origin(a=0.1, b=0.2, wobble=0.05):
    """zeros (a + wobble cos 2 pi w, b): does not fix the origin."""
    field = _field(lambda w: np.stack([a + wobble * np.cos(2 * np.pi * w), b + 0 * w], axis=-1),
                   fixes_origin=False)
    return BlaschkeCocycle(CircleRotation(), field)


@given(st.floats(-5, 5))
def test_rotation_inverse(w):
    base = CircleRotation()
    w = w % 1.0
    d = abs(base.backward(base.forward(w)) - w)
    assert min(d, 1 - d) < 1e-12


def test_quadrature_weights():
    for base, n in ((CircleRotation(), 777), (StaticDisk(0.3), 40)):
        _, wts = base.quadrature(n)
        assert abs(wts.sum() - 1) < 1e-12


def test_fiber_map_examples():
    c = presets.constant((0.5,))
    first = fiber_map(c, 0.0)
    assert all(fiber_map(c, w).same_map(first) for w in (0.1, 0.5, 0.93))
    assert np.allclose(fiber_map(presets.rotating(), 0.0).zeros, (0, 0.5))
    assert fiber_map(presets.two_block(), 0.75).degree == 3
    assert fiber_map(presets.two_block(), 0.25).degree == 2


def test_fiber_map_domain():
    with pytest.raises(DomainError):
        fiber_map(presets.rotating(), 0.3 + 0.1j)
    with pytest.raises(DomainError):
        fiber_map(presets.disk_identity(0.3), 0.5)


def test_origin_convention():
    for name in ("constant", "rotating", "cosine", "quarter_zero", "two_block"):
        c = presets.PRESETS[name]()
        for w in np.linspace(0, 0.999, 17):
            assert fiber_map(c, w).zeros[0] == 0


def test_iterate_examples():
    sq = presets.constant((0.0,))
    assert iterate(sq, 0.2, 0.3, 0) == 0.3
    assert abs(iterate(sq, 0.2, 0.5, 3) - 0.00390625) < 1e-17
    assert iterate(presets.cosine(), 0.2, 0.0, 25) == 0


def _newton_fixed_point(zeros):
    """Fixed point of the autonomous product by Newton from 0 (own evaluation and derivative)."""
    def T(x):
        out = 1
        for a in zeros:
            out *= (x - a) / (1 - np.conj(a) * x)
        return out
    x = 0j
    for _ in range(100):
        h = 1e-7
        d = (T(x + h) - T(x - h)) / (2 * h) - 1
        step = (T(x) - x) / d
        x -= step
        if abs(step) < 1e-16:
            break
    return x


def test_pullback_examples():
    assert pullback_fixed_point(presets.cosine(), 0.37) == 0
    assert pullback_fixed_point(presets.constant((0.0,)), 0.1) == 0
    auto = non_origin(wobble=0.0)
    x = pullback_fixed_point(auto, 0.3)
    oracle = _newton_fixed_point((0.1, 0.2))
    assert abs(x - oracle) < 1e-12
    assert abs(evaluate(BlaschkeProduct.monic(0.1, 0.2), x) - x) < 1e-10
    adm = admissible(auto)
    assert abs(x) <= adm.r


def test_pullback_requires_admissibility():
    far = BlaschkeCocycle(CircleRotation(), _field(lambda w: np.stack([0.9 + 0 * w, 0.9 + 0 * w], axis=-1),
                                                   fixes_origin=False))
    with pytest.raises(NotAdmissible):
        pullback_fixed_point(far, 0.0)


def test_equivariance_along_orbit():
    c = non_origin()
    tol = 1e-13
    w = 0.123
    x = pullback_fixed_point(c, w, tol=tol)
    for _ in range(100):
        nxt = c.driving.forward(w)
        x_next = pullback_fixed_point(c, nxt, tol=tol)
        assert abs(evaluate(fiber_map(c, w), x) - x_next) < 10 * tol
        w, x = nxt, x_next


def test_pullback_gaps_geometric():
    c = non_origin()
    adm = admissible(c)
    gaps = pullback_gaps(c, 0.4, 12)
    ratios = gaps[3:] / gaps[2:-1]
    assert np.all(ratios <= adm.r / adm.R + 0.05)
    assert np.all(np.diff(gaps[2:]) < 0)


def test_lambda_examples():
    assert abs(lyapunov_lambda(presets.constant((0.5,))) - math.log(0.5)) < 1e-12
    assert abs(lyapunov_lambda(presets.rotating()) - math.log(0.5)) < 1e-12
    assert lyapunov_lambda(presets.quarter_zero()) == NEG_INFINITY
    assert lyapunov_lambda(presets.quarter_zero(), "orbit", 2000) == NEG_INFINITY


def test_lambda_orbit_vs_quadrature():
    c = presets.cosine()
    q = lyapunov_lambda(c)
    o, se = lyapunov_lambda(c, "orbit", 20000, full_output=True)
    assert abs(q - math.log(0.4)) < 1e-9
    assert abs(o - q) < 3 * se


def test_lambda_orbit_vs_quadrature_non_origin():
    c = non_origin()
    q = lyapunov_lambda(c, budget=512)
    o, se = lyapunov_lambda(c, "orbit", 4000, full_output=True)
    assert abs(o - q) < 3 * se + 1e-12


@pytest.mark.parametrize("name", ["constant", "rotating", "cosine", "two_block"])
def test_lambda_below_contraction_bound(name):
    c = presets.PRESETS[name]()
    adm = admissible(c)
    assert adm
    assert lyapunov_lambda(c, budget=1024) <= math.log(adm.r / adm.R) + 1e-12


def test_admissible_examples():
    for name in ("constant", "rotating", "cosine", "quarter_zero", "two_block", "disk_identity"):
        assert admissible(presets.PRESETS[name](), 0.5).admissible
    adm = admissible(presets.constant((0.5,)), 0.5)
    assert adm.certified and abs(adm.r - 0.4) < 1e-15
    assert abs(admissible(presets.constant((0.0,)), 0.5).r - 0.25) < 1e-15


@given(st.floats(0.05, 0.95))
def test_origin_fixing_admissible_at_every_R(R):
    assert admissible(presets.cosine(), R).admissible


def test_essinf_examples():
    assert essinf_product(presets.constant((0.5,))).value == pytest.approx(0.5, abs=1e-15)
    res = essinf_product(presets.cosine())
    assert abs(res.value - 0.1) < 1e-6 and res.exact
    assert essinf_product(presets.quarter_zero()).value == 0
    assert essinf_product(presets.cosine(0.4, 0.4)).value < 1e-9


def test_essinf_nonincreasing_in_grid():
    c = presets.cosine(0.45, 0.4)
    vals = [essinf_product(c, g).value for g in (64, 256, 1024, 2**14)]
    assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))


def test_essinf_rejects_non_origin():
    with pytest.raises(ClassMismatch):
        essinf_product(non_origin())


def test_essinf_table_is_estimate():
    c = presets.table([0.0, 0.5], [0.3, 0.6])
    res = essinf_product(c)
    assert not res.exact
    assert abs(res.value - 0.3) < 1e-12


def test_classify_examples():
    v = classify_stability(presets.cosine())
    assert v.stable and abs(v.essinf_estimate - 0.1) < 1e-6 and abs(v.witness_omega - 0.5) < 1e-6
    assert classify_stability(presets.cosine(0.4, 0.4)).classification == "Unstable"
    assert classify_stability(presets.two_block()).stable
    assert classify_stability(presets.disk_identity()).classification == "Unstable"


def test_classify_varying_degree_with_zero_on_second_block():
    b2 = DegreeBlock(2, lambda w: np.stack([0 * w, 0.3 + 0 * w], axis=-1).astype(complex), 0.0, 0.5)
    b3 = DegreeBlock(3, lambda w: np.stack([0 * w, 0.4 + 0 * w, 0.5 * np.sin(2 * np.pi * (w - 0.75))],
                                           axis=-1).astype(complex), 0.5, 1.0)
    c = BlaschkeCocycle(CircleRotation(), CoefficientField((b2, b3)))
    v = classify_stability(c)
    assert v.classification == "Unstable"
    assert abs(v.witness_omega - 0.75) < 1e-6


@given(st.floats(0, 2 * math.pi), st.booleans())
def test_classify_invariant_under_rho_and_permutation(theta, swap):
    def zeta(w):
        w = np.asarray(w)
        cols = [0 * w, 0.5 + 0.4 * np.cos(2 * np.pi * w), 0.3j + 0 * w]
        if swap:
            cols[1], cols[2] = cols[2], cols[1]
        return np.stack(cols, axis=-1).astype(complex)
    field = CoefficientField.single(3, zeta, rho=lambda w: np.full(np.shape(w), np.exp(1j * theta)))
    v = classify_stability(BlaschkeCocycle(CircleRotation(), field))
    assert v.stable
    assert abs(v.essinf_estimate - 0.03) < 1e-9


def test_verdict_matches_tolerance():
    for c in (presets.cosine(), presets.cosine(0.4, 0.4), presets.quarter_zero()):
        v = classify_stability(c, instability_tolerance=1e-9)
        assert (v.classification == "Unstable") == (v.essinf_estimate <= 1e-9)
