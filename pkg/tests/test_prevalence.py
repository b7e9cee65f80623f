import math

import numpy as np
import pytest

from blaschke_lab import presets
from blaschke_lab.cocycle import classify_stability
from blaschke_lab.errors import DegenerateFit
from blaschke_lab.geometry import perturb
from blaschke_lab.prevalence import (
    _membership,
    estimate_unstable_measure,
    probe_scan,
    scaling_experiment,
    unstable_lambda_set,
)

LADDER = [0.04, 0.02, 0.01, 0.005]


def test_unstable_set_examples():
    circ = unstable_lambda_set(presets.rotating(), grid=512)
    assert circ.dimension_of_base == 1
    assert np.allclose(np.abs(circ.points), 0.5, atol=1e-15)
    pt = unstable_lambda_set(presets.constant((0.3,)), grid=64)
    assert np.allclose(pt.points, -0.3)
    d = unstable_lambda_set(presets.disk_identity(0.3), grid=64)
    assert d.dimension_of_base == 2
    assert np.max(np.abs(d.points)) <= 0.3
    # {-w} covers the disk: every sample has its mirror image nearby
    assert np.max(np.min(np.abs(d.points[:, None] + d.points[None, ::7]), axis=0)) < 1e-12


def test_unstable_set_varying_degree():
    s = unstable_lambda_set(presets.two_block(), grid=256)
    assert s.degree_partition == ((0.0, 0.5, 2), (0.5, 1.0, 3))
    assert set(np.round(s.points.real, 12)) == {-0.3, -0.4, -0.5}


@pytest.mark.parametrize("name", ["cosine", "rotating", "two_block", "quarter_zero"])
def test_unstable_set_soundness(name, rng):
    c = presets.PRESETS[name]()
    pts = unstable_lambda_set(c, grid=1024).points
    for lam in rng.choice(pts, 8, replace=False):
        if abs(lam) < 1:
            assert classify_stability(perturb(c, lam)).classification == "Unstable"


def test_annulus_measure():
    est = estimate_unstable_measure(presets.rotating(), 0.01, 10**5, seed=3)
    exact = math.pi * (0.51**2 - 0.49**2)
    assert abs(est.estimate - exact) < 3 * est.standard_error
    assert est.sample_count == 10**5 and est.seed == 3


def test_zero_epsilon_curve_has_no_area():
    est = estimate_unstable_measure(presets.cosine(), 0.0, 10**5)
    assert est.estimate == 0


def test_disk_area():
    est = estimate_unstable_measure(presets.disk_identity(0.3), 0.0, 10**5)
    assert abs(est.estimate - math.pi * 0.09) / (math.pi * 0.09) < 0.05


def test_disk_membership_matches_classifier(rng):
    c = presets.disk_identity(0.3)
    uset = unstable_lambda_set(c)
    lam = 0.45 * np.sqrt(rng.random(12)) * np.exp(2j * np.pi * rng.random(12))
    lam = lam[np.abs(np.abs(lam) - 0.3) > 0.01]
    fast = _membership(uset, lam, 0.0)
    slow = [classify_stability(perturb(c, l), grid=128).classification == "Unstable" for l in lam]
    assert list(fast) == slow
    assert any(slow) and not all(slow)


def test_repeat_runs_within_three_sigma():
    c = presets.rotating()
    runs = [estimate_unstable_measure(c, 0.02, 10**4, seed=s, grid=4096) for s in range(6)]
    ref = estimate_unstable_measure(c, 0.02, 10**5, seed=99, grid=4096)
    assert all(abs(r.estimate - ref.estimate) < 3 * ref.standard_error + 3 * r.standard_error for r in runs)


def test_reproducible_across_workers():
    c = presets.rotating()
    a = estimate_unstable_measure(c, 0.01, 30_000, seed=11, grid=4096, workers=1)
    b = estimate_unstable_measure(c, 0.01, 30_000, seed=11, grid=4096, workers=3)
    assert a == b
    assert estimate_unstable_measure(c, 0.01, 30_000, seed=12, grid=4096) != a


def test_monotone_in_epsilon():
    fit = scaling_experiment(presets.cosine(), [0.002, 0.01, 0.03], 20_000, grid=4096)
    ests = [e.estimate for e in fit.estimates]
    assert ests == sorted(ests)


def test_scaling_curve_slope():
    fit = scaling_experiment(presets.rotating(), LADDER, 10**5)
    assert abs(fit.slope - 1.0) < 0.1


def test_scaling_point_slope():
    # a point set: the epsilon-disk law; 10^6 samples keep the smallest epsilon out of the Poisson regime
    fit = scaling_experiment(presets.constant((0.3,)), LADDER, 10**6, grid=64)
    assert abs(fit.slope - 2.0) < 0.2


def test_scaling_degenerate():
    # a single point and tiny epsilons: no sample lands in any tube
    with pytest.raises(DegenerateFit):
        scaling_experiment(presets.constant((0.6,)), [1e-4, 5e-5], 10**4, grid=64)


def _expected_cells(points, res):
    h = 2.0 / res
    cells = set()
    for p in points:
        u, v = (p.real + 1) / h, (p.imag + 1) / h
        cols = {math.floor(u)} | ({int(u) - 1} if u == int(u) else set())
        rows = {math.floor(v)} | ({int(v) - 1} if v == int(v) else set())
        cells |= {(r, c) for r in rows for c in cols}
    return cells


def test_probe_scan_varying_degree():
    scan = probe_scan(presets.two_block(), 512)
    got = {tuple(x) for x in np.argwhere(scan.unstable)}
    assert got == _expected_cells([-0.3, -0.4, -0.5], 512)
    assert set(np.round(scan.witnesses.real, 12)) == {-0.3, -0.4, -0.5}


def test_probe_scan_circle():
    scan = probe_scan(presets.rotating(), 512)
    centres = scan.cell_centres()[scan.unstable]
    assert np.all(np.abs(np.abs(centres) - 0.5) < 2 * math.sqrt(2) / 512)
    assert 0 < scan.fraction < 10 / 512
    coarse = probe_scan(presets.rotating(), 128)
    assert scan.fraction < coarse.fraction


def test_probe_scan_disk_and_consistency():
    c = presets.disk_identity(0.3)
    # closed cells over-count the boundary by O(1/resolution); default resolution keeps that below 3 sigma
    scan = probe_scan(c, 512)
    assert abs(scan.fraction - 0.09) < 0.005
    est = estimate_unstable_measure(c, 0.0, 10**5)
    assert abs(est.estimate - scan.fraction * math.pi) < 3 * est.standard_error


def test_probe_witnesses_are_unstable():
    c = presets.cosine()
    scan = probe_scan(c, 64)
    for lam in scan.witnesses[:: max(1, len(scan.witnesses) // 6)]:
        assert classify_stability(perturb(c, lam)).classification == "Unstable"
