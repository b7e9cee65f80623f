"""Geometry and measure of the set of perturbations that destroy stability.

Perturbing an origin-fixing cocycle by ``lam`` creates an exact zero
coefficient at ``omega`` exactly when ``lam = -zeta_i(omega)`` (phi is odd and
injective).  The unstable set is therefore the negated image of the
coefficient field, and these experiments measure it: Monte Carlo area of
its epsilon-tube, the scaling of that area with epsilon, and a grid scan of
the unit disk.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from ._numerics import golden_section, uniform_disk
from .cocycle import BlaschkeCocycle, DegreeBlock
from .errors import ClassMismatch, DegenerateFit

_MOD = "prevalence-lab"
CHUNK = 10_000
NEWTON_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class _Curve:
    """One coordinate ``i >= 2`` of one degree block, with its sampled parameters."""

    block: DegreeBlock
    coord: int
    params: np.ndarray
    points: np.ndarray

    def at(self, w) -> np.ndarray:
        w = np.asarray(w)
        return -self.block.values(w.ravel())[:, self.coord].reshape(w.shape)


@dataclass(frozen=True, eq=False)
class UnstableSet:
    """Point cloud of {-zeta_i(omega)} together with the curves that produced it."""

    points: np.ndarray
    dimension_of_base: int
    degree_partition: tuple[tuple[float, float, int], ...]
    smooth: bool = True
    curves: tuple[_Curve, ...] = field(default=(), repr=False)
    radius: float | None = None


@dataclass(frozen=True)
class MeasureEstimate:
    epsilon: float
    estimate: float
    standard_error: float
    sample_count: int
    seed: int
    smooth: bool = True


def _check(cocycle: BlaschkeCocycle, operation: str) -> None:
    if not cocycle.fixes_origin:
        raise ClassMismatch("the unstable set is defined for cocycles fixing the origin", module=_MOD,
                            operation=operation)


def unstable_lambda_set(cocycle: BlaschkeCocycle, grid: int | None = None) -> UnstableSet:
    """Negated coefficient values over the base grid, per coordinate and per degree block.

    ``grid`` is the number of nodes on the circle (default 2**14) or per axis
    on the disk (default 512).  Circle blocks are sampled on their closure.
    """
    _check(cocycle, "unstable_lambda_set")
    disk = cocycle.driving.domain_kind == "disk2d"
    grid = grid or (512 if disk else 2**14)
    curves = []
    for b in cocycle.coefficients.blocks:
        params = cocycle.block_grid(b, grid)
        vals = b.values(params)
        for i in range(1, b.degree):
            curves.append(_Curve(b, i, params, -vals[:, i]))
    partition = tuple((b.lo, b.hi, b.degree) for b in cocycle.coefficients.blocks)
    return UnstableSet(np.concatenate([c.points for c in curves]), 2 if disk else 1, partition,
                       cocycle.coefficients.smoothness == "C1", tuple(curves),
                       cocycle.driving.radius if disk else None)


# ---------------------------------------------------------------------------
# membership tests
# ---------------------------------------------------------------------------


def _near_curves(uset: UnstableSet, lam: np.ndarray, epsilon: float) -> np.ndarray:
    """Whether each lam lies within ``epsilon`` of a 1-D unstable set.

    Cloud distances decide most samples; the ones in the ambiguous band are
    settled by a golden-section search of the curve parameter between the
    neighbours of the nearest sample.
    """
    hit = np.zeros(lam.size, dtype=bool)
    for c in uset.curves:
        gaps = np.abs(np.diff(c.points))
        slack = 0.5 * float(gaps.max()) if gaps.size else 0.0
        # repeated samples (constant stretches) would degenerate the tree
        _, first = np.unique(c.points, return_index=True)
        tree = cKDTree(np.column_stack([c.points[first].real, c.points[first].imag]))
        d, j = tree.query(np.column_stack([lam.real, lam.imag]))
        j = first[j]
        hit |= d <= epsilon
        todo = np.flatnonzero(~hit & (d <= epsilon + slack + 1e-15))
        if todo.size and c.params.size > 1:
            jj = j[todo]
            a = c.params[np.maximum(jj - 1, 0)]
            b = c.params[np.minimum(jj + 1, c.params.size - 1)]
            target = lam[todo]
            _, best = golden_section(lambda t: np.abs(c.at(t) - target) ** 2, a, b, tol=1e-14)
            hit[todo] |= np.sqrt(np.maximum(best, 0.0)) <= epsilon
    return hit


def _in_disk_image(uset: UnstableSet, lam: np.ndarray, max_iter: int = 40) -> np.ndarray:
    """Whether -lam is attained by some coordinate on a disk base.

    Batched Newton solve of zeta_i(omega) = -lam in R^2 started from the
    nearest sample; a root counts if it lies in the closed base disk.
    """
    hit = np.zeros(lam.size, dtype=bool)
    radius = uset.radius
    for c in uset.curves:
        tree = cKDTree(np.column_stack([c.points.real, c.points.imag]))
        _, j = tree.query(np.column_stack([lam.real, lam.imag]))
        w = c.params[j].astype(complex)
        h = 1e-7 * radius
        done = np.zeros(lam.size, dtype=bool)
        for _ in range(max_iter):
            f = c.at(w) - lam
            done = np.abs(f) < NEWTON_TOL
            if np.all(done):
                break
            fx = (c.at(w + h) - c.at(w - h)) / (2 * h)
            fy = (c.at(w + 1j * h) - c.at(w - 1j * h)) / (2 * h)
            det = fx.real * fy.imag - fx.imag * fy.real
            ok = np.abs(det) > 1e-300
            safe = np.where(ok, det, 1.0)
            dx = (fy.imag * f.real - fy.real * f.imag) / safe
            dy = (-fx.imag * f.real + fx.real * f.imag) / safe
            w = np.where(done | ~ok, w, w - (dx + 1j * dy))
            # keep iterates within a slightly enlarged base so the field stays defined
            m = np.abs(w)
            w = np.where(m > 1.5 * radius, w * 1.5 * radius / np.maximum(m, 1e-300), w)
        hit |= done & (np.abs(w) <= radius * (1 + 1e-9))
    return hit


def _membership(uset: UnstableSet, lam: np.ndarray, epsilon: float) -> np.ndarray:
    if uset.dimension_of_base == 1:
        return _near_curves(uset, lam, epsilon)
    inside = _in_disk_image(uset, lam)
    if epsilon > 0:
        inside |= cKDTree(np.column_stack([uset.points.real, uset.points.imag])).query(
            np.column_stack([lam.real, lam.imag]), distance_upper_bound=epsilon)[0] <= epsilon
    return inside


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


def _chunk_counts(uset: UnstableSet, epsilons: Sequence[float], samples: int, seed: int,
                  workers: int) -> np.ndarray:
    """Hit counts per epsilon; chunks have fixed size and their own spawned stream."""
    sizes = [CHUNK] * (samples // CHUNK) + ([samples % CHUNK] if samples % CHUNK else [])
    streams = np.random.SeedSequence(seed).spawn(len(sizes))

    def one(args):
        size, ss = args
        lam = uniform_disk(np.random.default_rng(ss), size)
        return [int(np.count_nonzero(_membership(uset, lam, e))) for e in epsilons]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(one, zip(sizes, streams)))
    else:
        counts = [one(a) for a in zip(sizes, streams)]
    return np.asarray(counts).sum(axis=0)


def _estimate(count: int, samples: int, epsilon: float, seed: int, smooth: bool) -> MeasureEstimate:
    p = count / samples
    return MeasureEstimate(float(epsilon), math.pi * p, math.pi * math.sqrt(p * (1 - p) / samples),
                           samples, seed, smooth)


def estimate_unstable_measure(cocycle: BlaschkeCocycle, epsilon: float, samples: int = 100_000,
                              seed: int = 0, *, workers: int = 1, grid: int | None = None,
                              uset: UnstableSet | None = None) -> MeasureEstimate:
    """Area of the epsilon-neighbourhood of the unstable set, by uniform sampling of D_1.

    Results depend on ``seed`` and ``samples`` only, not on ``workers``.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    if samples < 10_000:
        raise ValueError("samples must be at least 10^4")
    uset = uset or unstable_lambda_set(cocycle, grid)
    count = _chunk_counts(uset, [epsilon], samples, seed, workers)[0]
    return _estimate(int(count), samples, epsilon, seed, uset.smooth)


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    estimates: tuple[MeasureEstimate, ...]


def scaling_experiment(cocycle: BlaschkeCocycle, epsilons: Sequence[float], samples: int = 100_000,
                       seed: int = 0, *, workers: int = 1, grid: int | None = None) -> ScalingFit:
    """Least-squares slope of log(measure) against log(epsilon).

    Every epsilon reuses the same samples, so the estimates are monotone in
    epsilon.  Zero measures are left out of the fit.
    """
    if cocycle.driving.domain_kind != "circle":
        raise ValueError("the scaling law is meant for one-dimensional bases")
    eps = [float(e) for e in epsilons]
    if len(eps) < 2 or min(eps) <= 0:
        raise ValueError("need at least two positive epsilons")
    uset = unstable_lambda_set(cocycle, grid)
    counts = _chunk_counts(uset, eps, samples, seed, workers)
    ests = tuple(_estimate(int(c), samples, e, seed, uset.smooth) for c, e in zip(counts, eps))
    pos = [(e.epsilon, e.estimate) for e in ests if e.estimate > 0]
    if len(pos) < 2:
        raise DegenerateFit("fewer than two epsilons reach the unstable set", module=_MOD,
                            operation="scaling_experiment")
    x, y = np.log([p[0] for p in pos]), np.log([p[1] for p in pos])
    slope, intercept = np.polyfit(x, y, 1)
    return ScalingFit(float(slope), float(intercept), ests)


# ---------------------------------------------------------------------------
# grid scan
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ProbeScan:
    """Closed-cell classification of a ``resolution`` x ``resolution`` grid on [-1, 1]^2.

    ``unstable[k, j]`` refers to the cell with real part in column ``j`` and
    imaginary part in row ``k``.  ``fraction`` counts unstable cells among
    those whose centre lies in the unit disk.
    """

    resolution: int
    unstable: np.ndarray
    in_disk: np.ndarray
    fraction: float
    witnesses: np.ndarray
    seed: int
    smooth: bool = True

    def cell_centres(self) -> np.ndarray:
        t = -1.0 + (np.arange(self.resolution) + 0.5) * (2.0 / self.resolution)
        return t[None, :] + 1j * t[:, None]


def _cell_ranges(u: np.ndarray, res: int, tol: float = 1e-12):
    lo = np.clip(np.ceil(u - tol).astype(int) - 1, 0, res - 1)
    hi = np.clip(np.floor(u + tol).astype(int), 0, res - 1)
    return lo, np.maximum(lo, hi)


def _dense_curve(c: _Curve, spacing: float, cap: int = 1 << 22) -> np.ndarray:
    """Resample one curve until consecutive points are closer than ``spacing``."""
    count = c.params.size
    lo, hi = float(c.params[0]), float(c.params[-1])
    while True:
        t = np.linspace(lo, hi, count)
        pts = c.at(t)
        if pts.size < 2 or np.max(np.abs(np.diff(pts))) < spacing or count >= cap:
            return pts
        count = 2 * count - 1


def _dense_disk(c: _Curve, radius: float, spacing: float, cap: int = 4096) -> np.ndarray:
    per_axis = 64
    while True:
        t = -radius + np.arange(per_axis) * (2 * radius / (per_axis - 1))
        sq = t[None, :] + 1j * t[:, None]
        img = c.at(sq)
        gap = max(np.max(np.abs(np.diff(img, axis=0))), np.max(np.abs(np.diff(img, axis=1))))
        if gap < spacing or per_axis >= cap:
            return img[np.abs(sq) <= radius]
        per_axis *= 2


def probe_scan(cocycle: BlaschkeCocycle, resolution: int = 512, seed: int = 0,
               grid: int | None = None) -> ProbeScan:
    """Flag every closed grid cell that meets the unstable set.

    The set is resampled until neighbouring samples are closer than a
    quarter cell, and a sample on a cell edge flags all cells sharing that
    edge.  The scan is deterministic; ``seed`` is only recorded.
    """
    uset = unstable_lambda_set(cocycle, grid)
    h = 2.0 / resolution
    clouds = [(_dense_disk(c, uset.radius, h / 4) if uset.dimension_of_base == 2 else _dense_curve(c, h / 4))
              for c in uset.curves]
    unstable = np.zeros((resolution, resolution), dtype=bool)
    witness = np.full((resolution, resolution), np.nan + 0j)
    for pts in clouds:
        pts = pts[np.abs(pts) < 1.0]
        xlo, xhi = _cell_ranges((pts.real + 1.0) / h, resolution)
        ylo, yhi = _cell_ranges((pts.imag + 1.0) / h, resolution)
        for dy in (0, 1):
            for dx in (0, 1):
                yy = np.where(dy, yhi, ylo)
                xx = np.where(dx, xhi, xlo)
                fresh = ~unstable[yy, xx]
                witness[yy[fresh], xx[fresh]] = pts[fresh]
                unstable[yy, xx] = True
    t = -1.0 + (np.arange(resolution) + 0.5) * h
    in_disk = np.abs(t[None, :] + 1j * t[:, None]) < 1.0
    fraction = float(np.count_nonzero(unstable & in_disk) / np.count_nonzero(in_disk))
    return ProbeScan(resolution, unstable, in_disk, fraction, witness[unstable], seed, uset.smooth)
