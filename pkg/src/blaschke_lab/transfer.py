"""Truncated Perron-Frobenius matrices and Lyapunov exponents of the operator cocycle.

The transfer operator of an expanding Blaschke product acts on functions
analytic on an annulus around the unit circle by

    (L f)(z) = sum over T(w) = z of f(w) / T'(w).

It is represented in the Laurent basis z^k, -K <= k <= K, with coefficients
extracted by a discrete contour integral (FFT) on the unit circle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .blaschke import BlaschkeProduct, derivative, is_expanding, preimages
from .cocycle import NEG_INFINITY, BlaschkeCocycle, fiber_map
from .errors import DimensionMismatch, NotExpanding, NumericalBreakdown

_MOD = "transfer-operator"


@dataclass(frozen=True)
class LaurentTruncation:
    """Laurent basis z^-K..z^K sampled at ``sample_count`` points of the circle."""

    K: int = 30
    sample_count: int | None = None

    def __post_init__(self):
        if self.K < 8:
            raise ValueError("K must be at least 8")
        if self.sample_count is None:
            n = 1 << max(8, math.ceil(math.log2(8 * self.K)))
            object.__setattr__(self, "sample_count", n)
        if self.sample_count < 4 * self.K + 4:
            raise ValueError("sample_count must be at least 4K + 4")

    @property
    def dimension(self) -> int:
        return 2 * self.K + 1

    @property
    def indices(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)

    def basis_vector(self, k: int) -> np.ndarray:
        """Coefficient vector of z^k."""
        if abs(k) > self.K:
            raise ValueError(f"index {k} outside the truncation")
        e = np.zeros(self.dimension, dtype=complex)
        e[k + self.K] = 1.0
        return e

    def evaluate(self, coeffs: np.ndarray, z) -> np.ndarray:
        """Evaluate the Laurent polynomial with the given coefficients at z."""
        z = np.asarray(z, dtype=complex)
        return np.sum(coeffs * z[..., None] ** self.indices, axis=-1)


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    entries: np.ndarray
    source_fiber: BlaschkeProduct
    truncation: LaurentTruncation


def apply_operator(bp: BlaschkeProduct, f, z) -> np.ndarray:
    """Pointwise transfer operator: sum of f(w)/T'(w) over the preimages of z."""
    w = preimages(bp, z)
    return np.sum(f(w) / derivative(bp, w), axis=-1)


def build_matrix(bp: BlaschkeProduct, trunc: LaurentTruncation | None = None, *,
                 check: bool = True, seed: int = 0) -> OperatorMatrix:
    """Matrix of the transfer operator of ``bp`` in the truncated Laurent basis.

    Column k holds the Laurent coefficients of L(z^k).  With ``check`` the
    matrix is validated against direct pointwise evaluation of L on a random
    Laurent polynomial of low degree.
    """
    trunc = trunc or LaurentTruncation()
    if not is_expanding(bp):
        raise NotExpanding("fiber map is not expanding on the unit circle", module=_MOD,
                           operation="build_matrix")
    N = trunc.sample_count
    z = np.exp(2j * np.pi * np.arange(N) / N)
    w = preimages(bp, z)
    dw = derivative(bp, w)
    ks = trunc.indices
    values = np.einsum("snk,sn->sk", w[:, :, None] ** ks[None, None, :], 1.0 / dw)
    coeffs = np.fft.fft(values, axis=0) / N
    entries = coeffs[np.mod(ks, N), :]
    mat = OperatorMatrix(entries, bp, trunc)
    if check:
        _column_check(mat, seed)
    return mat


def _column_check(mat: OperatorMatrix, seed: int, degree: int = 3, tol: float = 1e-8) -> None:
    trunc = mat.truncation
    rng = np.random.default_rng(seed)
    c = np.zeros(trunc.dimension, dtype=complex)
    low = slice(trunc.K - degree, trunc.K + degree + 1)
    c[low] = rng.normal(size=2 * degree + 1) + 1j * rng.normal(size=2 * degree + 1)
    zt = np.exp(2j * np.pi * rng.random(8))
    direct = apply_operator(mat.source_fiber, lambda w: trunc.evaluate(c, w), zt)
    via_matrix = trunc.evaluate(mat.entries @ c, zt)
    err = float(np.max(np.abs(direct - via_matrix)))
    if err > tol * max(1.0, float(np.max(np.abs(direct)))):
        raise NumericalBreakdown(f"matrix/pointwise mismatch {err:.2e}; increase K", module=_MOD,
                                 operation="build_matrix")


def apply(matrix: OperatorMatrix, coeffs) -> np.ndarray:
    v = np.asarray(coeffs, dtype=complex)
    if v.shape[0] != matrix.truncation.dimension:
        raise DimensionMismatch(f"vector of length {v.shape[0]} for a matrix of dimension "
                                f"{matrix.truncation.dimension}", module=_MOD, operation="apply")
    return matrix.entries @ v


@dataclass(frozen=True)
class ExponentEstimate:
    exponents: np.ndarray
    steps_used: int
    running_variance: np.ndarray
    log_increments: np.ndarray

    def running_mean(self, steps: int) -> np.ndarray:
        """Exponent estimates after the first ``steps`` post-burn-in steps."""
        return np.sort(self.log_increments[:steps].mean(axis=0))[::-1]


def qr_lyapunov(cocycle: BlaschkeCocycle, omega0=0.0, trunc: LaurentTruncation | None = None,
                m: int = 5, steps: int = 2000, burnin: int = 50, seed: int = 0,
                batches: int = 20) -> ExponentEstimate:
    """Top ``m`` Lyapunov exponents of the operator cocycle by QR iteration.

    An orthonormal m-frame is pushed through the fiber matrices along the
    orbit of ``omega0`` and re-orthonormalised at every step; the logs of the
    diagonal of the triangular factor are averaged after ``burnin`` steps.
    ``running_variance`` is the batch-means variance of each average.
    """
    trunc = trunc or LaurentTruncation()
    if m > trunc.dimension:
        raise ValueError("m exceeds the truncation dimension")
    rng = np.random.default_rng(seed)
    frame = rng.normal(size=(trunc.dimension, m)) + 1j * rng.normal(size=(trunc.dimension, m))
    frame, _ = np.linalg.qr(frame)
    logs = np.empty((steps, m))
    cached: OperatorMatrix | None = None
    w = omega0
    for t in range(burnin + steps):
        bp = fiber_map(cocycle, w)
        if cached is None or not (cached.source_fiber.rho == bp.rho and cached.source_fiber.zeros == bp.zeros):
            cached = build_matrix(bp, trunc)
        frame, r = np.linalg.qr(cached.entries @ frame)
        diag = np.abs(np.diag(r))
        if not np.all(np.isfinite(diag)) or np.any(diag == 0.0):
            raise NumericalBreakdown(f"triangular factor underflow at step {t}", module=_MOD,
                                     operation="qr_lyapunov")
        if t >= burnin:
            logs[t - burnin] = np.log(diag)
        w = cocycle.driving.forward(w)
    means = logs.mean(axis=0)
    size = max(1, steps // batches)
    nb = steps // size
    bm = logs[: size * nb].reshape(nb, size, m).mean(axis=1)
    var = bm.var(axis=0, ddof=1) / nb if nb > 1 else np.full(m, np.inf)
    order = np.argsort(-means)
    return ExponentEstimate(means[order], steps, var[order], logs[:, order])


def analytic_spectrum(lam: float, count: int) -> np.ndarray:
    """(0, lam, lam, 2 lam, 2 lam, ...) truncated to ``count``; -inf collapses everything below 0."""
    if count < 1:
        raise ValueError("count must be positive")
    out = np.zeros(count)
    for i in range(1, count):
        out[i] = NEG_INFINITY if lam == NEG_INFINITY else ((i + 1) // 2) * lam
    return out


def autonomous_eigenvalues(bp: BlaschkeProduct, trunc: LaurentTruncation | None = None) -> np.ndarray:
    """Eigenvalue moduli of the truncated matrix, in descending order."""
    if not bp.fixes_origin:
        raise ValueError("autonomous_eigenvalues expects a product fixing the origin")
    mat = build_matrix(bp, trunc)
    return np.sort(np.abs(np.linalg.eigvals(mat.entries)))[::-1]


def degenerate_blocks(exponents: Sequence[float], tol: float = 5e-3) -> list[tuple[float, int]]:
    """Group a descending exponent list into (mean value, multiplicity) blocks."""
    blocks: list[list[float]] = []
    for e in exponents:
        if blocks and (abs(e - blocks[-1][-1]) < tol or (e == blocks[-1][-1])):
            blocks[-1].append(e)
        else:
            blocks.append([e])
    return [(float(np.mean(b)) if np.all(np.isfinite(b)) else b[0], len(b)) for b in blocks]
