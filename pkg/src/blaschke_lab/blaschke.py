"""Finite Blaschke products as maps of the extended plane.

A Blaschke product of degree ``n`` is

    T(z) = rho * prod_i (z - zeta_i) / (1 - conj(zeta_i) z)

with ``|rho| = 1`` and every zero inside the open unit disk.  Everything in
this module is a pure function of immutable values and works on numpy arrays
of evaluation points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from ._numerics import golden_section
from .errors import PoleHit, RootFindFailure

POLE_TOL = 1e-14
RHO_TOL = 1e-14

_MOD = "blaschke-core"


@dataclass(frozen=True)
class BlaschkeProduct:
    """One fiber map: rotation factor ``rho`` and an ordered tuple of zeros."""

    rho: complex
    zeros: tuple[complex, ...]
    _z: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        zeros = tuple(complex(z) for z in self.zeros)
        object.__setattr__(self, "zeros", zeros)
        object.__setattr__(self, "rho", complex(self.rho))
        if abs(abs(self.rho) - 1.0) > RHO_TOL:
            raise ValueError(f"|rho| must be 1, got {abs(self.rho)!r}")
        if len(zeros) < 2:
            raise ValueError("degree must be at least 2")
        arr = np.array(zeros, dtype=complex)
        if np.any(np.abs(arr) >= 1.0):
            raise ValueError("all zeros must lie in the open unit disk")
        arr.setflags(write=False)
        object.__setattr__(self, "_z", arr)

    @classmethod
    def monic(cls, *zeros: complex) -> "BlaschkeProduct":
        return cls(1.0, tuple(zeros))

    @property
    def degree(self) -> int:
        return len(self.zeros)

    @property
    def zeros_array(self) -> np.ndarray:
        return self._z

    @property
    def fixes_origin(self) -> bool:
        return any(z == 0 for z in self.zeros)

    def nonorigin_moduli(self) -> np.ndarray:
        """Moduli of the zeros with one zero at the origin removed."""
        zs = list(self.zeros)
        if 0j in zs:
            zs.remove(0j)
        return np.abs(np.array(zs, dtype=complex))

    def same_map(self, other: "BlaschkeProduct", tol: float = 1e-12) -> bool:
        """Equality as functions: same rho and the same multiset of zeros."""
        if self.degree != other.degree or abs(self.rho - other.rho) > tol:
            return False
        remaining = list(other.zeros)
        for z in self.zeros:
            dists = [abs(z - w) for w in remaining]
            k = int(np.argmin(dists))
            if dists[k] > tol:
                return False
            remaining.pop(k)
        return True

    def __call__(self, z):
        return evaluate(self, z)


def _factors(bp: BlaschkeProduct, z: np.ndarray):
    zeta = bp.zeros_array
    zz = z[..., None]
    den = 1.0 - np.conj(zeta) * zz
    if np.any(np.abs(den) < POLE_TOL):
        raise PoleHit("evaluation point hits a pole 1/conj(zeta)", module=_MOD, operation="evaluate")
    return (zz - zeta) / den, den


def evaluate(bp: BlaschkeProduct, z):
    """Evaluate ``bp`` at a scalar or an array of finite points."""
    arr = np.asarray(z, dtype=complex)
    f, _ = _factors(bp, arr)
    out = bp.rho * np.prod(f, axis=-1)
    return complex(out) if np.ndim(z) == 0 else out


def derivative(bp: BlaschkeProduct, z):
    """Complex derivative T'(z) by the product rule.

    Every term keeps the other factors explicitly, so the result is exact at
    the zeros of ``bp`` (no logarithmic derivative).
    """
    arr = np.asarray(z, dtype=complex)
    f, den = _factors(bp, arr)
    g = (1.0 - np.abs(bp.zeros_array) ** 2) / den**2
    n = bp.degree
    ones = np.ones(arr.shape + (1,), dtype=complex)
    prefix = np.concatenate([ones, np.cumprod(f[..., :-1], axis=-1)], axis=-1)
    suffix = np.concatenate([np.cumprod(f[..., :0:-1], axis=-1)[..., ::-1], ones], axis=-1)
    assert prefix.shape[-1] == n and suffix.shape[-1] == n
    out = bp.rho * np.sum(g * prefix * suffix, axis=-1)
    return complex(out) if np.ndim(z) == 0 else out


def _poly_coefficients(bp: BlaschkeProduct):
    """Coefficients (highest degree first) of prod(w - zeta) and prod(1 - conj(zeta) w)."""
    num = np.array([1.0 + 0j])
    den = np.array([1.0 + 0j])
    for a in bp.zeros:
        num = np.convolve(num, [1.0, -a])
        den = np.convolve(den, [-np.conj(a), 1.0])
    return num, den


def preimages(bp: BlaschkeProduct, z, *, polish_tol: float = 1e-12, check_tol: float = 1e-10,
              max_newton: int = 50) -> np.ndarray:
    """All ``n`` solutions ``w`` of ``T(w) = z``.

    The degree-``n`` polynomial ``rho*prod(w - zeta) - z*prod(1 - conj(zeta) w)``
    is solved through batched companion-matrix eigenvalues and every root is
    then Newton-polished on ``T(w) - z``.  Returns an array of shape
    ``z.shape + (n,)``.
    """
    zs = np.asarray(z, dtype=complex)
    flat = zs.reshape(-1)
    n = bp.degree
    num, den = _poly_coefficients(bp)
    coeffs = bp.rho * num[None, :] - flat[:, None] * den[None, :]
    lead = coeffs[:, 0]
    if np.any(np.abs(lead) < 1e-13):
        raise RootFindFailure("degenerate leading coefficient (root at infinity)",
                              module=_MOD, operation="preimages")
    comp = np.zeros((flat.size, n, n), dtype=complex)
    comp[:, 0, :] = -coeffs[:, 1:] / lead[:, None]
    if n > 1:
        idx = np.arange(n - 1)
        comp[:, idx + 1, idx] = 1.0
    w = np.linalg.eigvals(comp)

    target = flat[:, None]
    for _ in range(max_newton):
        resid = evaluate(bp, w) - target
        scale = np.maximum(1.0, np.abs(target))
        if np.all(np.abs(resid) <= polish_tol * scale):
            break
        dw = derivative(bp, w)
        step = np.where(np.abs(resid) > polish_tol * scale, resid / dw, 0.0)
        w = w - step
    resid = np.abs(evaluate(bp, w) - target)
    if not np.all(np.isfinite(resid)) or np.max(resid) > check_tol:
        raise RootFindFailure(f"preimage residual {np.nanmax(resid):.3e} above {check_tol:g}",
                              module=_MOD, operation="preimages")
    return w.reshape(zs.shape + (n,))


def circle_max(bp: BlaschkeProduct, R: float, samples: int = 1024) -> float:
    """max over |z| = R of |T(z)|: uniform grid plus golden-section refinement."""
    if samples < 256:
        raise ValueError("circle_max needs at least 256 samples")
    theta = 2.0 * np.pi * np.arange(samples) / samples
    vals = np.abs(evaluate(bp, R * np.exp(1j * theta)))
    j = int(np.argmax(vals))
    h = 2.0 * np.pi / samples

    def f(t):
        return np.abs(evaluate(bp, R * np.exp(1j * t)))

    _, best = golden_section(f, theta[j] - h, theta[j] + h, maximize=True)
    return float(max(vals[j], float(best)))


def evaluate_rows(rhos, zeros, z) -> np.ndarray:
    """Evaluate one product per row: ``rhos[k] * prod_i (z[k] - zeros[k, i]) / (1 - conj(zeros[k, i]) z[k])``.

    ``z`` has shape ``(k, ...)``; poles are not checked.
    """
    rhos = np.asarray(rhos, dtype=complex)
    zeros = np.asarray(zeros, dtype=complex)
    z = np.asarray(z, dtype=complex)
    shape = (-1,) + (1,) * (z.ndim - 1)
    out = rhos.reshape(shape) * np.ones_like(z)
    for i in range(zeros.shape[1]):
        a = zeros[:, i].reshape(shape)
        out = out * (z - a) / (1.0 - np.conj(a) * z)
    return out


def circle_max_rows(rhos, zeros, R: float, samples: int = 256) -> np.ndarray:
    """circle_max for a batch of products given as rows of (rho, zeros)."""
    if samples < 256:
        raise ValueError("circle_max needs at least 256 samples")
    theta = 2.0 * np.pi * np.arange(samples) / samples
    k = np.shape(rhos)[0]

    def f(t):
        return np.abs(evaluate_rows(rhos, zeros, R * np.exp(1j * t)))

    vals = f(np.broadcast_to(theta, (k, samples)))
    j = np.argmax(vals, axis=1)
    h = 2.0 * np.pi / samples
    _, best = golden_section(lambda t: f(t[:, None])[:, 0], theta[j] - h, theta[j] + h, maximize=True)
    return np.maximum(vals[np.arange(k), j], best)


def circle_min_derivative(bp: BlaschkeProduct, samples: int = 4096) -> float:
    """Minimum of |T'| on a uniform grid of the unit circle."""
    z = np.exp(2j * np.pi * np.arange(samples) / samples)
    return float(np.min(np.abs(derivative(bp, z))))


def admissibility_bound(moduli: Sequence[float], R: float) -> float:
    """Closed-form bound ``R * prod (R + m)/(R m + 1)`` on r_T(R) for origin-fixing maps."""
    m = np.asarray(moduli, dtype=float)
    if np.any((m < 0) | (m >= 1)):
        raise ValueError("moduli must lie in [0, 1)")
    if not 0 < R < 1:
        raise ValueError("R must lie in (0, 1)")
    return float(R * np.prod((R + m) / (R * m + 1.0)))


class MartinCheck(NamedTuple):
    expanding: bool
    martin_sum: float


def expansion_check_martin(bp: BlaschkeProduct) -> MartinCheck:
    """Sufficient expansion test: sum (1-|zeta|)/(1+|zeta|) > 1."""
    a = np.abs(bp.zeros_array)
    s = float(np.sum((1.0 - a) / (1.0 + a)))
    return MartinCheck(s > 1.0, s)


@dataclass(frozen=True)
class ExpansionReport:
    martin_sum: float
    martin_expanding: bool
    circle_max_at_R: float
    bound_M: float | None
    admissible_at_R: bool


def expansion_report(bp: BlaschkeProduct, R: float, samples: int = 1024) -> ExpansionReport:
    """Collect the expansion diagnostics of one product at radius ``R``.

    ``bound_M`` is only defined for products that fix the origin and is
    ``None`` otherwise.
    """
    mc = expansion_check_martin(bp)
    cm = circle_max(bp, R, samples)
    bound = admissibility_bound(bp.nonorigin_moduli(), R) if bp.fixes_origin else None
    return ExpansionReport(mc.martin_sum, mc.expanding, cm, bound, cm < R)


def is_expanding(bp: BlaschkeProduct, samples: int = 4096) -> bool:
    """Martin's criterion, falling back to a numerical |T'| > 1 check on the circle."""
    if expansion_check_martin(bp).expanding:
        return True
    return circle_min_derivative(bp, samples) > 1.0


def random_product(rng: np.random.Generator, degree: int, *, fix_origin: bool = False,
                   max_modulus: float = 0.95, monic: bool = False) -> BlaschkeProduct:
    """Random product with zeros uniform in the disk of radius ``max_modulus``."""
    r = max_modulus * np.sqrt(rng.random(degree))
    zeros = r * np.exp(2j * math.pi * rng.random(degree))
    if fix_origin:
        zeros[0] = 0.0
    rho = 1.0 if monic else np.exp(2j * math.pi * rng.random())
    return BlaschkeProduct(rho, tuple(zeros))
