"""Phi-geometry: the disk-to-plane diffeomorphism and the structures built on it.

``phi(z) = z / sqrt(1 - |z|^2)`` maps the open unit disk onto the plane.  It
gives monic quadratic origin-fixing cocycles a vector-space structure
(addition and scaling of the coefficient zeta_2 in the plane), the metric
``d``, and the one-parameter perturbation family used by the prevalence
experiments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._numerics import golden_section
from .blaschke import BlaschkeProduct, evaluate_rows
from .cocycle import BlaschkeCocycle, CoefficientField, DegreeBlock, fiber_map
from .errors import BoundaryBlowup, ClassMismatch

_MOD = "phi-geometry"
BOUNDARY_GUARD = 1e-12
DDPRIME_TERMS = 64


def phi(z):
    """Disk-to-plane map z / sqrt(1 - |z|^2)."""
    arr = np.asarray(z, dtype=complex)
    if np.any(np.abs(arr) >= 1.0 - BOUNDARY_GUARD):
        raise BoundaryBlowup("phi is only defined strictly inside the unit disk", module=_MOD,
                             operation="phi")
    out = arr / np.sqrt(1.0 - np.abs(arr) ** 2)
    return complex(out) if np.ndim(z) == 0 else out


def phi_inverse(z):
    """Plane-to-disk map z / sqrt(1 + |z|^2)."""
    arr = np.asarray(z, dtype=complex)
    out = arr / np.sqrt(1.0 + np.abs(arr) ** 2)
    return complex(out) if np.ndim(z) == 0 else out


def phi_jacobian(x: float, y: float) -> np.ndarray:
    """Real Jacobian of phi at (x, y)."""
    s = 1.0 - x * x - y * y
    if s <= BOUNDARY_GUARD:
        raise BoundaryBlowup("Jacobian requested on or outside the unit circle", module=_MOD,
                             operation="phi_jacobian")
    return np.array([[1.0 - y * y, x * y], [x * y, 1.0 - x * x]]) / s**1.5


def phi_jacobian_det(x: float, y: float) -> float:
    s = 1.0 - x * x - y * y
    if s <= BOUNDARY_GUARD:
        raise BoundaryBlowup("Jacobian requested on or outside the unit circle", module=_MOD,
                             operation="phi_jacobian_det")
    return 1.0 / s**2


def broadcast_phi(v) -> np.ndarray:
    return np.asarray(phi(np.asarray(v, dtype=complex)))


def broadcast_phi_inverse(v) -> np.ndarray:
    return np.asarray(phi_inverse(np.asarray(v, dtype=complex)))


@dataclass(frozen=True)
class PhiPoint:
    disk_value: complex
    plane_value: complex

    @classmethod
    def from_disk(cls, z: complex) -> "PhiPoint":
        return cls(complex(z), phi(z))

    @classmethod
    def from_plane(cls, w: complex) -> "PhiPoint":
        return cls(phi_inverse(w), complex(w))


# ---------------------------------------------------------------------------
# vector-space structure on monic quadratic origin-fixing cocycles
# ---------------------------------------------------------------------------


def is_monic_quadratic(cocycle: BlaschkeCocycle, probe: int = 64) -> bool:
    cf = cocycle.coefficients
    if len(cf.blocks) != 1 or cf.blocks[0].degree != 2 or not cf.fixes_origin:
        return False
    nodes = cocycle.driving.grid(probe if cocycle.driving.domain_kind == "circle" else 8)
    if not np.allclose(np.asarray(cf.rho(nodes)), 1.0, atol=1e-14, rtol=0):
        return False
    return bool(np.all(cf.blocks[0].values(nodes)[:, 0] == 0))


def _require_class(*cocycles: BlaschkeCocycle, operation: str) -> None:
    for c in cocycles:
        if not is_monic_quadratic(c):
            raise ClassMismatch("expected a monic quadratic cocycle fixing the origin", module=_MOD,
                                operation=operation)
    drivers = {c.driving for c in cocycles}
    if len(drivers) > 1:
        raise ClassMismatch("cocycles are driven by different base systems", module=_MOD,
                            operation=operation)


def _zeta2(cocycle: BlaschkeCocycle, w) -> np.ndarray:
    return cocycle.coefficients.blocks[0].values(np.atleast_1d(w))[:, 1]


def _quadratic(driving, z2fn, smooth: bool, name: str) -> BlaschkeCocycle:
    def zeta(w):
        z2 = np.asarray(z2fn(np.atleast_1d(w)), dtype=complex)
        return np.stack([np.zeros_like(z2), z2], axis=-1)

    field = CoefficientField.single(2, zeta, smoothness="C1" if smooth else "measurable", name=name)
    return BlaschkeCocycle(driving, field)


def _smooth(*cocycles) -> bool:
    return all(c.coefficients.smoothness == "C1" for c in cocycles)


def add_cocycles(t_xi: BlaschkeCocycle, t_chi: BlaschkeCocycle) -> BlaschkeCocycle:
    """Sum whose coefficient is phi^-1(phi(xi_2) + phi(chi_2))."""
    _require_class(t_xi, t_chi, operation="add_cocycles")
    return _quadratic(t_xi.driving,
                      lambda w: phi_inverse(phi(_zeta2(t_xi, w)) + phi(_zeta2(t_chi, w))),
                      _smooth(t_xi, t_chi), "sum")


def scale_cocycle(alpha: complex, t_xi: BlaschkeCocycle) -> BlaschkeCocycle:
    """Scalar multiple whose coefficient is phi^-1(alpha * phi(xi_2))."""
    _require_class(t_xi, operation="scale_cocycle")
    alpha = complex(alpha)
    return _quadratic(t_xi.driving, lambda w: phi_inverse(alpha * phi(_zeta2(t_xi, w))),
                      _smooth(t_xi), "scaled")


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def _sup_over_base(cocycle: BlaschkeCocycle, g, grid: int) -> float:
    """Supremum of the vectorised base function ``g`` over a grid with one refinement pass."""
    nodes = cocycle.driving.grid(grid)
    vals = np.asarray(g(nodes), dtype=float)
    j = int(np.argmax(vals))
    best = float(vals[j])
    # a flat grid profile (autonomous inputs) has nothing to refine
    if cocycle.driving.domain_kind == "circle" and np.ptp(vals) > 0:
        h = 1.0 / grid
        _, refined = golden_section(lambda t: np.asarray(g(np.atleast_1d(t)), dtype=float).reshape(np.shape(t)),
                                    nodes[j] - h, nodes[j] + h, maximize=True)
        best = max(best, float(refined))
    return best


def metric_d(t_phi: BlaschkeCocycle, t_chi: BlaschkeCocycle, grid: int = 2**14, *,
             full_output: bool = False):
    """esssup over the base of |phi(phi_2) - phi(chi_2)|.

    With ``full_output`` returns ``(value, exact)``; ``exact`` is False for
    fields that are not tagged C^1.
    """
    _require_class(t_phi, t_chi, operation="metric_d")
    value = _sup_over_base(t_phi, lambda w: np.abs(phi(_zeta2(t_phi, w)) - phi(_zeta2(t_chi, w))), grid)
    return (value, _smooth(t_phi, t_chi)) if full_output else value


def _rows(cocycle: BlaschkeCocycle, nodes: np.ndarray):
    """(rho, zeros) per base point, grouped by degree block."""
    cf = cocycle.coefficients
    out = []
    for b in cf.blocks:
        if len(cf.blocks) == 1:
            mask = np.ones(nodes.size, dtype=bool)
        else:
            mask = (nodes >= b.lo) & (nodes < b.hi)
            if b is cf.blocks[-1]:
                mask |= nodes >= b.hi
        if np.any(mask):
            out.append((mask, np.asarray(cf.rho(nodes[mask]), dtype=complex), b.values(nodes[mask])))
    return out


def _circle_diff(ct: BlaschkeCocycle, cs: BlaschkeCocycle, nodes: np.ndarray, radius: float,
                 samples: int) -> np.ndarray:
    """max over |z| = radius of |T_omega(z) - S_omega(z)| for every base point."""
    theta = 2.0 * np.pi * np.arange(samples) / samples
    result = np.zeros(nodes.size)
    for mt, rt, zt in _rows(ct, nodes):
        for ms, rs, zs in _rows(cs, nodes[mt]):
            idx = np.flatnonzero(mt)[ms]
            rt_, zt_ = rt[ms], zt[ms]

            def diff(th):
                z = radius * np.exp(1j * th)
                return np.abs(evaluate_rows(rt_, zt_, z) - evaluate_rows(rs, zs, z))

            vals = diff(np.broadcast_to(theta, (idx.size, samples)))
            j = np.argmax(vals, axis=1)
            h = 2.0 * np.pi / samples
            _, refined = golden_section(lambda th: diff(th[:, None])[:, 0], theta[j] - h, theta[j] + h,
                                        maximize=True)
            result[idx] = np.maximum(vals[np.arange(idx.size), j], refined)
    return result


def metric_dprime(t_phi: BlaschkeCocycle, s_chi: BlaschkeCocycle, grid: int = 1024,
                  circle_samples: int = 1024) -> float:
    """esssup over the base of max over the unit circle of |T_omega - S_omega|."""
    if t_phi.driving != s_chi.driving:
        raise ClassMismatch("cocycles are driven by different base systems", module=_MOD,
                            operation="metric_dprime")
    return _sup_over_base(t_phi, lambda w: _circle_diff(t_phi, s_chi, np.atleast_1d(w), 1.0, circle_samples),
                          grid)


def _as_product(x) -> BlaschkeProduct:
    if isinstance(x, BlaschkeProduct):
        return x
    nodes = x.driving.grid(16 if x.driving.domain_kind == "circle" else 4)
    first = fiber_map(x, nodes[0])
    if not all(fiber_map(x, w).same_map(first) for w in nodes[1:]):
        raise ClassMismatch("d'' is only defined for autonomous products", module=_MOD,
                            operation="metric_ddprime")
    return first


def metric_ddprime(t, s, samples: int = 1024, *, full_output: bool = False):
    """sum_{n=2..64} 2^-n sup_{|z| < 1-1/n} |T - S| for autonomous products.

    The difference is analytic on the closed disk, so each supremum is a
    maximum over the circle |z| = 1 - 1/n.  With ``full_output`` returns
    ``(value, tail_bound)``.
    """
    T, S = _as_product(t), _as_product(s)
    n = np.arange(2, DDPRIME_TERMS + 1)
    radii = 1.0 - 1.0 / n
    rows = np.ones(radii.size)

    def ev(bp, z):
        return evaluate_rows(bp.rho * rows, np.broadcast_to(bp.zeros_array, (rows.size, bp.degree)), z)

    def diff(th):
        z = radii[:, None] * np.exp(1j * th)
        return np.abs(ev(T, z) - ev(S, z))

    theta = 2.0 * np.pi * np.arange(samples) / samples
    vals = diff(np.broadcast_to(theta, (radii.size, samples)))
    j = np.argmax(vals, axis=1)
    h = 2.0 * np.pi / samples
    _, refined = golden_section(lambda th: diff(th[:, None])[:, 0], theta[j] - h, theta[j] + h, maximize=True)
    total = float(np.sum(2.0**-n * np.maximum(vals[np.arange(radii.size), j], refined)))
    tail = 2.0**-DDPRIME_TERMS
    return (total, tail) if full_output else total


def ck_constant(phi_k: complex, phi_lim: complex) -> float:
    """1 / (|1 - |phi_k|| * |1 - |phi||), the constant relating d' to d."""
    return 1.0 / (abs(1.0 - abs(phi_k)) * abs(1.0 - abs(phi_lim)))


# ---------------------------------------------------------------------------
# perturbation family
# ---------------------------------------------------------------------------


def perturb(cocycle: BlaschkeCocycle, lam: complex) -> BlaschkeCocycle:
    """Perturbed cocycle with zeta_i -> phi^-1(phi(zeta_i) + phi(lam)) for i >= 2.

    The leading zero stays at the origin and ``rho`` is unchanged; each
    degree block is perturbed separately.  ``lam = 0`` returns ``cocycle``.
    """
    lam = complex(lam)
    if abs(lam) >= 1.0:
        raise BoundaryBlowup(f"|lambda| = {abs(lam):g} is not inside the unit disk", module=_MOD,
                             operation="perturb")
    cf = cocycle.coefficients
    if not cf.fixes_origin:
        raise ClassMismatch("perturb needs a cocycle fixing the origin", module=_MOD, operation="perturb")
    if lam == 0:
        return cocycle
    shift = phi(lam)

    def shifted(block: DegreeBlock) -> DegreeBlock:
        def zeta(w):
            z = block.values(np.atleast_1d(w)).copy()
            z[:, 1:] = phi_inverse(phi(z[:, 1:]) + shift)
            z[:, 0] = 0.0
            return z
        return DegreeBlock(block.degree, zeta, block.lo, block.hi)

    field = CoefficientField(tuple(shifted(b) for b in cf.blocks), rho=cf.rho, smoothness=cf.smoothness,
                             fixes_origin=True, name=f"{cf.name}+perturbation")
    return BlaschkeCocycle(cocycle.driving, field)
