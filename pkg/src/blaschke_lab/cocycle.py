"""Driving systems, coefficient fields and Blaschke product cocycles.

A cocycle is a driving system (an invertible measure-preserving base map)
together with a coefficient field ``omega -> (n, rho, zeta)``.  Coefficient
fields are vectorised: ``zeta`` callables receive an array of base points and
return an array of shape ``(len(omega), degree)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from ._numerics import golden_section
from .blaschke import (
    BlaschkeProduct,
    admissibility_bound,
    circle_max_rows,
    derivative,
    evaluate,
)
from .errors import ClassMismatch, DomainError, NoConvergence, NotAdmissible

_MOD = "cocycle-engine"

GOLDEN_ROTATION = (math.sqrt(5.0) - 1.0) / 2.0
NEG_INFINITY = -math.inf
LOG_FLOOR = -700.0
DEFAULT_INSTABILITY_TOL = 1e-9

ZetaFn = Callable[[np.ndarray], np.ndarray]
RhoFn = Callable[[np.ndarray], np.ndarray]


# ---------------------------------------------------------------------------
# driving systems
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CircleRotation:
    """omega -> omega + alpha (mod 1) on [0, 1) with Lebesgue measure."""

    alpha: float = GOLDEN_ROTATION
    domain_kind = "circle"
    full_support = True

    def contains(self, omega) -> bool:
        w = np.asarray(omega)
        return bool(np.all(np.isreal(w)) and np.all(np.isfinite(np.real(w))))

    def normalize(self, omega):
        if not self.contains(omega):
            raise DomainError(f"base point {omega!r} is not a finite real number",
                              module=_MOD, operation="fiber_map")
        return np.mod(np.real(omega), 1.0)

    def forward(self, omega):
        return np.mod(omega + self.alpha, 1.0)

    def backward(self, omega):
        return np.mod(omega - self.alpha, 1.0)

    def grid(self, count: int) -> np.ndarray:
        return np.arange(count) / count

    def quadrature(self, count: int) -> tuple[np.ndarray, np.ndarray]:
        """Midpoint rule; spectrally accurate for smooth periodic integrands."""
        return (np.arange(count) + 0.5) / count, np.full(count, 1.0 / count)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return rng.random(count)


@dataclass(frozen=True)
class StaticDisk:
    """The disk of radius ``radius`` in R^2 (points stored as complex numbers).

    Carries uniform measure and no dynamics: forward and backward are the
    identity.  Experiments over this base only use the image of the
    coefficient field.
    """

    radius: float = 0.3
    domain_kind = "disk2d"
    full_support = True

    def contains(self, omega) -> bool:
        w = np.asarray(omega, dtype=complex)
        return bool(np.all(np.isfinite(w)) and np.all(np.abs(w) <= self.radius * (1 + 1e-12)))

    def normalize(self, omega):
        if not self.contains(omega):
            raise DomainError(f"base point {omega!r} lies outside B_{self.radius}(0)",
                              module=_MOD, operation="fiber_map")
        return np.asarray(omega, dtype=complex)

    def forward(self, omega):
        return omega

    def backward(self, omega):
        return omega

    def grid(self, per_axis: int) -> np.ndarray:
        """Cell centres of a ``per_axis`` x ``per_axis`` grid that lie in the disk."""
        t = -self.radius + (np.arange(per_axis) + 0.5) * (2 * self.radius / per_axis)
        pts = (t[None, :] + 1j * t[:, None]).ravel()
        return pts[np.abs(pts) <= self.radius]

    def quadrature(self, per_axis: int) -> tuple[np.ndarray, np.ndarray]:
        pts = self.grid(per_axis)
        return pts, np.full(pts.size, 1.0 / pts.size)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        r = self.radius * np.sqrt(rng.random(count))
        return r * np.exp(2j * np.pi * rng.random(count))


DrivingSystem = CircleRotation | StaticDisk


# ---------------------------------------------------------------------------
# coefficient fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DegreeBlock:
    """Coefficient field of constant degree on the interval [lo, hi).

    ``zeta`` must be defined on the closed interval (its C^1 extension is
    used at the endpoints).  On the disk base the bounds are ignored.
    """

    degree: int
    zeta: ZetaFn
    lo: float = 0.0
    hi: float = 1.0

    def values(self, omega: np.ndarray) -> np.ndarray:
        out = np.asarray(self.zeta(np.asarray(omega)), dtype=complex)
        if out.shape != (np.size(omega), self.degree):
            raise ValueError(f"zeta returned shape {out.shape}, expected {(np.size(omega), self.degree)}")
        return out


def _unit_rho(omega):
    return np.ones(np.shape(omega), dtype=complex)


@dataclass(frozen=True, eq=False)
class CoefficientField:
    blocks: tuple[DegreeBlock, ...]
    rho: RhoFn = _unit_rho
    smoothness: str = "C1"
    fixes_origin: bool = True
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        if not self.blocks:
            raise ValueError("a coefficient field needs at least one block")
        if self.smoothness not in ("C1", "measurable"):
            raise ValueError("smoothness must be 'C1' or 'measurable'")
        for b in self.blocks:
            if b.degree < 2:
                raise ValueError("degree must be at least 2")
        if len(self.blocks) > 1:
            edges = sorted((b.lo, b.hi) for b in self.blocks)
            if abs(edges[0][0]) > 1e-15 or abs(edges[-1][1] - 1.0) > 1e-15:
                raise ValueError("degree blocks must cover [0, 1)")
            for (_, h), (l2, _) in zip(edges, edges[1:]):
                if abs(h - l2) > 1e-15:
                    raise ValueError("degree blocks must tile [0, 1) without gaps")

    @classmethod
    def single(cls, degree: int, zeta: ZetaFn, **kw) -> "CoefficientField":
        return cls((DegreeBlock(degree, zeta),), **kw)

    @property
    def varying_degree(self) -> bool:
        return len({b.degree for b in self.blocks}) > 1

    def block_at(self, omega: float) -> DegreeBlock:
        if len(self.blocks) == 1:
            return self.blocks[0]
        for b in self.blocks:
            if b.lo <= omega < b.hi:
                return b
        return self.blocks[-1]

    def degree_at(self, omega) -> int:
        return self.block_at(omega).degree

    def zeros_at(self, omega) -> np.ndarray:
        return self.block_at(omega).values(np.array([omega]))[0]

    def rho_at(self, omega) -> complex:
        return complex(np.asarray(self.rho(np.array([omega])))[0])


@dataclass(frozen=True, eq=False)
class BlaschkeCocycle:
    driving: DrivingSystem
    coefficients: CoefficientField

    @property
    def fixes_origin(self) -> bool:
        return self.coefficients.fixes_origin

    def with_coefficients(self, coefficients: CoefficientField) -> "BlaschkeCocycle":
        return BlaschkeCocycle(self.driving, coefficients)

    def block_grid(self, block: DegreeBlock, grid: int) -> np.ndarray:
        """Grid of base points covering the closure of one degree block."""
        if self.driving.domain_kind == "disk2d":
            return self.driving.grid(grid)
        count = max(2, int(round(grid * (block.hi - block.lo))) + 1)
        return np.linspace(block.lo, block.hi, count)


def fiber_map(cocycle: BlaschkeCocycle, omega) -> BlaschkeProduct:
    w = cocycle.driving.normalize(omega)
    w = w.item() if isinstance(w, np.ndarray) else w
    cf = cocycle.coefficients
    return BlaschkeProduct(cf.rho_at(w), tuple(cf.zeros_at(w)))


def iterate(cocycle: BlaschkeCocycle, omega, z: complex, steps: int) -> complex:
    """Image of ``z`` under T_{sigma^{steps-1} omega} o ... o T_omega."""
    if steps < 0:
        raise ValueError("steps must be non-negative")
    w = omega
    z = complex(z)
    for _ in range(steps):
        z = evaluate(fiber_map(cocycle, w), z)
        w = cocycle.driving.forward(w)
    return z


# ---------------------------------------------------------------------------
# admissibility
# ---------------------------------------------------------------------------


class Admissibility(NamedTuple):
    admissible: bool
    r: float
    R: float
    certified: bool

    def __bool__(self) -> bool:
        return self.admissible


def _block_sup_moduli(cocycle: BlaschkeCocycle, block: DegreeBlock, grid: int) -> np.ndarray:
    """sup over the block of |zeta_i| for every coordinate, with local refinement."""
    nodes = cocycle.block_grid(block, grid)
    mods = np.abs(block.values(nodes))
    sup = mods.max(axis=0)
    if cocycle.driving.domain_kind == "circle" and nodes.size > 2:
        h = nodes[1] - nodes[0]
        for i in range(block.degree):
            j = int(np.argmax(mods[:, i]))
            a, b = max(block.lo, nodes[j] - h), min(block.hi, nodes[j] + h)
            _, best = golden_section(lambda t, i=i: np.abs(block.values(np.atleast_1d(t))[:, i]).reshape(np.shape(t)),
                                     a, b, maximize=True)
            sup[i] = max(sup[i], float(best))
    return sup


def admissible(cocycle: BlaschkeCocycle, R: float = 0.5, grid: int = 1024) -> Admissibility:
    """Check sup_omega r_{T_omega}(R) < R.

    Origin-fixing fields use the closed-form bound evaluated at the per
    coordinate suprema of |zeta_i| (certified).  Other fields fall back to the
    numerical maximum of circle_max over the grid (not certified).
    """
    if not 0 < R < 1:
        raise ValueError("R must lie in (0, 1)")
    cf = cocycle.coefficients
    r = 0.0
    if cf.fixes_origin:
        for block in cf.blocks:
            sup = _block_sup_moduli(cocycle, block, grid)
            r = max(r, admissibility_bound(np.minimum(sup[1:], np.nextafter(1.0, 0.0)), R))
        return Admissibility(r < R, r, R, True)
    for block in cf.blocks:
        nodes = cocycle.block_grid(block, grid)
        zs = block.values(nodes)
        rhos = np.asarray(cf.rho(nodes), dtype=complex)
        r = max(r, float(np.max(circle_max_rows(rhos, zs, R, 256))))
    return Admissibility(r < R, r, R, False)


# ---------------------------------------------------------------------------
# random fixed point and Lyapunov integral
# ---------------------------------------------------------------------------


def _pullback_from(cocycle: BlaschkeCocycle, omega, n: int) -> complex:
    """T_{sigma^-1 omega} o ... o T_{sigma^-n omega}(0)."""
    w = omega
    for _ in range(n):
        w = cocycle.driving.backward(w)
    return iterate(cocycle, w, 0.0, n)


def pullback_fixed_point(cocycle: BlaschkeCocycle, omega, tol: float = 1e-13, cap: int = 4096,
                         R: float = 0.5, check: bool = True) -> complex:
    """Random fixed point x_omega as the limit of pullback iterates of 0.

    The pullback horizon is doubled until two consecutive horizons agree to
    ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if check and not admissible(cocycle, R):
        raise NotAdmissible(f"cocycle is not admissible at R={R}", module=_MOD,
                            operation="pullback_fixed_point")
    if cocycle.fixes_origin:
        return 0j
    n = 1
    prev = _pullback_from(cocycle, omega, n)
    while 2 * n <= cap:
        n *= 2
        cur = _pullback_from(cocycle, omega, n)
        if abs(cur - prev) < tol:
            return cur
        prev = cur
    raise NoConvergence(f"pullback gap still above {tol:g} after {n} steps", module=_MOD,
                        operation="pullback_fixed_point")


def pullback_gaps(cocycle: BlaschkeCocycle, omega, count: int) -> np.ndarray:
    """|x_{k+1} - x_k| for the pullback iterates x_k, k = 1..count."""
    xs = [_pullback_from(cocycle, omega, k) for k in range(1, count + 2)]
    return np.abs(np.diff(xs))


def _log_abs(values: np.ndarray) -> np.ndarray:
    a = np.abs(values)
    with np.errstate(divide="ignore"):
        return np.where(a < math.exp(LOG_FLOOR), -np.inf, np.log(np.maximum(a, 1e-320)))


def lyapunov_lambda(cocycle: BlaschkeCocycle, method: str = "quadrature", budget: int = 4096,
                    *, omega0: float = 0.1, R: float = 0.5, full_output: bool = False):
    """Lambda = integral of log|T'_omega(x_omega)| dP.

    ``method="quadrature"`` integrates against the invariant-measure nodes of
    the driving system; ``method="orbit"`` Birkhoff-averages along the orbit
    of ``omega0``.  Returns ``-inf`` as soon as one evaluated derivative is
    below ``exp(-700)``.  With ``full_output`` a ``(value, stderr)`` pair is
    returned; the quadrature error is estimated from a half-resolution rule
    and the orbit error from batch means.
    """
    if not admissible(cocycle, R):
        raise NotAdmissible(f"cocycle is not admissible at R={R}", module=_MOD, operation="lyapunov_lambda")
    if method == "quadrature":
        value, err = _lambda_quadrature(cocycle, budget, R)
    elif method == "orbit":
        if cocycle.driving.domain_kind != "circle":
            raise ValueError("orbit averages need a base with dynamics")
        value, err = _lambda_orbit(cocycle, budget, omega0, R)
    else:
        raise ValueError(f"unknown method {method!r}")
    return (value, err) if full_output else value


def _log_derivatives(cocycle: BlaschkeCocycle, nodes: np.ndarray, R: float) -> np.ndarray:
    cf = cocycle.coefficients
    out = np.empty(nodes.size)
    if cf.fixes_origin:
        for k, w in enumerate(nodes):
            out[k] = _log_abs(np.array([derivative(fiber_map(cocycle, w), 0.0)]))[0]
        return out
    for k, w in enumerate(nodes):
        x = pullback_fixed_point(cocycle, w, R=R, check=False)
        out[k] = _log_abs(np.array([derivative(fiber_map(cocycle, w), x)]))[0]
    return out


def _lambda_quadrature(cocycle, budget, R):
    nodes, weights = cocycle.driving.quadrature(budget)
    logs = _log_derivatives(cocycle, nodes, R)
    if np.any(np.isneginf(logs)):
        return NEG_INFINITY, 0.0
    value = float(np.dot(weights, logs))
    half_nodes, half_w = cocycle.driving.quadrature(max(1, budget // 2))
    half = float(np.dot(half_w, _log_derivatives(cocycle, half_nodes, R)))
    return value, abs(value - half)


def _lambda_orbit(cocycle, budget, omega0, R, batches: int = 20):
    x = pullback_fixed_point(cocycle, omega0, R=R, check=False)
    w = omega0
    logs = np.empty(budget)
    for k in range(budget):
        bp = fiber_map(cocycle, w)
        logs[k] = _log_abs(np.array([derivative(bp, x)]))[0]
        if logs[k] == -np.inf:
            return NEG_INFINITY, 0.0
        x = evaluate(bp, x)
        w = cocycle.driving.forward(w)
    value = float(logs.mean())
    size = budget // batches
    means = logs[: size * batches].reshape(batches, size).mean(axis=1)
    return value, float(means.std(ddof=1) / math.sqrt(batches))


# ---------------------------------------------------------------------------
# stability
# ---------------------------------------------------------------------------


class EssinfResult(NamedTuple):
    value: float
    witness: complex | float
    exact: bool


@dataclass(frozen=True)
class StabilityVerdict:
    classification: str
    essinf_estimate: float
    witness_omega: complex | float | None
    exact: bool = True

    @property
    def stable(self) -> bool:
        return self.classification == "Stable"


def _product_modulus(block: DegreeBlock, omega) -> np.ndarray:
    z = block.values(np.atleast_1d(omega))
    return np.abs(np.prod(z[:, 1:], axis=1))


def essinf_product(cocycle: BlaschkeCocycle, grid: int | None = None) -> EssinfResult:
    """Essential infimum of |prod_{i>=2} zeta_i| over the base.

    Realised as a grid minimum refined locally around the grid argmin.  For
    the circle ``grid`` counts nodes on [0, 1) (default 2**14); for the disk
    it is the number of nodes per axis (default 512).  ``exact`` is False
    unless the field is C^1 and the measure has full support.
    """
    cf = cocycle.coefficients
    if not cf.fixes_origin:
        raise ClassMismatch("essinf_product needs a cocycle fixing the origin", module=_MOD,
                            operation="essinf_product")
    disk = cocycle.driving.domain_kind == "disk2d"
    if grid is None:
        grid = 512 if disk else 2**14
    best_val, best_w = math.inf, 0.0
    for block in cf.blocks:
        nodes = cocycle.block_grid(block, grid)
        vals = _product_modulus(block, nodes)
        j = int(np.argmin(vals))
        val, w = float(vals[j]), nodes[j]
        if val > 0:
            if disk:
                val, w = _refine_disk(block, cocycle.driving.radius, nodes[j], val,
                                      2 * cocycle.driving.radius / grid)
            elif nodes.size > 2:
                h = nodes[1] - nodes[0]
                a, b = max(block.lo, w - h), min(block.hi, w + h)
                x, fx = golden_section(lambda t: _product_modulus(block, t).reshape(np.shape(t)) ** 2, a, b)
                fx = math.sqrt(max(float(fx), 0.0))
                if fx < val:
                    val, w = fx, float(x)
        if val < best_val:
            best_val, best_w = val, w
    exact = cf.smoothness == "C1" and cocycle.driving.full_support
    if not disk:
        best_w = float(best_w)
    return EssinfResult(best_val, best_w, exact)


def _refine_disk(block: DegreeBlock, radius: float, start: complex, start_val: float, h: float):
    from scipy.optimize import minimize

    def f(p):
        w = complex(p[0], p[1])
        if abs(w) > radius:
            w = w * radius / abs(w)
        return float(_product_modulus(block, w)[0] ** 2)

    res = minimize(f, [start.real, start.imag], method="Nelder-Mead",
                   options={"xatol": 1e-14, "fatol": 1e-30, "initial_simplex":
                            [[start.real, start.imag], [start.real + h, start.imag],
                             [start.real, start.imag + h]], "maxiter": 2000})
    w = complex(res.x[0], res.x[1])
    if abs(w) > radius:
        w = w * radius / abs(w)
    val = float(_product_modulus(block, w)[0])
    return (val, w) if val < start_val else (start_val, start)


def classify_stability(cocycle: BlaschkeCocycle, grid: int | None = None,
                       instability_tolerance: float = DEFAULT_INSTABILITY_TOL) -> StabilityVerdict:
    """Stable iff the essential infimum of |prod_{i>=2} zeta_i| exceeds the tolerance."""
    res = essinf_product(cocycle, grid)
    cls = "Stable" if res.value > instability_tolerance else "Unstable"
    return StabilityVerdict(cls, res.value, res.witness, res.exact)


# ---------------------------------------------------------------------------
# user-supplied tables
# ---------------------------------------------------------------------------


def tabulated_zeta(omegas: Sequence[float], values: np.ndarray) -> ZetaFn:
    """Periodic linear interpolation of sampled zeros on the circle.

    ``values`` has shape ``(len(omegas), degree)``.
    """
    om = np.asarray(omegas, dtype=float)
    vals = np.asarray(values, dtype=complex)
    if vals.ndim == 1:
        vals = vals[:, None]
    order = np.argsort(om)
    om, vals = om[order], vals[order]
    om_ext = np.concatenate([om, [om[0] + 1.0]])
    vals_ext = np.concatenate([vals, vals[:1]], axis=0)

    def zeta(w):
        w = np.mod(np.asarray(w, dtype=float), 1.0)
        w = np.where(w < om[0], w + 1.0, w)
        cols = [np.interp(w, om_ext, vals_ext[:, i].real) + 1j * np.interp(w, om_ext, vals_ext[:, i].imag)
                for i in range(vals.shape[1])]
        return np.stack(cols, axis=-1)

    return zeta
