"""Named coefficient-field presets.

Every preset builds a :class:`BlaschkeCocycle` from a small parameter dict.
These are the fields the config file can refer to by name.
"""

from __future__ import annotations

import numpy as np

from .cocycle import (
    BlaschkeCocycle,
    CircleRotation,
    CoefficientField,
    DegreeBlock,
    StaticDisk,
    tabulated_zeta,
)


def _with_origin(*columns):
    """Stack coordinate columns behind a leading zero coordinate."""
    def zeta(w):
        w = np.asarray(w)
        cols = [np.zeros(w.shape, dtype=complex)] + [np.broadcast_to(c(w), w.shape).astype(complex)
                                                     for c in columns]
        return np.stack(cols, axis=-1)
    return zeta


def _const(value):
    return lambda w: np.full(np.shape(w), complex(value))


def constant(zeros=(0.5,), alpha=None, rho=1.0) -> BlaschkeCocycle:
    """Autonomous origin-fixing cocycle with zeros (0, *zeros)."""
    zeros = [complex(z) for z in zeros]
    field = CoefficientField.single(len(zeros) + 1, _with_origin(*[_const(z) for z in zeros]),
                                    rho=lambda w: np.full(np.shape(w), complex(rho)),
                                    name="constant")
    return BlaschkeCocycle(_rotation(alpha), field)


def rotating(radius=0.5, alpha=None) -> BlaschkeCocycle:
    """zeta_2(omega) = radius * exp(2 pi i omega)."""
    field = CoefficientField.single(2, _with_origin(lambda w: radius * np.exp(2j * np.pi * w)),
                                    name="rotating")
    return BlaschkeCocycle(_rotation(alpha), field)


def cosine(center=0.5, amplitude=0.4, alpha=None) -> BlaschkeCocycle:
    """zeta_2(omega) = center + amplitude * cos(2 pi omega)."""
    field = CoefficientField.single(2, _with_origin(lambda w: center + amplitude * np.cos(2 * np.pi * w)),
                                    name="cosine")
    return BlaschkeCocycle(_rotation(alpha), field)


def quarter_zero(height=0.5, alpha=None) -> BlaschkeCocycle:
    """zeta_2 vanishes on [0, 1/4) and is a C^1 bump of the given height elsewhere."""
    def z2(w):
        w = np.mod(np.asarray(w, dtype=float), 1.0)
        bump = height * np.sin(np.pi * (w - 0.25) / 0.75) ** 2
        return np.where(w < 0.25, 0.0, bump)
    field = CoefficientField.single(2, _with_origin(z2), name="quarter_zero")
    return BlaschkeCocycle(_rotation(alpha), field)


def two_block(first=(0.3,), second=(0.4, 0.5), split=0.5, alpha=None) -> BlaschkeCocycle:
    """Varying degree: constants (0, *first) on [0, split), (0, *second) on [split, 1)."""
    b1 = DegreeBlock(len(first) + 1, _with_origin(*[_const(z) for z in first]), 0.0, split)
    b2 = DegreeBlock(len(second) + 1, _with_origin(*[_const(z) for z in second]), split, 1.0)
    return BlaschkeCocycle(_rotation(alpha), CoefficientField((b1, b2), name="two_block"))


def disk_identity(radius=0.3) -> BlaschkeCocycle:
    """Base B_radius(0) in R^2 with zeta_2(omega) = omega."""
    field = CoefficientField.single(2, _with_origin(lambda w: np.asarray(w, dtype=complex)),
                                    name="disk_identity")
    return BlaschkeCocycle(StaticDisk(radius), field)


def table(omegas, values, alpha=None) -> BlaschkeCocycle:
    """User-supplied samples of zeta_2..zeta_n, linearly interpolated."""
    vals = np.asarray(values, dtype=complex)
    if vals.ndim == 1:
        vals = vals[:, None]
    interp = tabulated_zeta(omegas, vals)

    def zeta(w):
        w = np.asarray(w)
        return np.concatenate([np.zeros(w.shape + (1,), dtype=complex), interp(w)], axis=-1)

    field = CoefficientField.single(vals.shape[1] + 1, zeta, smoothness="measurable", name="table")
    return BlaschkeCocycle(_rotation(alpha), field)


def _rotation(alpha):
    return CircleRotation() if alpha is None else CircleRotation(float(alpha))


PRESETS = {
    "constant": constant,
    "rotating": rotating,
    "cosine": cosine,
    "quarter_zero": quarter_zero,
    "two_block": two_block,
    "disk_identity": disk_identity,
    "table": table,
}
