"""Small vectorised numerical helpers used across modules."""

from __future__ import annotations

import numpy as np

INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


def golden_section(f, a, b, *, maximize=False, tol=1e-13, max_iter=200):
    """Vectorised golden-section search of ``f`` on the brackets ``[a, b]``.

    ``f`` must accept an array of abscissae and return an array of the same
    shape.  ``a`` and ``b`` may be scalars or arrays; every bracket is refined
    independently.  Returns ``(x_best, f_best)``.
    """
    a = np.array(a, dtype=float, copy=True)
    b = np.array(b, dtype=float, copy=True)
    a, b = np.broadcast_arrays(a, b)
    a, b = a.copy(), b.copy()
    sign = -1.0 if maximize else 1.0

    def g(x):
        return sign * np.asarray(f(x), dtype=float)

    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = g(c), g(d)
    for _ in range(max_iter):
        if np.all(np.abs(b - a) <= tol * (1.0 + np.abs(a) + np.abs(b))):
            break
        left = fc < fd
        # keep [a, d] where f(c) < f(d), else [c, b]
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = b - INV_PHI * (b - a)
        new_d = a + INV_PHI * (b - a)
        # one of the two interior points is reused
        fd_new = np.where(left, fc, np.nan)
        fc_new = np.where(left, np.nan, fd)
        need_c = left
        need_d = ~left
        c, d = new_c, new_d
        if np.any(need_c):
            fc_new = np.where(need_c, g(c), fc_new)
        if np.any(need_d):
            fd_new = np.where(need_d, g(d), fd_new)
        fc, fd = fc_new, fd_new
    x = np.where(fc < fd, c, d)
    fx = np.minimum(fc, fd)
    # the endpoints can beat both interior points on monotone brackets
    fa, fb = g(a), g(b)
    x = np.where(fa < fx, a, x)
    fx = np.minimum(fa, fx)
    x = np.where(fb < fx, b, x)
    fx = np.minimum(fb, fx)
    return x, sign * fx


def uniform_disk(rng: np.random.Generator, count: int, radius: float = 1.0) -> np.ndarray:
    """Uniform complex samples in the disk of the given radius."""
    r = radius * np.sqrt(rng.random(count))
    theta = 2.0 * np.pi * rng.random(count)
    return r * np.exp(1j * theta)
