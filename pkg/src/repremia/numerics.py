"""Vectorized bracketing root finder and golden-section minimizer.

Both routines run a fixed number of iterations over whole arrays of
brackets at once, which keeps every solve deterministic and lets the
outer search over the ceded mean run as a handful of numpy calls.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


def bisect(
    f: Callable[[np.ndarray], np.ndarray],
    lo,
    hi,
    xtol: float = 0.0,
    max_iter: int = 200,
) -> np.ndarray:
    """Locate ``inf{x in [lo, hi] : f(x) >= 0}`` for nondecreasing ``f``.

    Works elementwise on arrays of brackets.  The left end converges to the
    smallest root when ``f`` is flat at zero on an interval.  Callers are
    responsible for the sign pattern ``f(lo) <= 0 <= f(hi)``.
    """
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    lo, hi = np.broadcast_arrays(lo, hi)
    lo = lo.copy()
    hi = hi.copy()
    for _ in range(max_iter):
        width = hi - lo
        if np.all(width <= xtol):
            break
        mid = lo + 0.5 * width
        if np.all((mid == lo) | (mid == hi)):
            break
        up = f(mid) >= 0.0
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
    return hi


def bisect_decreasing(
    f: Callable[[np.ndarray], np.ndarray],
    lo,
    hi,
    xtol: float = 0.0,
    max_iter: int = 200,
) -> np.ndarray:
    """Root of a nonincreasing function, ``inf{x : f(x) <= 0}``."""
    return bisect(lambda x: -f(x), lo, hi, xtol=xtol, max_iter=max_iter)


def golden_min(
    f: Callable[[np.ndarray], np.ndarray],
    lo,
    hi,
    xtol: float = 1e-10,
    max_iter: int = 200,
) -> tuple[np.ndarray, np.ndarray]:
    """Golden-section search on each bracket ``[lo, hi]``.

    Returns ``(x, f(x))``.  The bracket endpoints are also compared so a
    minimum sitting on the boundary is never lost.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float)).copy()
    hi = np.atleast_1d(np.asarray(hi, dtype=float)).copy()
    lo, hi = np.broadcast_arrays(lo, hi)
    lo = lo.copy()
    hi = hi.copy()
    a0, b0 = lo.copy(), hi.copy()
    c = hi - _INVPHI * (hi - lo)
    d = lo + _INVPHI * (hi - lo)
    fc = f(c)
    fd = f(d)
    for _ in range(max_iter):
        if np.all(hi - lo <= xtol):
            break
        left = fc <= fd
        # keep [lo, d] where f(c) <= f(d), otherwise [c, hi]
        hi = np.where(left, d, hi)
        lo = np.where(left, lo, c)
        new_c = hi - _INVPHI * (hi - lo)
        new_d = lo + _INVPHI * (hi - lo)
        d_next = np.where(left, c, new_d)
        c_next = np.where(left, new_c, d)
        fd_next = np.where(left, fc, np.nan)
        fc_next = np.where(left, np.nan, fd)
        need_c = left
        need_d = ~left
        if np.any(need_c):
            fc_next = np.where(need_c, f(c_next), fc_next)
        if np.any(need_d):
            fd_next = np.where(need_d, f(d_next), fd_next)
        c, d, fc, fd = c_next, d_next, fc_next, fd_next
    x = np.where(fc <= fd, c, d)
    fx = np.minimum(fc, fd)
    fa = f(a0)
    fb = f(b0)
    x = np.where(fa < fx, a0, x)
    fx = np.minimum(fx, fa)
    x = np.where(fb < fx, b0, x)
    fx = np.minimum(fx, fb)
    return x, fx
