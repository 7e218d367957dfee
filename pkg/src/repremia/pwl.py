"""Continuous piecewise-linear functions on ``[0, inf)``.

Indemnities, retained losses, premiums and both parties' positions are all
continuous piecewise-linear maps of the ground-up loss.  Representing them
exactly lets expectations, stop-loss transforms and distortion risk
measures reduce to sums of layer integrals of the survival function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .errors import DomainError


@dataclass(frozen=True, eq=False)
class PiecewiseLinear:
    """``f(x) = values[j] + slopes[j] * (x - knots[j])`` for ``knots[j] <= x < knots[j+1]``.

    ``knots[0]`` is always 0 and the last slope extends to infinity.
    """

    knots: np.ndarray
    slopes: np.ndarray
    values: np.ndarray

    @classmethod
    def from_slopes(cls, knots: Iterable[float], slopes: Iterable[float], intercept: float = 0.0):
        knots = np.asarray(list(knots), dtype=float)
        slopes = np.asarray(list(slopes), dtype=float)
        if knots.ndim != 1 or knots.size == 0 or knots[0] != 0.0:
            raise DomainError("knots must start at 0")
        if knots.size != slopes.size:
            raise DomainError("need one slope per knot")
        if np.any(np.diff(knots) <= 0) or not np.all(np.isfinite(knots)):
            raise DomainError("knots must be finite and strictly increasing")
        values = np.empty_like(knots)
        values[0] = intercept
        if knots.size > 1:
            values[1:] = intercept + np.cumsum(slopes[:-1] * np.diff(knots))
        return cls(knots, slopes, values)

    @classmethod
    def constant(cls, c: float) -> "PiecewiseLinear":
        return cls.from_slopes([0.0], [0.0], c)

    @classmethod
    def identity(cls) -> "PiecewiseLinear":
        return cls.from_slopes([0.0], [1.0], 0.0)

    @classmethod
    def from_breakpoints(cls, points: Iterable[tuple[float, float]], intercept: float = 0.0):
        """Build from ``(x, slope-after)`` pairs; slope is 0 before the first x > 0."""
        pts = sorted((float(x), float(s)) for x, s in points)
        knots, slopes = [0.0], [0.0]
        for x, s in pts:
            if x < 0:
                raise DomainError("breakpoints must be >= 0")
            if x == knots[-1]:
                slopes[-1] = s
            else:
                knots.append(x)
                slopes.append(s)
        return cls.from_slopes(knots, slopes, intercept).normalize()

    # -- evaluation ---------------------------------------------------------

    @property
    def intercept(self) -> float:
        return float(self.values[0])

    def _segment(self, x: np.ndarray) -> np.ndarray:
        return np.clip(np.searchsorted(self.knots, x, side="right") - 1, 0, None)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        j = self._segment(x)
        out = self.values[j] + self.slopes[j] * (x - self.knots[j])
        return float(out) if out.ndim == 0 else out

    def slope_at(self, x):
        """Right derivative at ``x``."""
        x = np.asarray(x, dtype=float)
        out = self.slopes[self._segment(x)]
        return float(out) if out.ndim == 0 else out

    def segments(self):
        """Yield ``(lo, hi, slope)`` with ``hi = inf`` for the last piece."""
        hi = np.append(self.knots[1:], math.inf)
        for lo, up, s in zip(self.knots, hi, self.slopes):
            yield float(lo), float(up), float(s)

    @property
    def is_nondecreasing(self) -> bool:
        return bool(np.all(self.slopes >= 0.0))

    # -- algebra ------------------------------------------------------------

    def _on_knots(self, knots: np.ndarray) -> "PiecewiseLinear":
        values = self(knots)
        slopes = self.slope_at(knots)
        return PiecewiseLinear(knots, np.atleast_1d(slopes), np.atleast_1d(values))

    def _combine(self, other: "PiecewiseLinear", op: Callable) -> "PiecewiseLinear":
        knots = np.union1d(self.knots, other.knots)
        a, b = self._on_knots(knots), other._on_knots(knots)
        return PiecewiseLinear(knots, op(a.slopes, b.slopes), op(a.values, b.values))

    def __add__(self, other):
        if isinstance(other, PiecewiseLinear):
            return self._combine(other, np.add)
        return PiecewiseLinear(self.knots, self.slopes, self.values + float(other))

    __radd__ = __add__

    def __neg__(self):
        return PiecewiseLinear(self.knots, -self.slopes, -self.values)

    def __sub__(self, other):
        if isinstance(other, PiecewiseLinear):
            return self._combine(other, np.subtract)
        return self + (-float(other))

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c: float) -> "PiecewiseLinear":
        return PiecewiseLinear(self.knots, c * self.slopes, c * self.values)

    def with_knots(self, extra: Iterable[float]) -> "PiecewiseLinear":
        """Same function with additional (finite, positive) knots inserted."""
        extra = np.asarray([x for x in extra if 0.0 < x < math.inf], dtype=float)
        return self._on_knots(np.union1d(self.knots, extra))

    def clamp_affine(self, c0: float, c1: float, lo: float, hi: float) -> "PiecewiseLinear":
        """``clip(c0 + c1 * f(x), lo, hi)`` for nondecreasing ``f`` and ``c1 >= 0``."""
        g = self
        if c1 > 0:
            cuts = [self.level_inf((lv - c0) / c1) for lv in (lo, hi)]
            cuts += [self.level_sup((lv - c0) / c1) for lv in (lo, hi)]
            g = self.with_knots(cuts)
        knots = g.knots
        values = np.clip(c0 + c1 * g.values, lo, hi)
        ends = np.append(knots[1:], knots[-1] + 1.0)
        mids = 0.5 * (knots + ends)
        inner = c0 + c1 * g(mids)
        inside = (inner > lo) & (inner < hi)
        slopes = np.where(inside, c1 * g.slopes, 0.0)
        return PiecewiseLinear(knots, slopes, values).normalize()

    def normalize(self) -> "PiecewiseLinear":
        """Drop knots where the slope does not change."""
        keep = np.ones(self.knots.size, dtype=bool)
        keep[1:] = self.slopes[1:] != self.slopes[:-1]
        if keep.all():
            return self
        return PiecewiseLinear(self.knots[keep], self.slopes[keep], self.values[keep])

    # -- level sets (nondecreasing functions) -------------------------------

    def level_sup(self, y: float) -> float:
        """``sup{x >= 0 : f(x) <= y}`` for nondecreasing ``f``; -inf if empty."""
        if self.values[0] > y:
            return -math.inf
        for lo, hi, s in reversed(list(self.segments())):
            v_lo = self(lo)
            if v_lo <= y:
                if s <= 0:
                    return hi
                x = lo + (y - v_lo) / s
                return min(x, hi)
        return 0.0

    def level_inf(self, y: float) -> float:
        """``inf{x >= 0 : f(x) >= y}`` for nondecreasing ``f``; inf if never reached."""
        if self.values[0] >= y:
            return 0.0
        for lo, hi, s in self.segments():
            v_hi = self(hi) if hi < math.inf else (math.inf if s > 0 else self(lo))
            if v_hi >= y:
                return lo + (y - self(lo)) / s
        return math.inf

    # -- integrals against a loss model -------------------------------------

    def expectation(self, m) -> float:
        """``E[f(X)]`` computed exactly from layer integrals."""
        total = self.intercept
        for lo, hi, s in self.segments():
            if s != 0.0:
                total += s * float(m._layer(np.array(lo), np.array(hi)))
        return total

    def stop_loss_transform(self, m, t):
        """``E[(f(X) - t)_+]`` for nondecreasing ``f``, vectorized over ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty_like(t)
        mean = self.expectation(m)
        for i, ti in enumerate(t):
            if self.values[0] >= ti:
                out[i] = mean - ti
                continue
            xt = self.level_sup(ti)
            if xt == math.inf:
                out[i] = 0.0
                continue
            acc = 0.0
            for lo, hi, s in self.segments():
                if s != 0.0 and hi > xt:
                    acc += s * float(m._layer(np.array(max(lo, xt)), np.array(hi)))
            out[i] = acc
        return out

    def __repr__(self) -> str:
        pts = ", ".join(f"({k:.6g}, {s:.6g})" for k, s in zip(self.knots, self.slopes))
        return f"PiecewiseLinear(f(0)={self.intercept:.6g}; {pts})"
