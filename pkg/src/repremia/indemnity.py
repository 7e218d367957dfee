"""Feasible ceded-loss functions and the layered contract families.

An indemnity is a continuous piecewise-linear map with ``I(0) = 0`` and
slopes in ``[0, 1]``.  Besides general layouts, four families are tagged:

* ``StopLoss``: ``(x - d)_+``; the null contract is the stop-loss with no
  attachment (``d = None``).
* ``I1``: a first layer of width ``d_I`` starting at ``d1`` plus an
  unlimited layer from ``d2``.
* ``I2``: the same shape with first-layer width ``u_I``.
* ``S3``: three layers ``[a, b]``, ``[c, d]``, ``[e, inf)`` with widths
  ``b - a = d_I`` and ``d - c = u_I - d_I``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

import numpy as np

from .errors import DomainError, InfeasibleError
from .premium import PremiumParams
from .pwl import PiecewiseLinear

STOP_LOSS, I1, I2, S3, GENERAL = "StopLoss", "I1", "I2", "S3", "General"
FAMILIES = (STOP_LOSS, I1, I2, S3, GENERAL)


def _ramps(terms: Iterable[tuple[float, float]]) -> PiecewiseLinear:
    """Sum of ``coef * (x - k)_+`` terms; ``k = None`` terms are dropped."""
    acc: dict[float, float] = {}
    for k, c in terms:
        if k is None or k == math.inf:
            continue
        acc[float(k)] = acc.get(float(k), 0.0) + c
    knots = sorted(set(acc) | {0.0})
    slopes = np.cumsum([acc.get(k, 0.0) for k in knots])
    # exact zeros where ramps cancel
    slopes = np.where(np.abs(slopes) < 1e-15, 0.0, slopes)
    return PiecewiseLinear.from_slopes(knots, slopes).normalize()


def _opt(x):
    """Finite float or None for an unlimited layer."""
    if x is None:
        return None
    x = float(x)
    return None if math.isinf(x) else x


@dataclass(frozen=True, eq=False)
class Indemnity:
    """A ceded-loss function together with its family tag and layout."""

    pl: PiecewiseLinear
    family: str = GENERAL
    layout: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown family {self.family!r}")
        if self.pl.intercept != 0.0:
            raise InfeasibleError("indemnity must satisfy I(0) = 0")
        s = self.pl.slopes
        if np.any(s < 0.0) or np.any(s > 1.0):
            raise InfeasibleError("indemnity slopes must lie in [0, 1]")

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls) -> "Indemnity":
        return cls(PiecewiseLinear.constant(0.0), STOP_LOSS, {"d": None})

    @classmethod
    def stop_loss(cls, d: float | None) -> "Indemnity":
        d = _opt(d)
        if d is None:
            return cls.zero()
        if d < 0:
            raise InfeasibleError("stop-loss deductible must be >= 0")
        return cls(_ramps([(d, 1.0)]), STOP_LOSS, {"d": d})

    @classmethod
    def full(cls) -> "Indemnity":
        return cls.stop_loss(0.0)

    @classmethod
    def layered(cls, family: str, d1: float, width: float, d2: float | None) -> "Indemnity":
        """Two-layer contract ``(x-d1)_+ - (x-d1-width)_+ + (x-d2)_+``."""
        if family not in (I1, I2):
            raise DomainError("layered contracts are tagged I1 or I2")
        d1, width, d2 = float(d1), float(width), _opt(d2)
        if d1 < 0:
            raise InfeasibleError("constraint 0 <= d1 violated")
        if width < 0:
            raise InfeasibleError("layer width must be >= 0")
        if d2 is not None and d2 < d1 + width:
            raise InfeasibleError("constraint d1 + width <= d2 violated")
        pl = _ramps([(d1, 1.0), (d1 + width, -1.0), (d2, 1.0)])
        width_key = "dI" if family == I1 else "uI"
        return cls(pl, family, {"d1": d1, width_key: width, "d2": d2})

    @classmethod
    def s3(cls, a: float, b: float, c: float, d: float, e: float | None) -> "Indemnity":
        """Three-layer contract on ``[a, b]``, ``[c, d]`` and ``[e, inf)``."""
        e = _opt(e)
        pts = [float(a), float(b), float(c), float(d)] + ([] if e is None else [e])
        if pts[0] < 0 or any(x > y for x, y in zip(pts, pts[1:])):
            raise InfeasibleError("S3 layout must satisfy 0 <= a <= b <= c <= d <= e")
        pl = _ramps([(a, 1.0), (b, -1.0), (c, 1.0), (d, -1.0), (e, 1.0)])
        return cls(pl, S3, {"a": float(a), "b": float(b), "c": float(c), "d": float(d), "e": e})

    @classmethod
    def general(cls, breakpoints: Iterable[tuple[float, float]]) -> "Indemnity":
        """From ``(x, slope-after)`` pairs; the slope before the first pair is 0."""
        pl = PiecewiseLinear.from_breakpoints(breakpoints)
        return cls(pl, GENERAL, {"breakpoints": [[float(k), float(s)] for k, s in zip(pl.knots, pl.slopes)]})

    @classmethod
    def from_pwl(cls, pl: PiecewiseLinear) -> "Indemnity":
        pl = pl.normalize()
        return cls(pl, GENERAL, {"breakpoints": [[float(k), float(s)] for k, s in zip(pl.knots, pl.slopes)]})

    # -- evaluation ---------------------------------------------------------

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < 0):
            raise DomainError("loss must be >= 0")
        return self.pl(x)

    __call__ = evaluate

    def retained(self, x):
        x = np.asarray(x, dtype=float)
        return x - self.evaluate(x)

    def ceded_mean(self, m) -> float:
        return max(self.pl.expectation(m), 0.0)

    @property
    def is_zero(self) -> bool:
        return bool(np.all(self.pl.slopes == 0.0))

    def thresholds(self, p: PremiumParams, m) -> tuple[float, float]:
        """``(x_d, x_u)``: last losses at which ``I`` is still below ``d_I`` and ``u_I``."""
        t = p.thresholds(self.ceded_mean(m))
        if self.is_zero:
            return math.inf, math.inf
        return self.pl.level_sup(t.d_I), self.pl.level_sup(t.u_I)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"family": self.family}
        out.update(self.layout)
        return out

    def __repr__(self) -> str:
        body = ", ".join(f"{k}={v}" for k, v in self.layout.items())
        return f"Indemnity({self.family}: {body})"

    # -- family membership --------------------------------------------------

    def as_layered(self, family: str, p: PremiumParams, m) -> "Indemnity":
        """Re-express a stop-loss contract as a degenerate I1 or I2 layout."""
        if self.family == family:
            return self
        if self.family != STOP_LOSS or self.is_zero:
            raise DomainError(f"cannot re-tag a {self.family} contract as {family}")
        t = p.thresholds(self.ceded_mean(m))
        width = t.d_I if family == I1 else t.u_I
        d = self.layout["d"]
        return Indemnity.layered(family, d, width, d + width)

    def matches_family(self, family: str, p: PremiumParams, m, rtol: float = 1e-8) -> bool:
        """Whether the contract's layer widths agree with the scheme at its own mean."""
        if self.family == STOP_LOSS and family in (STOP_LOSS, I1, I2):
            return True
        if self.family != family:
            return False
        if family in (STOP_LOSS, GENERAL):
            return True
        t = p.thresholds(self.ceded_mean(m))
        scale = max(t.a, 1e-300) * rtol
        lay = self.layout
        if family == I1:
            return abs(lay["dI"] - t.d_I) <= scale
        if family == I2:
            return abs(lay["uI"] - t.u_I) <= scale
        return (
            abs((lay["b"] - lay["a"]) - t.d_I) <= scale
            and abs((lay["d"] - lay["c"]) - (t.u_I - t.d_I)) <= scale
        )


# -- mean-constrained two-layer layouts -------------------------------------


def upper_attachment(m, a, d1, width, tol: float | None = None):
    """``d2`` such that the two-layer contract has expected ceded loss ``a``.

    Vectorized; returns ``inf`` when the first layer already carries the
    whole mean and ``nan`` where the first layer alone exceeds ``a``.
    """
    a = np.asarray(a, dtype=float)
    d1 = np.asarray(d1, dtype=float)
    width = np.asarray(width, dtype=float)
    tol = m.tol if tol is None else tol
    rest = a - m._layer(d1, d1 + width)
    d2 = m._invert_stop_loss(np.maximum(rest, 0.0))
    d2 = np.where(rest <= tol * 1e-2, np.inf, d2)
    d2 = np.maximum(d2, d1 + width)
    return np.where(rest < -tol, np.nan, d2)


def _complete(family: str, m, p: PremiumParams, a: float, d1: float) -> Indemnity:
    if p.is_constant:
        raise DomainError("two-layer families need delta > 0")
    a, d1 = float(a), float(d1)
    mean = m.mean
    if not 0.0 < a <= mean * (1.0 + 1e-12):
        raise InfeasibleError(f"constraint 0 < a <= E[X] violated (a={a}, E[X]={mean})")
    a = min(a, mean)
    d_tilde = float(m._invert_stop_loss(np.array(a)))
    t = p.thresholds(a)
    width = t.d_I if family == I1 else t.u_I
    if d1 < 0.0:
        raise InfeasibleError("constraint d1 >= 0 violated")
    if d1 > d_tilde * (1.0 + 1e-12) + m.tol:
        raise InfeasibleError(f"constraint d1 <= d_tilde violated (d1={d1}, d_tilde={d_tilde})")
    first = float(m._layer(np.array(d1), np.array(d1 + width)))
    if first > a + m.tol:
        raise InfeasibleError(
            f"constraint layer_mean(d1, d1 + width) <= a violated ({first} > {a})"
        )
    d2 = float(upper_attachment(m, a, d1, width))
    if math.isfinite(d2) and abs(d2 - (d1 + width)) <= 1e-9 * max(1.0, d1 + width):
        d2 = d1 + width
    return Indemnity.layered(family, d1, width, None if math.isinf(d2) else d2)


def complete_I1(m, p: PremiumParams, a: float, d1: float) -> Indemnity:
    """I1 contract with first attachment ``d1`` and expected ceded loss ``a``."""
    return _complete(I1, m, p, a, d1)


def complete_I2(m, p: PremiumParams, a: float, d1: float) -> Indemnity:
    """I2 contract with first attachment ``d1`` and expected ceded loss ``a``."""
    return _complete(I2, m, p, a, d1)


def thresholds(I: Indemnity, p: PremiumParams, m) -> tuple[float, float]:
    return I.thresholds(p, m)


def ceded_mean(I: Indemnity, m) -> float:
    return I.ceded_mean(m)


def evaluate(I: Indemnity, x):
    return I.evaluate(x)
