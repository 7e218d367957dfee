"""Reward-and-penalty variable premium.

The realized premium on a ceded amount ``y`` is the benchmark
``(1 + theta0) a + delta (y - a)`` clamped between a floor ``(1 + theta1) a``
and a cap ``(1 + theta2) a``, where ``a`` is the expected ceded loss.  The
floor binds for ``y <= d_I`` and the cap for ``y >= u_I``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Mapping

import numpy as np

from .errors import ConfigError, DomainError
from .pwl import PiecewiseLinear

FLOOR, BAND, CAP, CONSTANT = "floor", "band", "cap", "constant"

# slack for loadings computed as theta0 - delta in floating point
_LOADING_SLACK = 1e-12


@dataclass(frozen=True)
class PremiumParams:
    """Scheme slope ``delta`` and loadings ``theta0``, ``theta1``, ``theta2``."""

    delta: float
    theta0: float
    theta1: float
    theta2: float

    def __post_init__(self):
        d, t0, t1, t2 = (float(v) for v in (self.delta, self.theta0, self.theta1, self.theta2))
        for name, v in (("delta", d), ("theta0", t0), ("theta1", t1), ("theta2", t2)):
            if not math.isfinite(v):
                raise DomainError(f"{name} must be finite")
        if not 0.0 <= d <= 1.0:
            raise DomainError(f"delta must lie in [0, 1], got {d}")
        if min(t0, t1, t2) < 0.0:
            raise DomainError("loadings must be >= 0")
        if t1 < max(t0 - d, 0.0) - _LOADING_SLACK:
            raise DomainError(f"theta1={t1} below the lower bound max(theta0 - delta, 0)")
        if t1 > t0:
            raise DomainError(f"theta1={t1} exceeds theta0={t0}")
        if not t0 < t2:
            raise DomainError(f"theta2={t2} must exceed theta0={t0}")
        if d == 0.0 and t1 != t0:
            raise DomainError("delta = 0 requires theta1 == theta0 (constant premium)")

    @property
    def is_constant(self) -> bool:
        return self.delta == 0.0

    @property
    def floor_ratio(self) -> float:
        """``d_I / a``; zero exactly when ``theta1 = theta0 - delta``."""
        if self.is_constant:
            return math.inf
        num = self.theta1 - self.theta0 + self.delta
        if self.theta1 == self.theta0 - self.delta or num <= 0.0:
            return 0.0
        return num / self.delta

    @property
    def cap_ratio(self) -> float:
        """``u_I / a``."""
        if self.is_constant:
            return math.inf
        return (self.theta2 - self.theta0 + self.delta) / self.delta

    def thresholds(self, a: float) -> "SchemeThresholds":
        return SchemeThresholds.from_mean(self, a)

    def to_config(self) -> dict[str, float]:
        return {
            "delta": self.delta,
            "theta0": self.theta0,
            "theta1": self.theta1,
            "theta2": self.theta2,
        }

    @classmethod
    def from_config(cls, spec: Mapping[str, Any]) -> "PremiumParams":
        keys = {"delta", "theta0", "theta1", "theta2"}
        extra = set(spec) - keys
        if extra:
            raise ConfigError(f"premium.{sorted(extra)[0]}: unknown key")
        missing = keys - set(spec)
        if missing:
            raise ConfigError(f"premium.{sorted(missing)[0]}: required key missing")
        try:
            return cls(*(float(spec[k]) for k in ("delta", "theta0", "theta1", "theta2")))
        except (DomainError, TypeError, ValueError) as exc:
            raise ConfigError(f"premium: {exc}") from exc


@dataclass(frozen=True)
class SchemeThresholds:
    """Levels of the scheme for a contract with expected ceded loss ``a``.

    Under the constant scheme (``delta = 0``) both levels are infinite and
    the floor and cap coincide with the benchmark ``(1 + theta0) a``.
    """

    a: float
    d_I: float
    u_I: float
    floor: float
    cap: float
    benchmark: float
    delta: float

    @classmethod
    def from_mean(cls, p: PremiumParams, a: float) -> "SchemeThresholds":
        a = float(a)
        if a < 0:
            raise DomainError("expected ceded loss must be >= 0")
        bench = (1.0 + p.theta0) * a
        if p.is_constant:
            return cls(a, math.inf, math.inf, bench, bench, bench, 0.0)
        if a == 0.0:
            return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, p.delta)
        return cls(
            a,
            p.floor_ratio * a,
            p.cap_ratio * a,
            (1.0 + p.theta1) * a,
            (1.0 + p.theta2) * a,
            bench,
            p.delta,
        )


def realized_premium(p: PremiumParams, t: SchemeThresholds, y):
    """Premium charged when the realized ceded amount is ``y``."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise DomainError("ceded amount must be >= 0")
    if p.is_constant:
        out = np.full_like(y, t.benchmark)
    else:
        out = np.clip(t.benchmark + p.delta * (y - t.a), t.floor, t.cap)
    return float(out) if out.ndim == 0 else out


def premium_branch(p: PremiumParams, t: SchemeThresholds, y):
    """Which piece of the scheme applies at ``y``: floor, band, cap or constant."""
    y = np.asarray(y, dtype=float)
    if p.is_constant:
        out = np.full(y.shape, CONSTANT, dtype=object)
    else:
        out = np.where(y <= t.d_I, FLOOR, np.where(y >= t.u_I, CAP, BAND)).astype(object)
    return out.item() if out.ndim == 0 else out


# -- positions as piecewise-linear maps of the loss -------------------------


def _as_pwl(I) -> PiecewiseLinear:
    return I.pl if hasattr(I, "pl") else I


def premium_transform(p: PremiumParams, I, m) -> PiecewiseLinear:
    """``x -> Pi(I(x))`` as an exact piecewise-linear map."""
    f = _as_pwl(I)
    t = p.thresholds(f.expectation(m))
    if p.is_constant or t.a == 0.0:
        return PiecewiseLinear.constant(t.benchmark)
    return f.clamp_affine(t.benchmark - p.delta * t.a, p.delta, t.floor, t.cap)


def insurer_total_transform(p: PremiumParams, I, m) -> PiecewiseLinear:
    """``T_I(x) = x - I(x) + Pi(I(x))``."""
    f = _as_pwl(I)
    return (PiecewiseLinear.identity() - f + premium_transform(p, f, m)).normalize()


def reinsurer_net_transform(p: PremiumParams, I, m) -> PiecewiseLinear:
    """``N_I(x) = I(x) - Pi(I(x))``."""
    f = _as_pwl(I)
    return (f - premium_transform(p, f, m)).normalize()


def insurer_total(p: PremiumParams, t: SchemeThresholds, I, x):
    f = _as_pwl(I)
    x = np.asarray(x, dtype=float)
    y = f(x)
    return x - y + realized_premium(p, t, y)


def reinsurer_net(p: PremiumParams, t: SchemeThresholds, I, x):
    f = _as_pwl(I)
    y = f(np.asarray(x, dtype=float))
    return y - realized_premium(p, t, y)


def premium_survival(p: PremiumParams, t: SchemeThresholds, I, m) -> Callable:
    """Survival function ``z -> P(Pi_I(X) > z)`` for two-layer and stop-loss contracts.

    Inside ``[floor, cap)`` the premium moves with slope ``delta`` along a
    slope-one stretch of the indemnity that starts at ``x_d``, so the
    survival is ``S_X(x_d + (z - floor) / delta)``.
    """
    family = getattr(I, "family", None)
    if family not in ("StopLoss", "I1", "I2"):
        raise DomainError(
            f"closed-form premium survival needs a StopLoss/I1/I2 contract, got {family}; "
            "use the Monte Carlo estimator instead"
        )
    f = _as_pwl(I)
    if p.is_constant or t.a == 0.0:
        level = t.benchmark

        def constant(z):
            z = np.asarray(z, dtype=float)
            out = np.where(z < level, 1.0, 0.0)
            return float(out) if out.ndim == 0 else out

        return constant
    x_d = f.level_sup(t.d_I)

    def survival(z):
        z = np.asarray(z, dtype=float)
        x = x_d + (np.clip(z, t.floor, t.cap) - t.floor) / p.delta
        inner = m._survival(np.maximum(x, 0.0))
        out = np.where(z < t.floor, 1.0, np.where(z >= t.cap, 0.0, inner))
        return float(out) if out.ndim == 0 else out

    return survival


def expected_premium(p: PremiumParams, t: SchemeThresholds, I, m) -> float:
    """``E[Pi_I(X)]`` by exact piecewise integration."""
    if t.a == 0.0:
        return 0.0
    if p.is_constant:
        return t.benchmark
    return premium_transform(p, I, m).expectation(m)
