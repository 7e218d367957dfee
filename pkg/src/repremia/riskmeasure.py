"""Distortion risk measures of nondecreasing piecewise-linear positions.

For a position ``Z = t(X)`` with ``t`` nondecreasing and piecewise linear,
comonotonic additivity gives

    rho_g(Z) = t(0) + sum_k slope_k * int_{x_k}^{x_{k+1}} g(S_X(x)) dx,

so everything reduces to the distorted layer integral :func:`integral`.
TVaR and VaR integrals are exact for every loss model, power distortions
are exact for the parametric models, and piecewise-linear custom tables
are exact for every model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
from scipy import integrate

from .errors import ConfigError, DomainError
from .premium import PremiumParams
from .pwl import PiecewiseLinear

TVAR, VAR, POWER, CUSTOM = "tvar", "var", "power", "custom"


@dataclass(frozen=True, eq=False)
class Distortion:
    """Distortion function ``g`` on ``[0, 1]`` with ``g(0) = 0`` and ``g(1) = 1``."""

    kind: str
    level: float = math.nan
    ps: np.ndarray = field(default=None, repr=False)
    gs: np.ndarray = field(default=None, repr=False)

    def __eq__(self, other):
        if not isinstance(other, Distortion):
            return NotImplemented
        return self.to_config() == other.to_config()

    def __hash__(self):
        return hash(repr(self.to_config()))

    @classmethod
    def tvar(cls, alpha: float) -> "Distortion":
        alpha = float(alpha)
        if not 0.0 < alpha <= 1.0:
            raise DomainError("TVaR level must lie in (0, 1]")
        return cls(TVAR, alpha)

    @classmethod
    def var(cls, alpha: float) -> "Distortion":
        alpha = float(alpha)
        if not 0.0 < alpha < 1.0:
            raise DomainError("VaR level must lie in (0, 1)")
        return cls(VAR, alpha)

    @classmethod
    def power(cls, beta: float) -> "Distortion":
        beta = float(beta)
        if not 0.0 < beta <= 1.0:
            raise DomainError("power exponent must lie in (0, 1]")
        return cls(POWER, beta)

    @classmethod
    def custom(cls, points: Sequence[Sequence[float]]) -> "Distortion":
        """Piecewise-linear ``g`` through ``(p, g(p))`` points from (0, 0) to (1, 1)."""
        arr = np.asarray(points, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 2:
            raise DomainError("custom distortion needs at least two (p, g) pairs")
        ps, gs = arr[:, 0].copy(), arr[:, 1].copy()
        if ps[0] != 0.0 or gs[0] != 0.0 or ps[-1] != 1.0 or gs[-1] != 1.0:
            raise DomainError("custom distortion must run from (0, 0) to (1, 1)")
        if np.any(np.diff(ps) <= 0):
            raise DomainError("custom distortion p grid must be strictly increasing")
        if np.any(np.diff(gs) < 0):
            raise DomainError("custom distortion must be nondecreasing")
        ps.setflags(write=False)
        gs.setflags(write=False)
        return cls(CUSTOM, math.nan, ps, gs)

    @classmethod
    def from_config(cls, spec: Mapping[str, Any], where: str = "distortion") -> "Distortion":
        if not isinstance(spec, Mapping) or "kind" not in spec:
            raise ConfigError(f"{where}: expected an object with a 'kind' key")
        kind = spec["kind"]
        allowed = {TVAR: "alpha", VAR: "alpha", POWER: "beta", CUSTOM: "points"}
        if kind not in allowed:
            raise ConfigError(f"{where}.kind: unknown distortion {kind!r}")
        key = allowed[kind]
        extra = set(spec) - {"kind", key}
        if extra:
            raise ConfigError(f"{where}.{sorted(extra)[0]}: unknown key for kind {kind!r}")
        if key not in spec:
            raise ConfigError(f"{where}.{key}: required key missing")
        try:
            return getattr(cls, kind)(spec[key])
        except (DomainError, TypeError, ValueError) as exc:
            raise ConfigError(f"{where}: {exc}") from exc

    def to_config(self) -> dict[str, Any]:
        if self.kind == CUSTOM:
            return {"kind": CUSTOM, "points": [[float(p), float(g)] for p, g in zip(self.ps, self.gs)]}
        key = "beta" if self.kind == POWER else "alpha"
        return {"kind": self.kind, key: self.level}

    @property
    def concave(self) -> bool:
        if self.kind in (TVAR, POWER):
            return True
        if self.kind == VAR:
            return False
        # slopes of a piecewise-linear g must be nonincreasing
        k = np.diff(self.gs) / np.diff(self.ps)
        return bool(np.all(np.diff(k) <= 1e-12))

    def __call__(self, p):
        return g_eval(self, p)

    def __str__(self) -> str:
        if self.kind == CUSTOM:
            return f"custom[{len(self.ps)} pts]"
        return f"{self.kind}({self.level:g})"


def g_eval(d: Distortion, p):
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise DomainError("distortion argument must lie in [0, 1]")
    if d.kind == TVAR:
        out = np.minimum(p / d.level, 1.0)
    elif d.kind == VAR:
        out = np.where(p > d.level, 1.0, 0.0)
    elif d.kind == POWER:
        out = p**d.level
    else:
        out = np.interp(p, d.ps, d.gs)
    return float(out) if out.ndim == 0 else out


# -- distorted layer integrals ------------------------------------------------


def integral(d: Distortion, m, lo, hi):
    """``int_lo^hi g(S_X(x)) dx``, vectorized over the bounds."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    lo, hi = np.broadcast_arrays(lo, hi)
    hi = np.maximum(hi, lo)
    if d.kind in (TVAR, VAR):
        v = m.upper_quantile(d.level) if not (d.kind == TVAR and d.level >= 1.0) else 0.0
        flat = np.maximum(np.minimum(hi, v) - lo, 0.0)
        if d.kind == VAR:
            out = flat
        else:
            out = flat + m._layer(np.maximum(lo, v), hi) / d.level
    elif d.kind == POWER:
        out = _power_integral(d.level, m, lo, hi)
    else:
        out = _custom_integral(d, m, lo, hi)
    return float(out) if np.ndim(out) == 0 else out


def _power_integral(beta: float, m, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    if beta == 1.0:
        return m._layer(lo, hi)
    if m.kind == "exponential":
        mu = m.mu / beta
        return mu * (np.exp(-lo / mu) - np.exp(-hi / mu))
    if m.kind == "pareto":
        eta, k = m.eta, m.zeta * beta
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            if k > 1.0:
                f = lambda x: np.where(np.isinf(x), 0.0, eta**k * (x + eta) ** (1.0 - k) / (k - 1.0))
                return np.maximum(f(lo) - f(hi), 0.0)
            if k == 1.0:
                out = eta * (np.log(hi + eta) - np.log(lo + eta))
            else:
                out = eta**k * ((hi + eta) ** (1.0 - k) - (lo + eta) ** (1.0 - k)) / (1.0 - k)
        return np.where(hi == lo, 0.0, out)
    return _quad_integral(lambda x: m._survival(np.asarray(x)) ** beta, m, lo, hi, beta)


def _quad_integral(fun, m, lo: np.ndarray, hi: np.ndarray, beta: float) -> np.ndarray:
    """Adaptive quadrature on the tabulated grid plus an exact exponential tail."""
    xs, ss, lam = m.xs, m.ss, m._tail_scale
    x_end = xs[-1]
    atol = 1e-12 * m.mean
    out = np.zeros(lo.shape)
    for idx in np.ndindex(lo.shape):
        l, u = float(lo[idx]), float(hi[idx])
        total = 0.0
        ub = min(u, x_end)
        if ub > l:
            pts = [x for x in xs if l < x < ub]
            val, _ = integrate.quad(fun, l, ub, points=pts or None, epsabs=atol, limit=200)
            total += val
        if u > x_end and ss[-1] > 0.0:
            a = max(l, x_end)
            scale = lam / beta
            head = ss[-1] ** beta * scale
            total += head * (math.exp(-(a - x_end) / scale) - (0.0 if math.isinf(u) else math.exp(-(u - x_end) / scale)))
        out[idx] = total
    return out


def _custom_integral(d: Distortion, m, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    # on {x : p_j <= S(x) <= p_{j+1}} the integrand is affine in S
    ps, gs = d.ps, d.gs
    k = np.diff(gs) / np.diff(ps)
    qs = np.array([m.upper_quantile(p) for p in ps])  # decreasing in p
    out = np.zeros(lo.shape)
    for j in range(len(ps) - 1):
        x_lo = np.maximum(lo, qs[j + 1])
        x_hi = np.minimum(hi, qs[j])
        length = np.where(x_hi > x_lo, x_hi - x_lo, 0.0)
        c = gs[j] - k[j] * ps[j]
        base = c * length if c != 0.0 else 0.0
        layer = m._layer(x_lo, np.maximum(x_hi, x_lo))
        out += base + k[j] * layer
    return out


# -- risk of positions --------------------------------------------------------


def rho_monotone_transform(d: Distortion, m, t: PiecewiseLinear) -> float:
    """``rho_g(t(X))`` for a nondecreasing piecewise-linear ``t``."""
    if not t.is_nondecreasing:
        raise DomainError("position transform must be nondecreasing")
    total = t.intercept
    for lo, hi, s in t.segments():
        if s != 0.0:
            total += s * integral(d, m, lo, hi)
    return total


def rho_loss(d: Distortion, m) -> float:
    """``rho_g(X)``, the value with no reinsurance."""
    return integral(d, m, 0.0, math.inf)


def _check_layout(p: PremiumParams, a, d1, d2, width):
    if p.is_constant:
        raise DomainError("two-layer families need delta > 0")
    if np.any(np.asarray(a) < 0) or np.any(np.asarray(d1) < 0):
        raise DomainError("layout requires a >= 0 and d1 >= 0")
    if np.any(np.asarray(d2) < np.asarray(d1) + width - 1e-9 * (1.0 + np.asarray(d2))):
        raise DomainError("layout requires d2 >= d1 + first-layer width")


def rho_T_I1_closed(d: Distortion, m, p: PremiumParams, a, d1, d2):
    """Insurer risk for an I1 contract; ``d2 = inf`` (or None) means no upper layer."""
    a = np.asarray(a, dtype=float)
    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(np.inf if d2 is None else d2, dtype=float)
    dI, uI = p.floor_ratio * a, p.cap_ratio * a
    _check_layout(p, a, d1, d2, dI)
    out = (
        integral(d, m, 0.0, d1)
        + integral(d, m, d1 + dI, d2)
        + p.delta * integral(d, m, d2, d2 + (uI - dI))
        + (1.0 + p.theta1) * a
    )
    return float(out) if np.ndim(out) == 0 else out


def rho_T_I2_closed(d: Distortion, m, p: PremiumParams, a, d1, d2):
    """Insurer risk for an I2 contract under a concave distortion."""
    if not d.concave:
        raise DomainError("the I2 closed form is stated for concave distortions only")
    a = np.asarray(a, dtype=float)
    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(np.inf if d2 is None else d2, dtype=float)
    dI, uI = p.floor_ratio * a, p.cap_ratio * a
    _check_layout(p, a, d1, d2, uI)
    out = (
        integral(d, m, 0.0, d1)
        + integral(d, m, d1 + uI, d2)
        + p.delta * integral(d, m, d1 + dI, d1 + uI)
        + (1.0 + p.theta1) * a
    )
    return float(out) if np.ndim(out) == 0 else out
