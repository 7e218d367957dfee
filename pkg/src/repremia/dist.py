"""Ground-up loss distributions.

Every other module integrates against three primitives exposed here: the
survival function, the left-continuous quantile and the layer integral
``int_l^u S(x) dx``.  Parametric kinds use closed forms throughout; the
tabulated kind interpolates the survival function linearly between grid
points and continues past the last point with an exponential tail matched
to the final segment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DomainError
from .numerics import bisect_decreasing

PARETO = "pareto"
EXPONENTIAL = "exponential"
TABULATED = "tabulated"


@dataclass(frozen=True, eq=False)
class LossModel:
    """Distribution of a nonnegative loss with finite mean.

    Build instances with :func:`pareto`, :func:`exponential` or
    :func:`tabulated` rather than calling the constructor directly.
    """

    kind: str
    eta: float = math.nan
    zeta: float = math.nan
    mu: float = math.nan
    xs: np.ndarray = field(default=None, repr=False)
    ss: np.ndarray = field(default=None, repr=False)
    # tabulated only: e-folding length of the tail, tail integrals at grid points
    _tail_scale: float = field(default=math.nan, repr=False)
    _cum: np.ndarray = field(default=None, repr=False)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LossModel):
            return NotImplemented
        return self.to_config() == other.to_config()

    def __hash__(self) -> int:
        return hash(repr(self.to_config()))

    # -- basic quantities ---------------------------------------------------

    @property
    def mean(self) -> float:
        return float(self._tail_integral(np.array(0.0)))

    @property
    def ess_sup(self) -> float:
        if self.kind == TABULATED and self.ss[-1] == 0.0:
            return float(self.xs[-1])
        return math.inf

    @property
    def tol(self) -> float:
        """Default absolute money tolerance, ``1e-10 * mean``."""
        return 1e-10 * self.mean

    def to_config(self) -> dict[str, Any]:
        if self.kind == PARETO:
            return {"kind": PARETO, "eta": self.eta, "zeta": self.zeta}
        if self.kind == EXPONENTIAL:
            return {"kind": EXPONENTIAL, "mu": self.mu}
        return {
            "kind": TABULATED,
            "points": [[float(x), float(s)] for x, s in zip(self.xs, self.ss)],
        }

    # -- survival / quantile ------------------------------------------------

    def survival(self, x):
        """``P(X > x)``; raises :class:`DomainError` for negative ``x``."""
        x = np.asarray(x, dtype=float)
        if np.any(x < 0):
            raise DomainError("survival is defined for x >= 0")
        return _scalar_or_array(self._survival(x))

    def _survival(self, x: np.ndarray) -> np.ndarray:
        if self.kind == PARETO:
            return (self.eta / (x + self.eta)) ** self.zeta
        if self.kind == EXPONENTIAL:
            return np.exp(-x / self.mu)
        xs, ss = self.xs, self.ss
        inner = np.interp(x, xs, ss)
        if ss[-1] == 0.0:
            return inner
        with np.errstate(over="ignore"):
            tail = ss[-1] * np.exp(-(x - xs[-1]) / self._tail_scale)
        return np.where(x <= xs[-1], inner, tail)

    def log_survival(self, x):
        """``log S(x)``, finite far into the tail for parametric kinds."""
        x = np.asarray(x, dtype=float)
        if self.kind == PARETO:
            out = self.zeta * (np.log(self.eta) - np.log(x + self.eta))
        elif self.kind == EXPONENTIAL:
            out = -x / self.mu
        else:
            xs, ss = self.xs, self.ss
            with np.errstate(divide="ignore"):
                inner = np.log(np.interp(x, xs, ss))
            if ss[-1] == 0.0:
                out = inner
            else:
                tail = np.log(ss[-1]) - (x - xs[-1]) / self._tail_scale
                out = np.where(x <= xs[-1], inner, tail)
        return _scalar_or_array(out)

    def cdf(self, x):
        return _scalar_or_array(1.0 - self._survival(np.asarray(x, dtype=float)))

    def quantile(self, p):
        """Left-continuous inverse of the distribution function on (0, 1)."""
        p = np.asarray(p, dtype=float)
        if np.any((p <= 0.0) | (p >= 1.0)):
            raise DomainError("quantile level must lie in the open interval (0, 1)")
        return _scalar_or_array(self._quantile(p))

    def _quantile(self, p: np.ndarray) -> np.ndarray:
        """Quantile extended to p in [0, 1) with quantile(0) = 0."""
        s = 1.0 - p
        if self.kind == PARETO:
            return np.maximum(self.eta * (s ** (-1.0 / self.zeta) - 1.0), 0.0)
        if self.kind == EXPONENTIAL:
            with np.errstate(divide="ignore"):
                return np.maximum(-self.mu * np.log(s), 0.0)
        xs, ss = self.xs, self.ss
        inner = np.interp(s, ss[::-1], xs[::-1])
        if ss[-1] == 0.0:
            return inner
        with np.errstate(divide="ignore"):
            tail = xs[-1] + self._tail_scale * np.log(ss[-1] / s)
        return np.where(s >= ss[-1], inner, tail)

    def upper_quantile(self, tail_prob: float) -> float:
        """The point ``v`` with ``S(v) = tail_prob``; 0 when ``tail_prob >= 1``."""
        if tail_prob >= 1.0:
            return 0.0
        if tail_prob <= 0.0:
            return self.ess_sup
        return float(self._quantile(np.array(1.0 - tail_prob)))

    # -- integrals ----------------------------------------------------------

    def _tail_integral(self, x: np.ndarray) -> np.ndarray:
        """``int_x^inf S(t) dt`` for x >= 0 (inf maps to 0)."""
        x = np.asarray(x, dtype=float)
        if self.kind == PARETO:
            eta, zeta = self.eta, self.zeta
            with np.errstate(divide="ignore", over="ignore"):
                return np.where(
                    np.isinf(x),
                    0.0,
                    eta**zeta * (x + eta) ** (1.0 - zeta) / (zeta - 1.0),
                )
        if self.kind == EXPONENTIAL:
            return self.mu * np.exp(-x / self.mu)
        xs, ss, cum = self.xs, self.ss, self._cum
        xc = np.minimum(x, xs[-1])
        j = np.clip(np.searchsorted(xs, xc, side="right") - 1, 0, len(xs) - 2)
        s_at = np.interp(xc, xs, ss)
        inner = (xs[j + 1] - xc) * (s_at + ss[j + 1]) / 2.0 + cum[j + 1]
        if ss[-1] == 0.0:
            return np.where(x >= xs[-1], 0.0, inner)
        lam = self._tail_scale
        with np.errstate(over="ignore", invalid="ignore"):
            tail = np.where(
                np.isinf(x), 0.0, ss[-1] * lam * np.exp(-(x - xs[-1]) / lam)
            )
        return np.where(x <= xs[-1], inner, tail)

    def layer_mean(self, lo, hi):
        """``int_lo^hi S(x) dx``, the expected loss in the layer ``[lo, hi]``."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if np.any(lo < 0):
            raise DomainError("layer lower bound must be >= 0")
        if np.any(lo > hi):
            raise DomainError("layer bounds must satisfy lo <= hi")
        return _scalar_or_array(self._layer(lo, hi))

    def _layer(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """Unchecked layer integral; empty when hi <= lo."""
        hi = np.maximum(hi, lo)
        out = self._tail_integral(lo) - self._tail_integral(hi)
        return np.maximum(out, 0.0)

    def stop_loss(self, d):
        """``E[(X - d)_+]``."""
        d = np.asarray(d, dtype=float)
        if np.any(d < 0):
            raise DomainError("deductible must be >= 0")
        return _scalar_or_array(self._tail_integral(d))

    def invert_stop_loss(self, a):
        """Deductible ``d`` with ``E[(X - d)_+] = a`` for ``0 < a <= mean``."""
        a = np.asarray(a, dtype=float)
        mean = self.mean
        if np.any(a <= 0.0) or np.any(a > mean * (1.0 + 1e-12)):
            raise DomainError("stop-loss target must lie in (0, mean]")
        return _scalar_or_array(self._invert_stop_loss(np.minimum(a, mean)))

    def _invert_stop_loss(self, a: np.ndarray) -> np.ndarray:
        """Unchecked inverse; a <= 0 maps to the upper end of the support."""
        a = np.asarray(a, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.kind == PARETO:
                eta, zeta = self.eta, self.zeta
                d = (a * (zeta - 1.0) / eta**zeta) ** (1.0 / (1.0 - zeta)) - eta
            elif self.kind == EXPONENTIAL:
                d = self.mu * np.log(self.mu / a)
            else:
                d = self._invert_tabulated(a)
        d = np.where(a <= 0.0, self.ess_sup, d)
        return np.maximum(d, 0.0)

    def _invert_tabulated(self, a: np.ndarray) -> np.ndarray:
        xs, ss = self.xs, self.ss
        shape = np.shape(a)
        a = np.atleast_1d(a).astype(float)
        out = np.empty_like(a)
        tail_mass = float(self._tail_integral(np.array(xs[-1])))
        in_tail = a <= tail_mass
        if ss[-1] > 0.0 and np.any(in_tail):
            lam = self._tail_scale
            with np.errstate(divide="ignore"):
                out[in_tail] = xs[-1] + lam * np.log(tail_mass / a[in_tail])
        body = ~in_tail if ss[-1] > 0.0 else np.ones_like(a, dtype=bool)
        if np.any(body):
            target = a[body]
            out[body] = bisect_decreasing(
                lambda d: self._tail_integral(d) - target,
                np.zeros_like(target),
                np.full_like(target, xs[-1]),
            )
        return out.reshape(shape)

    # -- sampling -----------------------------------------------------------

    def sample(self, n: int, seed: int | None = None) -> np.ndarray:
        """``n`` i.i.d. draws by inverse transform; reproducible for a fixed seed."""
        if n < 1:
            raise DomainError("sample size must be >= 1")
        rng = np.random.default_rng(seed)
        u = rng.random(int(n))
        return self._quantile(u)


def pareto(eta: float, zeta: float) -> LossModel:
    """Type-II Pareto with ``S(x) = (eta / (x + eta)) ** zeta``."""
    eta, zeta = float(eta), float(zeta)
    if not eta > 0:
        raise DomainError("Pareto scale eta must be > 0")
    if not zeta > 1:
        raise DomainError("Pareto shape zeta must be > 1 for a finite mean")
    return LossModel(PARETO, eta=eta, zeta=zeta)


def exponential(mu: float) -> LossModel:
    """Exponential with mean ``mu``."""
    mu = float(mu)
    if not mu > 0:
        raise DomainError("exponential mean mu must be > 0")
    return LossModel(EXPONENTIAL, mu=mu)


def tabulated(points: Sequence[Sequence[float]]) -> LossModel:
    """Survival function given on a grid of ``(x, S(x))`` pairs.

    The grid must start at ``(0, 1)`` with strictly increasing ``x`` and
    strictly decreasing ``S``.  A final ``S = 0`` gives a bounded loss;
    otherwise the tail decays exponentially from the last point.
    """
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 2:
        raise DomainError("tabulated survival needs at least two (x, S) pairs")
    xs, ss = arr[:, 0].copy(), arr[:, 1].copy()
    if xs[0] != 0.0 or ss[0] != 1.0:
        raise DomainError("tabulated survival must start at (0, 1)")
    if np.any(np.diff(xs) <= 0):
        raise DomainError("tabulated x grid must be strictly increasing")
    if np.any(np.diff(ss) >= 0):
        raise DomainError("tabulated survival must be strictly decreasing")
    if ss[-1] < 0:
        raise DomainError("survival values must be >= 0")
    if ss[-1] > 0:
        lam = (xs[-1] - xs[-2]) / math.log(ss[-2] / ss[-1])
        tail = ss[-1] * lam
    else:
        lam = math.nan
        tail = 0.0
    seg = np.diff(xs) * (ss[:-1] + ss[1:]) / 2.0
    cum = np.empty_like(xs)
    cum[-1] = tail
    cum[:-1] = tail + np.cumsum(seg[::-1])[::-1]
    xs.setflags(write=False)
    ss.setflags(write=False)
    cum.setflags(write=False)
    return LossModel(TABULATED, xs=xs, ss=ss, _tail_scale=lam, _cum=cum)


def from_config(spec: Mapping[str, Any]) -> LossModel:
    """Build a model from its scenario-file block (strict keys)."""
    if not isinstance(spec, Mapping) or "kind" not in spec:
        raise ConfigError("loss: expected an object with a 'kind' key")
    kind = spec["kind"]
    allowed = {
        PARETO: {"kind", "eta", "zeta"},
        EXPONENTIAL: {"kind", "mu"},
        TABULATED: {"kind", "points"},
    }
    if kind not in allowed:
        raise ConfigError(f"loss.kind: unknown distribution {kind!r}")
    extra = set(spec) - allowed[kind]
    if extra:
        raise ConfigError(f"loss.{sorted(extra)[0]}: unknown key for kind {kind!r}")
    missing = allowed[kind] - set(spec)
    if missing:
        raise ConfigError(f"loss.{sorted(missing)[0]}: required key missing")
    try:
        if kind == PARETO:
            return pareto(spec["eta"], spec["zeta"])
        if kind == EXPONENTIAL:
            return exponential(spec["mu"])
        return tabulated(spec["points"])
    except (DomainError, TypeError, ValueError) as exc:
        raise ConfigError(f"loss: {exc}") from exc


def _scalar_or_array(x: np.ndarray):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x
