"""The insurer's optimal contract under the variable premium.

For a fixed expected ceded loss ``a`` the search reduces to the single
attachment ``d1`` of an I1 contract (the upper attachment ``d2`` is pinned
by the mean constraint).  Under TVaR the optimal ``d1`` is the root of
the first-order function :func:`H`; for other concave distortions the
one-dimensional objective is scanned and refined.  The outer search over
``a`` uses a uniform grid followed by golden-section refinement.

All inner solvers work on whole arrays of ``a`` at once.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import DomainError, SingularityError
from .indemnity import I1, I2, Indemnity, upper_attachment
from .numerics import bisect, golden_min
from .premium import PremiumParams
from .riskmeasure import TVAR, Distortion, integral, rho_loss, rho_T_I1_closed, rho_T_I2_closed

log = logging.getLogger(__name__)

TWO_LAYER, STOP_LOSS, NO_TRADE = "TwoLayer", "StopLoss", "NoTrade"
RATIO_GRID = 200


@dataclass
class InnerSolution:
    """Best I1 contract among those with expected ceded loss ``a``."""

    a: float
    d1: float
    d2: float | None
    value: float
    branch: str
    d_tilde: float
    d1_bar: float = math.nan
    h_residual: float = math.nan
    ratio_ok: bool | None = None
    method: str = "tvar-root"
    warnings: list[str] = field(default_factory=list)

    def indemnity(self, p: PremiumParams) -> Indemnity:
        if self.branch == NO_TRADE:
            return Indemnity.zero()
        if self.branch == STOP_LOSS:
            return Indemnity.stop_loss(self.d_tilde)
        return Indemnity.layered(I1, self.d1, p.floor_ratio * self.a, self.d2)


@dataclass
class SolveReport:
    """Outcome of the insurer's problem at one premium scheme."""

    indemnity: Indemnity
    a_star: float
    value: float
    inner: InnerSolution
    no_trade_value: float
    trace: list[tuple[float, float, float, float, str]]
    settings: dict[str, Any]
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "indemnity": self.indemnity.to_dict(),
            "a_star": self.a_star,
            "value": self.value,
            "branch": self.inner.branch,
            "d1": self.inner.d1,
            "d2": self.inner.d2,
            "d_tilde": self.inner.d_tilde,
            "no_trade_value": self.no_trade_value,
            "settings": self.settings,
            "warnings": list(self.warnings),
        }

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["a", "d1", "d2", "value", "branch"])
        for a, d1, d2, v, b in self.trace:
            w.writerow([_fmt(a), _fmt(d1), _fmt(d2), _fmt(v), b])
        return buf.getvalue()


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isinf(x)):
        return "inf"
    return format(float(x), ".12g")


# -- objective pieces ---------------------------------------------------------


def _i1_value(g: Distortion, m, p: PremiumParams, a, d1):
    """Insurer risk and ``d2`` of the I1 contract with mean ``a`` and attachment ``d1``."""
    a = np.asarray(a, dtype=float)
    d1 = np.asarray(d1, dtype=float)
    dI = p.floor_ratio * a
    d2 = upper_attachment(m, a, d1, dI)
    return rho_T_I1_closed(g, m, p, a, d1, d2), d2


def _i2_value(g: Distortion, m, p: PremiumParams, a, d1):
    a = np.asarray(a, dtype=float)
    d1 = np.asarray(d1, dtype=float)
    uI = p.cap_ratio * a
    d2 = upper_attachment(m, a, d1, uI)
    return rho_T_I2_closed(g, m, p, a, d1, d2), d2


def stop_loss_value(g: Distortion, m, p: PremiumParams, a):
    """Insurer risk of the stop-loss contract with mean ``a`` (vectorized)."""
    a = np.asarray(a, dtype=float)
    d = m._invert_stop_loss(a)
    if p.is_constant:
        out = integral(g, m, 0.0, d) + (1.0 + p.theta0) * a
    else:
        dI, uI = p.floor_ratio * a, p.cap_ratio * a
        out = integral(g, m, 0.0, d) + p.delta * integral(g, m, d + dI, d + uI) + (1.0 + p.theta1) * a
    out = np.where(a > 0, out, rho_loss(g, m))
    return float(out) if np.ndim(out) == 0 else out


def _h_batch(m, p: PremiumParams, alpha: float, a, d1):
    """First-order function for TVaR; ``d2`` is taken from the mean constraint."""
    a = np.asarray(a, dtype=float)
    d1 = np.asarray(d1, dtype=float)
    dI, uI = p.floor_ratio * a, p.cap_ratio * a
    s1 = m._survival(d1)
    s2 = m._survival(d1 + dI)
    den = s1 - s2
    if np.any(den <= 0.0):
        raise SingularityError("S(d1) - S(d1 + d_I) vanishes; H is undefined")
    d2 = upper_attachment(m, a, d1, dI)
    d2 = np.where(np.isinf(d2), np.finfo(float).max / 4, d2)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.exp(m.log_survival(d2 + uI - dI) - m.log_survival(d2))
    ratio = np.where(m._survival(d2) > 0.0, ratio, 0.0)
    return (alpha - s2) / den - p.delta * ratio + p.delta - 1.0


def H(m, p: PremiumParams, alpha: float, a: float, d1: float) -> float:
    """First-order condition of the TVaR inner problem at attachment ``d1``."""
    if p.is_constant or p.floor_ratio == 0.0:
        raise SingularityError("H needs d_I > 0 (delta > 0 and theta1 > theta0 - delta)")
    return float(_h_batch(m, p, alpha, a, d1))


def ratio_condition(m, p: PremiumParams, a, upper, n: int = RATIO_GRID) -> np.ndarray:
    """Whether ``S(d + u_I - d_I) / S(d)`` is nondecreasing on ``[0, upper]`` (per ``a``)."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    w = (p.cap_ratio - p.floor_ratio) * a
    grid = np.linspace(0.0, 1.0, n)[None, :] * np.atleast_1d(upper)[:, None]
    s = m._survival(grid)
    valid = m._survival(grid + w[:, None]) > 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        lr = m.log_survival(grid + w[:, None]) - m.log_survival(grid)
    lr = np.where(valid & (s > 0), lr, np.nan)
    steps = np.diff(lr, axis=1)
    slack = 1e-12 * (1.0 + np.nanmax(np.abs(lr), axis=1, initial=0.0))
    bad = np.nan_to_num(steps, nan=0.0) < -slack[:, None]
    return ~bad.any(axis=1)


# -- inner solvers ------------------------------------------------------------


def _stop_loss_batch(g, m, p, a, d_tilde, method):
    dI = p.floor_ratio * a if not p.is_constant else np.zeros_like(a)
    value = np.asarray(stop_loss_value(g, m, p, a), dtype=float)
    return {
        "d1": d_tilde.copy(),
        "d2": d_tilde + dI,
        "value": value,
        "stop": np.ones(a.shape, dtype=bool),
        "d1_bar": np.full(a.shape, math.nan),
        "h": np.full(a.shape, math.nan),
        "ratio_ok": np.full(a.shape, True),
        "method": np.full(a.shape, method, dtype=object),
    }


def _inner_tvar_batch(m, p: PremiumParams, alpha: float, a: np.ndarray, scan_grid: int = 200):
    """Root-finding inner solver for TVaR over an array of means in (0, E[X]]."""
    a = np.asarray(a, dtype=float)
    d_tilde = m._invert_stop_loss(a)
    g = Distortion.tvar(alpha)
    if p.is_constant or p.floor_ratio == 0.0:
        return _stop_loss_batch(g, m, p, a, d_tilde, "stop-loss")
    dI = p.floor_ratio * a
    v = m.upper_quantile(alpha) if alpha < 1.0 else 0.0
    ratio_ok = ratio_condition(m, p, a, np.maximum(v, d_tilde) + p.cap_ratio * a)
    lo = np.maximum(0.0, v - dI)
    hi = np.full_like(a, v)
    h_lo = _h_batch(m, p, alpha, a, lo)
    at_zero = (lo == 0.0) & (h_lo > 0.0)
    root = bisect(lambda x: _h_batch(m, p, alpha, a, x), lo, hi, xtol=1e-13 * max(v, 1.0))
    root = np.where(at_zero, 0.0, root)
    h_res = _h_batch(m, p, alpha, a, root)
    stop = root >= d_tilde
    d1 = np.where(stop, d_tilde, root)
    d2 = np.where(stop, d_tilde + dI, upper_attachment(m, a, d1, dI))
    value = np.where(stop, stop_loss_value(g, m, p, a), rho_T_I1_closed(g, m, p, a, d1, d2))
    out = {
        "d1": d1,
        "d2": d2,
        "value": np.asarray(value, dtype=float),
        "stop": stop,
        "d1_bar": root,
        "h": h_res,
        "ratio_ok": ratio_ok,
        "method": np.full(a.shape, "tvar-root", dtype=object),
    }
    if not ratio_ok.all():
        idx = np.flatnonzero(~ratio_ok)
        scan = _inner_scan_batch(m, p, g, a[idx], scan_grid)
        for key in ("d1", "d2", "value", "stop"):
            out[key][idx] = scan[key]
        out["method"][idx] = "scan-fallback"
    return out


def _inner_scan_batch(m, p: PremiumParams, g: Distortion, a: np.ndarray, grid: int = 200):
    """Grid scan over ``d1 in [0, d_tilde]`` plus golden-section refinement."""
    a = np.asarray(a, dtype=float)
    d_tilde = m._invert_stop_loss(a)
    if p.is_constant or p.floor_ratio == 0.0:
        return _stop_loss_batch(g, m, p, a, d_tilde, "stop-loss")
    grid = max(int(grid), 2)
    u = np.linspace(0.0, 1.0, grid)
    D = d_tilde[:, None] * u[None, :]
    A = np.broadcast_to(a[:, None], D.shape)
    V, _ = _i1_value(g, m, p, A, D)
    V = np.asarray(V, dtype=float)
    k = np.argmin(V, axis=1)
    rows = np.arange(a.size)
    lo = D[rows, np.maximum(k - 1, 0)]
    hi = D[rows, np.minimum(k + 1, grid - 1)]
    xg, fg = golden_min(lambda x: np.asarray(_i1_value(g, m, p, a, x)[0], dtype=float), lo, hi, xtol=0.0, max_iter=_golden_iters(1e-6 * 2.0 / (grid - 1)))
    best_grid = V[rows, k]
    tie = 1e-13 * np.maximum(np.abs(best_grid), 1.0)
    use_golden = fg < best_grid - tie
    d1 = np.where(use_golden, xg, D[rows, k])
    d1 = np.minimum(d1, d_tilde)
    value, d2 = _i1_value(g, m, p, a, d1)
    dI = p.floor_ratio * a
    stop = (d1 >= d_tilde) | (d2 <= d1 + dI)
    d1 = np.where(stop, d_tilde, d1)
    d2 = np.where(stop, d_tilde + dI, d2)
    value = np.where(stop, stop_loss_value(g, m, p, a), value)
    return {
        "d1": d1,
        "d2": d2,
        "value": np.asarray(value, dtype=float),
        "stop": stop,
        "d1_bar": np.full(a.shape, math.nan),
        "h": np.full(a.shape, math.nan),
        "ratio_ok": np.full(a.shape, True),
        "method": np.full(a.shape, "scan", dtype=object),
    }


def _golden_iters(rel_width: float) -> int:
    """Iterations for golden section to shrink a bracket by ``rel_width``."""
    return int(math.ceil(math.log(max(rel_width, 1e-16)) / math.log(0.6180339887498949))) + 1


def _inner_batch(m, p, g: Distortion, a: np.ndarray, grid: int = 200):
    if g.kind == TVAR:
        return _inner_tvar_batch(m, p, g.level, a, grid)
    if not g.concave:
        raise DomainError("the insurer solver needs a concave distortion")
    return _inner_scan_batch(m, p, g, a, grid)


def _to_solution(res, i: int, a: float, d_tilde: float) -> InnerSolution:
    stop = bool(res["stop"][i])
    d2 = float(res["d2"][i])
    warns = []
    if res["method"][i] == "scan-fallback":
        warns.append(f"ratio condition failed at a={a:.6g}; used grid scan")
    return InnerSolution(
        a=float(a),
        d1=float(res["d1"][i]),
        d2=None if math.isinf(d2) else d2,
        value=float(res["value"][i]),
        branch=STOP_LOSS if stop else TWO_LAYER,
        d_tilde=float(d_tilde),
        d1_bar=float(res["d1_bar"][i]),
        h_residual=float(res["h"][i]),
        ratio_ok=bool(res["ratio_ok"][i]),
        method=str(res["method"][i]),
        warnings=warns,
    )


def _check_mean(m, a: float) -> float:
    mean = m.mean
    if not 0.0 < a <= mean * (1.0 + 1e-12):
        raise DomainError(f"expected ceded loss must lie in (0, E[X]], got {a}")
    return min(float(a), mean)


def solve_inner_tvar(m, p: PremiumParams, alpha: float, a: float) -> InnerSolution:
    """Optimal I1 contract at mean ``a`` under TVaR, via the root of :func:`H`."""
    a = _check_mean(m, a)
    res = _inner_tvar_batch(m, p, alpha, np.array([a]))
    sol = _to_solution(res, 0, a, float(m._invert_stop_loss(np.array(a))))
    for w in sol.warnings:
        log.warning(w)
    return sol


def solve_inner_scan(m, p: PremiumParams, g: Distortion, a: float, grid: int = 200) -> InnerSolution:
    """Optimal I1 contract at mean ``a`` by scanning ``d1`` for a concave distortion."""
    if grid < 100:
        raise DomainError("scan grid must have at least 100 points")
    if not g.concave:
        raise DomainError("the scan solver needs a concave distortion")
    a = _check_mean(m, a)
    res = _inner_scan_batch(m, p, g, np.array([a]), grid)
    return _to_solution(res, 0, a, float(m._invert_stop_loss(np.array(a))))


def solve_insurer(
    m,
    p: PremiumParams,
    g: Distortion,
    outer_grid: int = 200,
    inner_grid: int = 200,
    xtol: float = 1e-9,
) -> SolveReport:
    """Minimize the insurer's risk over all feasible contracts.

    ``xtol`` is the golden-section tolerance on ``a`` relative to ``E[X]``.
    """
    if not g.concave:
        raise DomainError("the insurer solver needs a concave distortion")
    mean = m.mean
    n = max(int(outer_grid), 3)
    a_grid = np.linspace(0.0, mean, n)
    res = _inner_batch(m, p, g, a_grid[1:], inner_grid)
    no_trade = rho_loss(g, m)
    values = np.concatenate([[no_trade], res["value"]])
    k = int(np.argmin(values))

    lo, hi = a_grid[max(k - 1, 0)], a_grid[min(k + 1, n - 1)]
    lo = max(lo, mean * 1e-12)

    def outer(x):
        return _inner_batch(m, p, g, np.asarray(x, dtype=float), inner_grid)["value"]

    iters = _golden_iters(xtol * mean / max(hi - lo, 1e-300))
    xa, fa = golden_min(outer, np.array([lo]), np.array([hi]), xtol=xtol * mean, max_iter=iters)
    a_star = float(a_grid[k])
    best = float(values[k])
    tie = 1e-13 * max(abs(best), 1.0)
    if float(fa[0]) < best - tie:
        a_star = float(xa[0])

    trace = [(0.0, math.inf, math.inf, float(no_trade), NO_TRADE)]
    for i in range(n - 1):
        trace.append(
            (
                float(a_grid[i + 1]),
                float(res["d1"][i]),
                float(res["d2"][i]),
                float(res["value"][i]),
                STOP_LOSS if res["stop"][i] else TWO_LAYER,
            )
        )
    warnings = []
    failed = a_grid[1:][res["method"] == "scan-fallback"]
    if failed.size:
        warnings.append(
            f"ratio condition failed at {failed.size} of {n - 1} grid means "
            f"(a in [{failed.min():.6g}, {failed.max():.6g}]); used grid scan"
        )

    if a_star == 0.0:
        inner = InnerSolution(0.0, math.inf, None, float(no_trade), NO_TRADE, math.inf, method="no-trade")
    else:
        one = _inner_batch(m, p, g, np.array([a_star]), inner_grid)
        inner = _to_solution(one, 0, a_star, float(m._invert_stop_loss(np.array(a_star))))
        warnings += inner.warnings
        if a_star not in a_grid:
            trace.append((a_star, inner.d1, inner.d2 if inner.d2 is not None else math.inf, inner.value, inner.branch))
    for w in warnings:
        log.warning(w)
    settings = {
        "outer_grid": n,
        "inner_grid": int(inner_grid),
        "xtol": xtol,
        "distortion": g.to_config(),
        "premium": p.to_config(),
        "loss": m.to_config(),
    }
    return SolveReport(
        indemnity=inner.indemnity(p),
        a_star=a_star,
        value=inner.value,
        inner=inner,
        no_trade_value=float(no_trade),
        trace=trace,
        settings=settings,
        warnings=warnings,
    )


def i2_domain(m, p: PremiumParams, a: float) -> tuple[float, float]:
    """Feasible attachments ``d1`` of I2 contracts with mean ``a``."""
    a = _check_mean(m, a)
    d_tilde = float(m._invert_stop_loss(np.array(a)))
    uI = p.cap_ratio * a
    if float(m._layer(np.array(0.0), np.array(uI))) <= a:
        return 0.0, d_tilde
    lo = float(
        bisect(lambda x: a - m._layer(x, x + uI), np.array(0.0), np.array(d_tilde))
    )
    return lo, d_tilde


def verify_I2_dominated(m, p: PremiumParams, g: Distortion, a: float, grid: int = 200) -> tuple[bool, float, bool]:
    """Check that the best I2 contract is no better than the best I1 contract at mean ``a``.

    Returns ``(dominated, margin, nonincreasing)`` where ``margin`` is
    ``min_I2 - min_I1`` and ``nonincreasing`` reports whether the I2
    objective is nonincreasing in ``d1`` on the grid.
    """
    if not g.concave:
        raise DomainError("dominance check needs a concave distortion")
    a = _check_mean(m, a)
    if p.is_constant:
        return True, 0.0, True
    lo, hi = i2_domain(m, p, a)
    d1 = np.linspace(lo, hi, max(int(grid), 2))
    v2, _ = _i2_value(g, m, p, np.full_like(d1, a), d1)
    v2 = np.asarray(v2, dtype=float)
    x2, f2 = golden_min(lambda x: np.asarray(_i2_value(g, m, p, a, x)[0], dtype=float), np.array([lo]), np.array([hi]), xtol=1e-9 * max(hi, 1e-12))
    min_i2 = min(float(v2.min()), float(f2[0]))
    min_i1 = solve_inner_scan(m, p, g, a, grid=max(grid, 100)).value
    if g.kind == TVAR:
        min_i1 = min(min_i1, solve_inner_tvar(m, p, g.level, a).value)
    margin = min_i2 - min_i1
    scale = 1e-10 * max(abs(min_i1), 1.0)
    nonincreasing = bool(np.all(np.diff(v2) <= scale))
    return margin >= -1e-8, margin, nonincreasing
