"""Leader-follower choice of the scheme slope ``delta``.

For each ``delta`` on a grid the insurer's best contract ``I^delta`` is
solved with ``theta1 = max(theta0 - delta, theta1_bar)``.  The reinsurer
then evaluates the risk of its net position ``I^delta - Pi`` and picks the
smallest ``delta`` whose value is within ``eps_val`` of the minimum.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Sequence

import numpy as np

from .errors import DomainError
from .indemnity import Indemnity
from .insurer_solver import NO_TRADE, SolveReport, solve_insurer
from .premium import PremiumParams, reinsurer_net_transform
from .riskmeasure import Distortion, rho_monotone_transform

log = logging.getLogger(__name__)


def theta1_rule(delta: float, theta0: float, theta1_bar: float) -> float:
    """Floor loading paired with slope ``delta``."""
    return max(theta0 - delta, theta1_bar)


def delta_grid(start: float = 0.0, end: float = 1.0, step: float = 0.001) -> np.ndarray:
    """Inclusive grid ``start, start + step, ..., end`` rounded to 12 decimals."""
    if step <= 0 or end < start:
        raise DomainError("delta grid needs step > 0 and end >= start")
    n = int(math.floor((end - start) / step + 1e-9)) + 1
    grid = np.round(start + step * np.arange(n), 12)
    if not (0.0 <= grid[0] and grid[-1] <= 1.0):
        raise DomainError("delta grid must lie in [0, 1]")
    return grid


@dataclass(frozen=True)
class BowleyConfig:
    """Inputs of the leader-follower problem."""

    loss: Any
    theta0: float
    theta1_bar: float
    theta2: float
    insurer: Distortion
    reinsurer: Distortion | None = None
    deltas: tuple[float, ...] = tuple(delta_grid())
    eps_val: float | None = None
    outer_grid: int = 200
    inner_grid: int = 200
    threads: int = 1

    def __post_init__(self):
        if not 0.0 <= self.theta1_bar <= self.theta0 < self.theta2:
            raise DomainError("loadings must satisfy 0 <= theta1_bar <= theta0 < theta2")
        if not self.insurer.concave:
            raise DomainError("the insurer's distortion must be concave")
        if len(self.deltas) == 0:
            raise DomainError("delta grid is empty")

    @property
    def tolerance(self) -> float:
        return 1e-6 * self.loss.mean if self.eps_val is None else float(self.eps_val)

    def params(self, delta: float) -> PremiumParams:
        return PremiumParams(delta, self.theta0, theta1_rule(delta, self.theta0, self.theta1_bar), self.theta2)


@dataclass
class BowleyRow:
    delta: float
    theta1: float
    a: float
    d1: float
    dI: float
    d2: float
    insurer_value: float
    branch: str
    indemnity: Indemnity
    reinsurer_value: float = math.nan
    warnings: list[str] = field(default_factory=list)


@dataclass
class BowleyReport:
    rows: list[BowleyRow]
    delta_star: float
    optimal_set: tuple[float, float]
    optimal_deltas: list[float]
    indemnity_star: Indemnity
    reinsurer: Distortion
    tolerance: float

    CSV_COLUMNS = ("delta", "theta1", "d1", "dI", "d2", "a", "insurer_value", "reinsurer_value", "branch")

    def row_at(self, delta: float) -> BowleyRow:
        return min(self.rows, key=lambda r: abs(r.delta - delta))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(getattr(r, c)) if c != "branch" else r.branch for c in self.CSV_COLUMNS])
        return buf.getvalue()

    def summary(self) -> dict[str, Any]:
        star = self.row_at(self.delta_star)
        return {
            "delta_star": self.delta_star,
            "optimal_set": list(self.optimal_set),
            "n_optimal": len(self.optimal_deltas),
            "reinsurer_value": star.reinsurer_value,
            "insurer_value": star.insurer_value,
            "indemnity": self.indemnity_star.to_dict(),
            "reinsurer": self.reinsurer.to_config(),
            "tolerance": self.tolerance,
            "warnings": sorted({w for r in self.rows for w in r.warnings}),
        }


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isinf(x):
        return "inf"
    return format(x, ".12g")


def reinsurer_value(m, p: PremiumParams, g2: Distortion, I: Indemnity) -> float:
    """Reinsurer's risk of the net position ``I(X) - Pi_I(X)``."""
    if I.is_zero:
        return 0.0
    return rho_monotone_transform(g2, m, reinsurer_net_transform(p, I, m))


def _row_from_report(delta: float, p: PremiumParams, rep: SolveReport) -> BowleyRow:
    inner = rep.inner
    if inner.branch == NO_TRADE:
        d1 = dI = d2 = math.inf
    else:
        dI = p.floor_ratio * inner.a if not p.is_constant else 0.0
        d1 = inner.d1
        d2 = math.inf if inner.d2 is None else inner.d2
    return BowleyRow(
        delta=float(delta),
        theta1=p.theta1,
        a=rep.a_star,
        d1=d1,
        dI=dI,
        d2=d2,
        insurer_value=rep.value,
        branch=inner.branch,
        indemnity=rep.indemnity,
        warnings=list(rep.warnings),
    )


def insurer_row(cfg: BowleyConfig, delta: float) -> BowleyRow:
    """Solve the insurer's problem at one ``delta``; failures are annotated, not raised."""
    p = cfg.params(delta)
    try:
        rep = solve_insurer(cfg.loss, p, cfg.insurer, cfg.outer_grid, cfg.inner_grid)
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        log.warning("insurer solve failed at delta=%g: %s", delta, exc)
        return BowleyRow(float(delta), p.theta1, math.nan, math.nan, math.nan, math.nan, math.nan,
                         "Failed", Indemnity.zero(), warnings=[f"solve failed: {exc}"])
    return _row_from_report(delta, p, rep)


def _rows_chunk(args):
    cfg, deltas = args
    return [insurer_row(cfg, d) for d in deltas]


def insurer_rows(cfg: BowleyConfig) -> list[BowleyRow]:
    """Best-response rows in ``delta`` order, optionally computed in parallel."""
    deltas = list(cfg.deltas)
    workers = max(int(cfg.threads), 1)
    if workers == 1 or len(deltas) < 2:
        return [insurer_row(cfg, d) for d in deltas]
    chunks = [deltas[i::workers] for i in range(workers)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_rows_chunk, [(cfg, c) for c in chunks]))
    rows = [r for part in parts for r in part]
    rows.sort(key=lambda r: r.delta)
    return rows


def select(rows: Sequence[BowleyRow], tol: float) -> tuple[float, list[float]]:
    """Smallest ``delta`` within ``tol`` of the lowest reinsurer value, and the full set."""
    vals = np.array([r.reinsurer_value for r in rows])
    ok = np.isfinite(vals)
    if not ok.any():
        raise DomainError("no row produced a finite reinsurer value")
    best = vals[ok].min()
    optimal = [r.delta for r, v in zip(rows, vals) if np.isfinite(v) and v <= best + tol]
    return optimal[0], optimal


def evaluate_rows(cfg: BowleyConfig, rows: Sequence[BowleyRow], g2: Distortion) -> BowleyReport:
    """Attach reinsurer values under ``g2`` and pick the Bowley-optimal ``delta``."""
    out = []
    for r in rows:
        r = replace(r, warnings=list(r.warnings))
        if r.branch != "Failed":
            r.reinsurer_value = reinsurer_value(cfg.loss, cfg.params(r.delta), g2, r.indemnity)
        out.append(r)
    tol = cfg.tolerance
    star, optimal = select(out, tol)
    star_row = next(r for r in out if r.delta == star)
    return BowleyReport(out, star, (optimal[0], optimal[-1]), optimal, star_row.indemnity, g2, tol)


def sweep(cfg: BowleyConfig, rows: Sequence[BowleyRow] | None = None) -> BowleyReport:
    """Full leader-follower sweep over ``cfg.deltas``."""
    if cfg.reinsurer is None:
        raise DomainError("sweep needs the reinsurer's distortion")
    rows = insurer_rows(cfg) if rows is None else rows
    return evaluate_rows(cfg, rows, cfg.reinsurer)


def _distortion(kind: str, level: float) -> Distortion:
    builders = {"tvar": Distortion.tvar, "power": Distortion.power, "var": Distortion.var}
    if kind not in builders:
        raise DomainError("a level curve needs a TVaR, VaR or power distortion")
    return builders[kind](level)


def beta_curve(
    cfg: BowleyConfig,
    betas: Sequence[float],
    kind: str | None = None,
    rows: Sequence[BowleyRow] | None = None,
) -> list[tuple[float, float, float]]:
    """``(beta, delta_min, delta_max)`` of the optimal set for each reinsurer level.

    The insurer's rows do not depend on the reinsurer, so they are solved
    once and re-evaluated for every ``beta``.  ``kind`` defaults to the
    kind of ``cfg.reinsurer`` (TVaR when unset).
    """
    if kind is None:
        kind = cfg.reinsurer.kind if cfg.reinsurer is not None else "tvar"
    rows = insurer_rows(cfg) if rows is None else rows
    out = []
    for b in betas:
        rep = evaluate_rows(cfg, rows, _distortion(kind, b))
        out.append((float(b), rep.optimal_set[0], rep.optimal_set[1]))
    return out
