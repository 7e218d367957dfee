"""Independent checks for the closed forms and solvers.

* :func:`mc_rho` estimates a distortion risk measure from simulated losses.
* :func:`improve_to_S3` and :func:`improve_to_two_layer` replace a contract
  by one with the same expected ceded loss whose insurer position is
  smaller in convex order.
* :func:`convex_order_check` certifies such pairs through exact stop-loss
  transforms.
* :func:`brute_force_insurer` searches contract layouts on plain grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import ConstructionError, DomainError
from .indemnity import I1, I2, S3, STOP_LOSS, Indemnity, complete_I1, complete_I2
from .insurer_solver import _i1_value, _i2_value, i2_domain, stop_loss_value
from .numerics import bisect, bisect_decreasing
from .premium import PremiumParams, insurer_total_transform, premium_transform
from .pwl import PiecewiseLinear
from .riskmeasure import TVAR, Distortion, g_eval, integral, rho_loss

MC_BATCHES = 100


# -- Monte Carlo ----------------------------------------------------------------


@dataclass(frozen=True)
class MCEstimate:
    estimate: float
    se: float
    n: int
    seed: int | None
    kind: str

    def covers(self, value: float, k: float = 4.0, floor: float = 0.0) -> bool:
        """Whether ``value`` lies within ``k`` standard errors of the estimate."""
        return abs(self.estimate - value) <= k * self.se + floor


def _l_statistic(g: Distortion, z: np.ndarray) -> float:
    z = np.sort(z)
    n = z.size
    if g.kind == TVAR:
        k = int(math.ceil(g.level * n))
        return float(z[n - k :].mean())
    # ascending order statistic i gets g((n-i+1)/n) - g((n-i)/n)
    upper = np.arange(n, 0, -1) / n
    w = g_eval(g, upper) - g_eval(g, upper - 1.0 / n)
    return float(np.dot(w, z))


def mc_rho(
    g: Distortion,
    position: PiecewiseLinear | Callable,
    m,
    n: int = 1_000_000,
    seed: int | None = 0,
    samples: np.ndarray | None = None,
) -> MCEstimate:
    """Simulation estimate of ``rho_g(position(X))`` with a batch-means standard error."""
    if n < 1000:
        raise DomainError("Monte Carlo estimates need n >= 1000")
    x = m.sample(n, seed) if samples is None else np.asarray(samples, dtype=float)
    z = np.asarray(position(x), dtype=float)
    est = _l_statistic(g, z)
    parts = np.array_split(z, MC_BATCHES)
    batch = np.array([_l_statistic(g, part) for part in parts])
    se = float(batch.std(ddof=1) / math.sqrt(MC_BATCHES))
    kind = "tail-average" if g.kind == TVAR else "l-statistic"
    return MCEstimate(est, se, int(z.size), seed, kind)


# -- convex order -----------------------------------------------------------------


class ConvexOrderResult(NamedTuple):
    ok: bool
    violation: float
    mean_gap: float


def _t_points(Zs: Sequence[PiecewiseLinear], m, n: int) -> np.ndarray:
    pts = []
    for Z in Zs:
        pts.extend(Z.values.tolist())
        tail = m._quantile(1.0 - 10.0 ** -np.arange(1, 9))
        pts.extend(np.asarray(Z(tail)).tolist())
    pts = np.asarray([p for p in pts if math.isfinite(p)])
    lo, hi = pts.min(), pts.max()
    grid = np.linspace(lo, hi, max(int(n), 2))
    return np.unique(np.concatenate([pts, grid]))


def convex_order_check(Z1: PiecewiseLinear, Z2: PiecewiseLinear, m, t_grid: int = 400) -> ConvexOrderResult:
    """Whether ``Z1(X)`` is below ``Z2(X)`` in convex order (equal means, smaller stop-loss transforms)."""
    if not (Z1.is_nondecreasing and Z2.is_nondecreasing):
        raise DomainError("convex-order check needs nondecreasing transforms")
    tol = 1e-7 * m.mean
    gap = Z1.expectation(m) - Z2.expectation(m)
    t = _t_points([Z1, Z2], m, t_grid)
    diff = Z1.stop_loss_transform(m, t) - Z2.stop_loss_transform(m, t)
    violation = max(float(diff.max()), 0.0)
    return ConvexOrderResult(abs(gap) <= tol and violation <= tol, violation, float(gap))


# -- improvement constructions ----------------------------------------------------


def _slope_integral(f: PiecewiseLinear, m, lo: float, hi: float) -> float:
    """``int_lo^hi f'(x) S(x) dx``."""
    total = 0.0
    for a, b, s in f.segments():
        l, u = max(a, lo), min(b, hi)
        if s != 0.0 and u > l:
            total += s * float(m._layer(np.array(l), np.array(u)))
    return total


def _solve_layer_start(m, width: float, target: float, lo: float, hi: float, what: str) -> float:
    """Start ``c`` in ``[lo, hi]`` of a slope-one layer of ``width`` with mean ``target``."""
    tol = 1e-9 * m.mean
    f = lambda c: m._layer(c, c + width) - target
    if math.isinf(hi):
        hi = max(lo, 1.0)
        while float(f(np.array(hi))) > 0.0:
            hi = 2.0 * hi + 1.0
            if hi > 1e300:
                raise ConstructionError(f"{what}: could not bracket the layer start")
    f_lo, f_hi = float(f(np.array(lo))), float(f(np.array(hi)))
    if f_lo < -tol or f_hi > tol:
        raise ConstructionError(
            f"{what}: no sign change on [{lo:.6g}, {hi:.6g}] (residuals {f_lo:.3g}, {f_hi:.3g})"
        )
    if f_lo <= 0.0:
        return lo
    return float(bisect_decreasing(f, np.array(lo), np.array(hi)))


def _s3_from(a0: float, dI: float, c: float, w: float, e: float) -> Indemnity:
    return Indemnity.s3(a0, a0 + dI, c, c + w, None if math.isinf(e) else e)


def improve_to_S3(I: Indemnity, m, p: PremiumParams) -> Indemnity:
    """Three-layer contract with the same mean whose insurer position is no riskier."""
    mean_I = I.ceded_mean(m)
    if I.is_zero or mean_I <= 0.0:
        return Indemnity.zero()
    if p.is_constant:
        return Indemnity.stop_loss(float(m._invert_stop_loss(np.array(mean_I))))
    t = p.thresholds(mean_I)
    dI, uI = t.d_I, t.u_I
    w = uI - dI
    f = I.pl
    x_d = f.level_sup(dI)
    x_u = f.level_sup(uI)
    if math.isinf(x_d):
        return Indemnity.zero()

    # f1: keep I up to x_u, then a single slope-one layer from e
    if math.isinf(x_u):
        e = math.inf
    else:
        rest = _slope_integral(f, m, x_u, math.inf)
        e = math.inf if rest <= 1e-15 * m.mean else max(float(m._invert_stop_loss(np.array(rest))), x_u)
    # f2: the rise from d_I to u_I becomes one layer [c, c + w]
    band = _slope_integral(f, m, x_d, x_u)
    c_hi = (e if math.isfinite(e) else x_u) - w
    c = _solve_layer_start(m, w, band, x_d, c_hi, "f2 layer")
    # f3: the rise from 0 to d_I becomes one layer [a, a + d_I]
    if dI == 0.0:
        a0 = c
    else:
        below = _slope_integral(f, m, 0.0, x_d)
        a0 = _solve_layer_start(m, dI, below, 0.0, c - dI, "f3 layer")
    return _s3_from(a0, dI, c, w, e)


def expected_total(I: Indemnity, m, p: PremiumParams) -> float:
    """``E[T_I(X)]``."""
    return m.mean - I.ceded_mean(m) + premium_transform(p, I, m).expectation(m)


def _s3_layout(I: Indemnity):
    lay = I.layout
    e = math.inf if lay["e"] is None else lay["e"]
    return lay["a"], lay["b"], lay["c"], lay["d"], e


def two_layer_bounds(I3: Indemnity, m, p: PremiumParams) -> tuple[Indemnity, Indemnity]:
    """Mean-preserving I1 and I2 contracts bracketing ``E[T]`` of an S3 contract.

    ``h1`` keeps the first layer and merges the rest into one upper layer;
    ``h2`` merges the two finite layers into one of width ``u_I``.
    """
    a0, b, c, d, e = _s3_layout(I3)
    t = p.thresholds(I3.ceded_mean(m))
    upper = float(m._layer(np.array(c), np.array(d))) + (0.0 if math.isinf(e) else float(m._tail_integral(np.array(e))))
    c1 = float(m._invert_stop_loss(np.array(upper)))
    h1 = Indemnity.layered(I1, a0, b - a0, max(c1, b))
    lower = float(m._layer(np.array(a0), np.array(b))) + float(m._layer(np.array(c), np.array(d)))
    c2 = _solve_layer_start(m, t.u_I, lower, 0.0, max(c - t.d_I, 0.0), "h2 layer")
    h2 = Indemnity.layered(I2, c2, t.u_I, None if math.isinf(e) else max(e, c2 + t.u_I))
    return h1, h2


def improve_to_two_layer(I3: Indemnity, m, p: PremiumParams, rtol: float = 1e-12) -> Indemnity:
    """Two-layer contract (I1 or I2) with the same mean and no riskier insurer position."""
    if I3.family == STOP_LOSS or I3.is_zero:
        return I3
    if I3.family in (I1, I2):
        return I3
    if I3.family != S3:
        raise DomainError("improve_to_two_layer expects an S3 contract")
    if p.is_constant:
        return Indemnity.stop_loss(float(m._invert_stop_loss(np.array(I3.ceded_mean(m)))))
    a0, b, c, d, e = _s3_layout(I3)
    mean_I = I3.ceded_mean(m)
    if d == e:
        return Indemnity.layered(I1, a0, b - a0, c)
    if b == c:
        return Indemnity.layered(I2, a0, d - a0, None if math.isinf(e) else e)

    h1, h2 = two_layer_bounds(I3, m, p)

    target = expected_total(I3, m, p)
    e1, e2 = expected_total(h1, m, p), expected_total(h2, m, p)
    tol = rtol * max(abs(target), 1.0)
    if target <= e1 + tol:
        return h1
    if target >= e2 - tol:
        return h2
    d_tilde = float(m._invert_stop_loss(np.array(mean_I)))
    stop = Indemnity.stop_loss(d_tilde)
    e_stop = expected_total(stop, m, p)
    if abs(target - e_stop) <= tol:
        return stop

    def et(family, x):
        build = complete_I1 if family == I1 else complete_I2
        vals = [expected_total(build(m, p, mean_I, float(v)), m, p) for v in np.atleast_1d(x)]
        return np.array(vals).reshape(np.shape(x))

    if target < e_stop:
        x = float(bisect(lambda v: et(I1, v) - target, np.array(a0), np.array(d_tilde)))
        return complete_I1(m, p, mean_I, x)
    y = float(bisect_decreasing(lambda v: et(I2, v) - target, np.array(h2.layout["d1"]), np.array(d_tilde)))
    return complete_I2(m, p, mean_I, y)


# -- brute force --------------------------------------------------------------------


@dataclass
class BruteForceResult:
    indemnity: Indemnity
    family: str
    a: float
    d1: float
    d2: float | None
    value: float
    a_step: float
    d1_step: float
    s3_best: float = math.nan
    i2_best: float = math.nan


def _s3_values(g: Distortion, m, p: PremiumParams, a: float, n: int):
    """Insurer risk of S3 layouts with mean ``a`` on a coarse ``(a0, c)`` grid."""
    dI, uI = p.floor_ratio * a, p.cap_ratio * a
    w = uI - dI
    d_tilde = float(m._invert_stop_loss(np.array(a)))
    A0, C = np.meshgrid(np.linspace(0.0, d_tilde, n), np.linspace(0.0, 1.0, n), indexing="ij")
    # c sweeps [a0 + d_I, a0 + d_I + span] where span keeps the mean feasible
    span = np.maximum(d_tilde + 4.0 * uI - A0, 0.0)
    C = A0 + dI + C * span
    rest = a - m._layer(A0, A0 + dI) - m._layer(C, C + w)
    ok = rest >= -1e-12 * m.mean
    E = np.where(rest > 1e-14 * m.mean, m._invert_stop_loss(np.maximum(rest, 1e-300)), np.inf)
    ok &= E >= C + w - 1e-12
    E = np.maximum(E, C + w)
    B, D = A0 + dI, C + w
    v = (
        integral(g, m, 0.0, A0)
        + integral(g, m, B, C)
        + p.delta * integral(g, m, C, D)
        + integral(g, m, D, E)
        + (1.0 + p.theta1) * a
    )
    return np.where(ok, v, np.inf)


def brute_force_insurer(
    m,
    p: PremiumParams,
    g: Distortion,
    a_grid: int = 200,
    d1_grid: int = 200,
    include_i2: bool = False,
    s3_grid: int = 0,
) -> BruteForceResult:
    """Exhaustive grid search over I1 layouts (optionally I2 and coarse S3).

    ``d1`` is gridded relative to ``d_tilde(a)`` so every row spans the
    full feasible range.
    """
    if a_grid < 50 or d1_grid < 50:
        raise DomainError("brute-force grids need at least 50 points")
    mean = m.mean
    a_vals = np.linspace(0.0, mean, a_grid)[1:]
    u = np.linspace(0.0, 1.0, d1_grid)
    d_tilde = m._invert_stop_loss(a_vals)
    best_val = rho_loss(g, m)
    best = (Indemnity.zero(), STOP_LOSS, 0.0, math.inf, None)
    if p.is_constant or p.floor_ratio == 0.0:
        V = np.asarray(stop_loss_value(g, m, p, a_vals), dtype=float)
        k = int(np.argmin(V))
        if V[k] < best_val:
            best_val = float(V[k])
            d = float(d_tilde[k])
            best = (Indemnity.stop_loss(d), STOP_LOSS, float(a_vals[k]), d, None)
    else:
        D = d_tilde[:, None] * u[None, :]
        A = np.broadcast_to(a_vals[:, None], D.shape)
        V, D2 = _i1_value(g, m, p, A, D)
        V = np.asarray(V, dtype=float)
        i, j = np.unravel_index(int(np.argmin(V)), V.shape)
        if V[i, j] < best_val:
            best_val = float(V[i, j])
            a_b, d1_b, d2_b = float(a_vals[i]), float(D[i, j]), float(D2[i, j])
            if j == d1_grid - 1:
                best = (Indemnity.stop_loss(d1_b), STOP_LOSS, a_b, d1_b, d1_b + p.floor_ratio * a_b)
            else:
                d2o = None if math.isinf(d2_b) else d2_b
                best = (Indemnity.layered(I1, d1_b, p.floor_ratio * a_b, d2o), I1, a_b, d1_b, d2o)
    i2_best = math.nan
    if include_i2 and not p.is_constant:
        i2_best = math.inf
        for a in a_vals:
            lo, hi = i2_domain(m, p, float(a))
            d1 = np.linspace(lo, hi, d1_grid)
            v, _ = _i2_value(g, m, p, np.full_like(d1, a), d1)
            i2_best = min(i2_best, float(np.min(v)))
    s3_best = math.nan
    if s3_grid and not p.is_constant:
        s3_best = math.inf
        for a in np.linspace(0.0, mean, max(s3_grid, 2))[1:]:
            s3_best = min(s3_best, float(np.min(_s3_values(g, m, p, float(a), s3_grid))))
    I, fam, a_b, d1_b, d2_b = best
    return BruteForceResult(
        indemnity=I,
        family=fam,
        a=a_b,
        d1=d1_b,
        d2=d2_b,
        value=best_val,
        a_step=mean / (a_grid - 1),
        d1_step=(float(m._invert_stop_loss(np.array(a_b))) if a_b > 0 else 0.0) / (d1_grid - 1),
        s3_best=s3_best,
        i2_best=i2_best,
    )


# -- random instances ----------------------------------------------------------------


def random_loss(rng: np.random.Generator):
    """Exponential or Pareto loss with parameters log-uniform in [0.5, 4]."""
    from .dist import exponential, pareto

    lu = lambda: float(np.exp(rng.uniform(np.log(0.5), np.log(4.0))))
    if rng.random() < 0.5:
        return exponential(lu())
    return pareto(lu(), 1.0 + lu())


def random_params(rng: np.random.Generator, delta: float | None = None) -> PremiumParams:
    d = float(rng.uniform(0.05, 1.0)) if delta is None else delta
    t0 = float(rng.uniform(0.1, 1.5))
    t1 = float(rng.uniform(max(t0 - d, 0.0), t0))
    t2 = t0 + float(rng.uniform(0.1, 3.0))
    return PremiumParams(d, t0, t1, t2)


def random_indemnity(rng: np.random.Generator, m, max_breaks: int = 8, slopes=(0.0, 0.5, 1.0)) -> Indemnity:
    """Feasible piecewise-linear contract with at most ``max_breaks`` breakpoints."""
    k = int(rng.integers(2, max_breaks + 1))
    scale = float(m._quantile(np.array(0.95)))
    xs = np.sort(rng.uniform(0.0, scale, k))
    ss = rng.choice(np.asarray(slopes, dtype=float), k)
    if np.all(ss == 0.0):
        ss[-1] = 1.0
    return Indemnity.general(list(zip(xs, ss)))


def improvement_chain(I: Indemnity, m, p: PremiumParams):
    """``(I, f_I, h)`` with convex-order certificates for both steps."""
    f = improve_to_S3(I, m, p)
    h = improve_to_two_layer(f, m, p)
    T = [insurer_total_transform(p, J, m) for J in (I, f, h)]
    return (I, f, h), T, (convex_order_check(T[1], T[0], m), convex_order_check(T[2], T[1], m))


# -- verification suite ---------------------------------------------------------------


@dataclass
class CaseResult:
    name: str
    passed: bool
    margin: float
    detail: str = ""


def run_verification(
    m,
    p: PremiumParams,
    g: Distortion,
    seed: int = 0,
    cases: int = 20,
    mc_samples: int = 200_000,
) -> list[CaseResult]:
    """Cross-check closed forms, constructions and solvers on one scenario.

    Every randomized case draws from its own child stream of ``seed`` so
    results do not depend on execution order.
    """
    from .insurer_solver import solve_insurer, verify_I2_dominated
    from .riskmeasure import rho_monotone_transform, rho_T_I1_closed, rho_T_I2_closed

    streams = np.random.SeedSequence(seed).spawn(3 * cases + 1)
    out: list[CaseResult] = []
    ident = PiecewiseLinear.identity()
    exact = rho_loss(g, m)
    mc = mc_rho(g, ident, m, n=mc_samples, seed=int(streams[0].generate_state(1)[0]))
    out.append(CaseResult("mc_identity", mc.covers(exact), abs(mc.estimate - exact) / max(mc.se, 1e-300),
                          f"closed={exact:.10g} mc={mc.estimate:.10g} se={mc.se:.3g}"))
    mean = m.mean
    if not p.is_constant:
        for i in range(cases):
            rng = np.random.default_rng(streams[1 + i])
            a = float(rng.uniform(0.05, 0.95)) * mean
            d_tilde = float(m._invert_stop_loss(np.array(a)))
            fam = I1 if i % 2 == 0 else I2
            try:
                if fam == I1:
                    I = complete_I1(m, p, a, float(rng.uniform(0.0, d_tilde)))
                    closed = rho_T_I1_closed(g, m, p, a, I.layout["d1"], I.layout["d2"])
                else:
                    lo, hi = i2_domain(m, p, a)
                    I = complete_I2(m, p, a, float(rng.uniform(lo, hi)))
                    closed = rho_T_I2_closed(g, m, p, a, I.layout["d1"], I.layout["d2"])
            except (DomainError, ValueError) as exc:
                out.append(CaseResult(f"closed_vs_generic[{i}]", True, 0.0, f"skipped: {exc}"))
                continue
            generic = rho_monotone_transform(g, m, insurer_total_transform(p, I, m))
            gap = abs(closed - generic)
            out.append(CaseResult(f"closed_vs_generic[{i}]", gap <= 1e-8 * max(1.0, abs(generic)), gap, repr(I)))
        for i in range(cases):
            rng = np.random.default_rng(streams[1 + cases + i])
            I = random_indemnity(rng, m)
            try:
                _, T, (c1, c2) = improvement_chain(I, m, p)
            except ConstructionError as exc:
                out.append(CaseResult(f"improvement_chain[{i}]", False, math.inf, str(exc)))
                continue
            r = [rho_monotone_transform(g, m, t) for t in T] if g.concave else [0.0, 0.0, 0.0]
            mono = r[1] <= r[0] + 1e-8 and r[2] <= r[1] + 1e-8
            viol = max(c1.violation, c2.violation, abs(c1.mean_gap), abs(c2.mean_gap))
            out.append(CaseResult(f"improvement_chain[{i}]", c1.ok and c2.ok and mono, viol, repr(I)))
        if g.concave:
            for k, frac in enumerate((0.2, 0.5, 0.8)):
                ok, margin, _ = verify_I2_dominated(m, p, g, frac * mean, grid=200)
                out.append(CaseResult(f"i2_dominated[{k}]", ok, margin, f"a={frac * mean:.6g}"))
    if g.concave:
        rep = solve_insurer(m, p, g)
        bf = brute_force_insurer(m, p, g, 200, 200)
        rel = (bf.value - rep.value) / max(abs(rep.value), 1e-300)
        out.append(CaseResult("solver_vs_brute_force", -1e-10 <= rel <= 1e-4, rel,
                              f"solve={rep.value:.10g} brute={bf.value:.10g}"))
    return out
