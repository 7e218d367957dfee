import math

import numpy as np
import pytest

from repremia.dist import exponential, pareto
from repremia.errors import DomainError, SingularityError
from repremia.indemnity import Indemnity, upper_attachment
from repremia.insurer_solver import (
    NO_TRADE,
    STOP_LOSS,
    TWO_LAYER,
    H,
    solve_inner_scan,
    solve_inner_tvar,
    solve_insurer,
    verify_I2_dominated,
)
from repremia.premium import PremiumParams, insurer_total_transform
from repremia.riskmeasure import Distortion, rho_loss, rho_monotone_transform, rho_T_I1_closed


def exp_closed_root(mu, alpha, p, a):
    dI, uI = p.floor_ratio * a, p.cap_ratio * a
    d = p.delta
    inner = 1 - d + d * math.exp(-dI / mu) + d * math.exp(-(uI - dI) / mu) - d * math.exp(-uI / mu)
    return mu * math.log(inner) - mu * math.log(alpha)


def test_exponential_root_matches_closed_form(expo, scheme):
    sol = solve_inner_tvar(expo, scheme, 0.2, 1.0)
    closed = exp_closed_root(2.0, 0.2, scheme, 1.0)
    assert closed == pytest.approx(2 * math.log(0.8833) - 2 * math.log(0.2), abs=1e-3)
    assert sol.d1_bar == pytest.approx(closed, abs=1e-9)
    assert abs(sol.h_residual) <= 1e-9
    assert sol.branch == STOP_LOSS
    assert sol.d1 == pytest.approx(2 * math.log(2), abs=1e-12)
    assert sol.indemnity(scheme).layout["d"] == pytest.approx(2 * math.log(2), abs=1e-12)


@pytest.mark.parametrize("m", [exponential(2.0), pareto(2.0, 2.0)])
@pytest.mark.parametrize("a", [0.3, 1.0])
def test_H_boundary_signs(m, scheme, a):
    alpha = 0.2
    p = PremiumParams(0.8, 1.0, 0.5, 2.0)
    v = m.quantile(1 - alpha)
    dI = p.floor_ratio * a
    if v - dI >= 0:
        assert H(m, p, alpha, a, v - dI) <= 1e-12
    d2 = float(upper_attachment(m, a, v, dI))
    ratio = m.survival(d2 + (p.cap_ratio - p.floor_ratio) * a) / m.survival(d2)
    assert H(m, p, alpha, a, v) == pytest.approx(p.delta * (1 - ratio), abs=1e-12)
    assert H(m, p, alpha, a, v) >= 0


def test_H_exponential_third_term_constant(expo, scheme):
    # with d2 pushed far out the ratio term only depends on u_I - d_I
    a = 0.2
    v = expo.quantile(0.8)
    vals = [H(expo, scheme, 0.2, a, d) for d in np.linspace(v - 0.1, v, 5)]
    dI = scheme.floor_ratio * a
    for d, h in zip(np.linspace(v - 0.1, v, 5), vals):
        s1, s2 = expo.survival(d), expo.survival(d + dI)
        third = math.exp(-(scheme.cap_ratio - scheme.floor_ratio) * a / 2.0)
        assert h == pytest.approx((0.2 - s2) / (s1 - s2) - third, abs=1e-12)


def test_H_singular_without_floor_band(expo):
    with pytest.raises(SingularityError):
        H(expo, PremiumParams(0.5, 1.0, 0.5, 2.0), 0.2, 1.0, 0.5)


def test_full_mean_is_full_cession(expo, scheme, tvar02):
    sol = solve_inner_tvar(expo, scheme, 0.2, 2.0)
    full = rho_monotone_transform(tvar02, expo, insurer_total_transform(scheme, Indemnity.full(), expo))
    assert sol.d1 == pytest.approx(0.0, abs=1e-12)
    assert sol.value == pytest.approx(full, abs=1e-10)
    assert solve_inner_scan(expo, scheme, tvar02, 2.0).value == pytest.approx(full, abs=1e-10)


def test_pareto_root_vs_fine_scan(par, scheme):
    g = Distortion.tvar(0.2)
    sol = solve_inner_tvar(par, scheme, 0.2, 1.0)
    d_tilde = par.invert_stop_loss(1.0)
    d1 = np.arange(0.0, d_tilde, 0.001)
    d1 = np.append(d1, d_tilde)
    a = np.full_like(d1, 1.0)
    d2 = upper_attachment(par, a, d1, scheme.floor_ratio * a)
    vals = rho_T_I1_closed(g, par, scheme, a, d1, d2)
    best = d1[int(np.argmin(vals))]
    assert abs(sol.d1 - best) <= 0.001 + 1e-12
    assert sol.value <= vals.min() + 1e-12


@pytest.mark.parametrize(
    "m,p,alpha",
    [
        (pareto(2.0, 2.0), PremiumParams(0.8, 1.0, 0.5, 5.0), 0.2),
        (pareto(2.0, 2.0), PremiumParams(1.0, 1.0, 0.5, 2.0), 0.1),
        (exponential(2.0), PremiumParams(1.0, 1.0, 0.5, 10.0), 0.2),
        (exponential(2.0), PremiumParams(0.6, 1.0, 0.5, 2.0), 0.1),
    ],
)
@pytest.mark.parametrize("frac", [0.1, 0.4, 0.8])
def test_scan_agrees_with_root(m, p, alpha, frac):
    a = frac * m.mean
    root = solve_inner_tvar(m, p, alpha, a)
    scan = solve_inner_scan(m, p, Distortion.tvar(alpha), a, grid=200)
    assert scan.value == pytest.approx(root.value, rel=1e-5)
    if root.branch == TWO_LAYER:
        assert abs(root.h_residual) <= 1e-9
        assert root.d1 < root.d_tilde


def test_power_minimizer_stable_under_grid_doubling(expo):
    p = PremiumParams(1.0, 1.0, 0.5, 10.0)
    g = Distortion.power(0.2)
    for a in (0.5, 1.0, 1.5):
        s1 = solve_inner_scan(expo, p, g, a, grid=200)
        s2 = solve_inner_scan(expo, p, g, a, grid=400)
        assert s2.value == pytest.approx(s1.value, rel=1e-9)
        assert abs(s2.d1 - s1.d1) <= 1e-4 * s1.d_tilde


def test_scan_contract(expo, scheme):
    with pytest.raises(DomainError):
        solve_inner_scan(expo, scheme, Distortion.tvar(0.2), 1.0, grid=50)
    with pytest.raises(DomainError):
        solve_inner_scan(expo, scheme, Distortion.var(0.2), 1.0)
    with pytest.raises(DomainError):
        solve_inner_tvar(expo, scheme, 0.2, 2.5)


def test_constant_premium_gives_classical_stop_loss(expo):
    # with theta = 1 the marginal condition g(S(d)) = 2 S(d) puts S(d) at 1/2
    p = PremiumParams(0.0, 1.0, 1.0, 2.0)
    rep = solve_insurer(expo, p, Distortion.tvar(0.1))
    assert rep.indemnity.family == STOP_LOSS
    assert rep.indemnity.layout["d"] == pytest.approx(2 * math.log(2), abs=1e-6)


def test_expensive_cover_means_no_trade(expo):
    p = PremiumParams(0.5, 20.0, 19.8, 30.0)
    g = Distortion.tvar(0.1)
    rep = solve_insurer(expo, p, g)
    assert rep.inner.branch == NO_TRADE and rep.indemnity.is_zero
    assert rep.value == pytest.approx(rho_loss(g, expo))


def test_pareto_cap2_pattern_stop_loss_for_all_delta(par):
    g = Distortion.tvar(0.1)
    retention = {}
    for delta in (0.0, 0.2, 0.4, 0.5, 0.6, 0.7, 0.8, 1.0):
        p = PremiumParams(delta, 1.0, max(1.0 - delta, 0.5), 2.0)
        rep = solve_insurer(par, p, g)
        assert rep.indemnity.family == STOP_LOSS
        retention[delta] = rep.indemnity.layout["d"]
    low = [retention[d] for d in (0.0, 0.2, 0.4, 0.5)]
    assert all(b >= a - 1e-6 for a, b in zip(low, low[1:]))
    # once the whole premium band sits below the TVaR quantile the objective
    # is d + 3 * 4 / (d + 2), minimized at d = 2 sqrt(3) - 2 for every delta
    frozen = 2 * (math.sqrt(3.0) - 1)
    for d in (0.5, 0.7, 0.8, 1.0):
        assert retention[d] == pytest.approx(frozen, abs=1e-6)
    # in between the band straddles the quantile and retention peaks
    assert retention[0.6] > retention[0.5] + 1e-3


def test_two_layer_contracts_appear_for_high_cap(par):
    p = PremiumParams(1.0, 1.0, 0.5, 5.0)
    rep = solve_insurer(par, p, Distortion.tvar(0.2))
    assert rep.inner.branch == TWO_LAYER
    assert rep.indemnity.ceded_mean(par) == pytest.approx(rep.a_star, rel=1e-8)


@pytest.mark.parametrize("m", [exponential(2.0), pareto(2.0, 2.0)])
def test_solver_report_invariants(m):
    g = Distortion.tvar(0.2)
    p = PremiumParams(0.8, 1.0, 0.5, 5.0)
    rep = solve_insurer(m, p, g)
    vals = np.array([row[3] for row in rep.trace])
    assert rep.value <= vals.min() + 1e-9 * abs(rep.value)
    assert rep.value <= rho_loss(g, m)
    assert rep.indemnity.ceded_mean(m) == pytest.approx(rep.a_star, rel=1e-8)
    # value is continuous in a: adjacent grid cells move by O(step)
    a = np.array([row[0] for row in rep.trace[:200]])
    jumps = np.abs(np.diff(vals[:200])) / np.diff(a)
    assert jumps.max() < 50.0
    csv = rep.trace_csv().splitlines()
    assert csv[0] == "a,d1,d2,value,branch"
    assert len(csv) == len(rep.trace) + 1


@pytest.mark.parametrize("m", [exponential(2.0), pareto(2.0, 2.0)])
def test_I2_is_dominated(m):
    for p in (PremiumParams(1.0, 1.0, 0.5, 2.0), PremiumParams(0.7, 1.0, 0.5, 5.0)):
        for frac in (0.2, 0.5, 0.9):
            ok, margin, nonincreasing = verify_I2_dominated(m, p, Distortion.tvar(0.2), frac * m.mean)
            assert ok and margin >= -1e-8
