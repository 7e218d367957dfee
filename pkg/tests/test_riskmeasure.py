import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from repremia.dist import exponential, pareto, tabulated
from repremia.errors import ConfigError, DomainError
from repremia.indemnity import Indemnity, complete_I1, complete_I2
from repremia.insurer_solver import i2_domain
from repremia.oracle import mc_rho
from repremia.premium import PremiumParams, insurer_total_transform, premium_transform
from repremia.pwl import PiecewiseLinear
from repremia.riskmeasure import (
    Distortion,
    g_eval,
    integral,
    rho_loss,
    rho_monotone_transform,
    rho_T_I1_closed,
    rho_T_I2_closed,
)

IDENT = PiecewiseLinear.identity()


def test_g_eval_examples():
    assert g_eval(Distortion.tvar(0.2), 0.1) == pytest.approx(0.5)
    assert g_eval(Distortion.power(0.5), 0.25) == pytest.approx(0.5)
    for d in (Distortion.tvar(0.2), Distortion.var(0.1), Distortion.power(0.3),
              Distortion.custom([[0, 0], [0.5, 0.8], [1, 1]])):
        assert g_eval(d, 1.0) == 1.0
        assert g_eval(d, 0.0) == 0.0


def test_concavity_flags():
    assert Distortion.tvar(0.1).concave and Distortion.power(0.4).concave
    assert not Distortion.var(0.1).concave
    assert Distortion.custom([[0, 0], [0.2, 0.6], [1, 1]]).concave
    assert not Distortion.custom([[0, 0], [0.5, 0.1], [1, 1]]).concave


def test_distortion_validation():
    with pytest.raises(DomainError):
        Distortion.tvar(0.0)
    with pytest.raises(DomainError):
        Distortion.custom([[0, 0], [0.5, 0.7], [1, 0.9]])
    with pytest.raises(ConfigError, match="insurer.level"):
        Distortion.from_config({"kind": "tvar", "alpha": 0.1, "level": 2}, "insurer")


def test_identity_examples(expo, par):
    assert rho_monotone_transform(Distortion.tvar(0.2), expo, IDENT) == pytest.approx(2 * (1 + math.log(5)), rel=1e-13)
    assert rho_monotone_transform(Distortion.var(0.1), par, IDENT) == pytest.approx(2 * (0.1**-0.5 - 1), rel=1e-13)
    assert rho_monotone_transform(Distortion.power(0.5), expo, PiecewiseLinear.constant(3.2)) == 3.2


def test_rejects_decreasing_transform(expo):
    with pytest.raises(DomainError):
        rho_monotone_transform(Distortion.tvar(0.2), expo, -IDENT)


def test_power_closed_forms_vs_quadrature():
    from scipy.integrate import quad

    for m in (exponential(1.7), pareto(2.0, 2.0), pareto(1.0, 3.0)):
        for beta in (0.3, 0.5, 1.0 / m.zeta if m.kind == "pareto" else 0.9):
            d = Distortion.power(beta)
            for lo, hi in ((0.0, 1.0), (0.5, 4.0), (2.0, 30.0)):
                ref, _ = quad(lambda x: m.survival(x) ** beta, lo, hi, epsabs=1e-13)
                assert integral(d, m, lo, hi) == pytest.approx(ref, rel=1e-9)


def test_power_pareto_heavy_tail_is_infinite(par):
    assert math.isinf(integral(Distortion.power(0.4), par, 0.0, math.inf))
    assert math.isfinite(integral(Distortion.power(0.4), par, 0.0, 100.0))


def test_tabulated_power_and_custom_vs_monte_carlo():
    m = tabulated([[0.0, 1.0], [1.0, 0.6], [2.5, 0.25], [5.0, 0.05]])
    f = PiecewiseLinear.from_breakpoints([(0.5, 1.0), (3.0, 0.5)])
    x = m.sample(10**6, seed=21)
    for d in (Distortion.power(0.6), Distortion.custom([[0, 0], [0.1, 0.4], [0.5, 0.8], [1, 1]]), Distortion.tvar(0.15)):
        exact = rho_monotone_transform(d, m, f)
        est = mc_rho(d, f, m, samples=x)
        assert est.covers(exact), (d, exact, est)


def test_custom_matches_tvar():
    # a custom table through (alpha, 1) reproduces TVaR exactly
    m = pareto(2.0, 3.0)
    c = Distortion.custom([[0, 0], [0.2, 1], [1, 1]])
    for lo, hi in ((0.0, 1.0), (0.3, math.inf), (2.0, 9.0)):
        assert integral(c, m, lo, hi) == pytest.approx(integral(Distortion.tvar(0.2), m, lo, hi), rel=1e-12)


def test_tvar_dominates_mean():
    for m in (exponential(2.0), pareto(2.0, 2.0)):
        for alpha in (0.05, 0.5, 1.0):
            assert rho_loss(Distortion.tvar(alpha), m) >= m.mean - 1e-12


def test_homogeneity_and_translation(expo):
    g = Distortion.tvar(0.15)
    f = PiecewiseLinear.from_breakpoints([(0.3, 0.5), (1.0, 1.0), (4.0, 0.0)])
    base = rho_monotone_transform(g, expo, f)
    for c, k in ((0.5, 1.0), (2.0, -3.0), (4.0, 0.25)):
        assert rho_monotone_transform(g, expo, f.scale(c) + k) == c * base + k


def test_closed_forms_small_a_limit(expo, scheme, tvar02):
    a = 1e-9
    d1 = expo.invert_stop_loss(a) * 0.5
    assert rho_T_I1_closed(tvar02, expo, scheme, a, d1, None) == pytest.approx(rho_loss(tvar02, expo), abs=1e-6)


def test_I1_closed_stop_loss_example(expo, scheme, tvar02):
    d_tilde = expo.invert_stop_loss(1.0)
    closed = rho_T_I1_closed(tvar02, expo, scheme, 1.0, d_tilde, d_tilde + 0.5)
    generic = rho_monotone_transform(tvar02, expo, insurer_total_transform(scheme, Indemnity.stop_loss(d_tilde), expo))
    assert closed == pytest.approx(generic, abs=1e-10)


def test_full_cession_closed_vs_generic(expo):
    p = PremiumParams(1.0, 1.0, 1.0, 2.0)
    g = Distortion.tvar(0.3)
    generic = rho_monotone_transform(g, expo, insurer_total_transform(p, Indemnity.full(), expo))
    assert rho_T_I1_closed(g, expo, p, 2.0, 0.0, 2.0) == pytest.approx(generic, abs=1e-10)


def test_I2_merged_layers_equal_stop_loss(expo, scheme, tvar02):
    lo, hi = i2_domain(expo, scheme, 1.0)
    I = complete_I2(expo, scheme, 1.0, hi)
    d2 = I.layout["d2"]
    assert d2 == pytest.approx(hi + 2.0, abs=1e-8)
    generic = rho_monotone_transform(tvar02, expo, insurer_total_transform(scheme, Indemnity.stop_loss(hi), expo))
    assert rho_T_I2_closed(tvar02, expo, scheme, 1.0, hi, d2) == pytest.approx(generic, abs=1e-8)


def test_I2_rejects_non_concave(expo, scheme):
    with pytest.raises(DomainError):
        rho_T_I2_closed(Distortion.var(0.2), expo, scheme, 1.0, 0.6, 7.0)


@settings(max_examples=100, deadline=None)
@given(
    st.sampled_from(["exp", "par"]),
    st.sampled_from([Distortion.tvar(0.1), Distortion.tvar(0.35), Distortion.power(0.7)]),
    st.floats(0.05, 1.0),
    st.floats(0.05, 0.95),
    st.floats(0.0, 1.0),
    st.booleans(),
)
def test_comonotonic_additivity(kind, g, delta, frac, u, use_i2):
    m = exponential(2.0) if kind == "exp" else pareto(2.0, 3.0)
    p = PremiumParams(delta, 1.0, max(1.0 - delta, 0.4), 2.5)
    a = frac * m.mean
    if use_i2:
        lo, hi = i2_domain(m, p, a)
        I = complete_I2(m, p, a, lo + u * (hi - lo))
    else:
        I = complete_I1(m, p, a, u * m.invert_stop_loss(a))
    T = insurer_total_transform(p, I, m)
    R = IDENT - I.pl
    P = premium_transform(p, I, m)
    whole = rho_monotone_transform(g, m, T)
    parts = rho_monotone_transform(g, m, R) + rho_monotone_transform(g, m, P)
    assert whole == pytest.approx(parts, abs=1e-8)
