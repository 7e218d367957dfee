import math

import numpy as np
import pytest
from scipy.optimize import brentq

from repremia.dist import exponential
from repremia.errors import DomainError
from repremia.indemnity import I1, Indemnity
from repremia.premium import (
    BAND,
    CAP,
    CONSTANT,
    FLOOR,
    PremiumParams,
    expected_premium,
    insurer_total,
    insurer_total_transform,
    premium_branch,
    premium_survival,
    realized_premium,
    reinsurer_net,
    reinsurer_net_transform,
)

LN2 = math.log(2.0)


def test_params_validation():
    with pytest.raises(DomainError):
        PremiumParams(0.3, 1.0, 0.5, 2.0)  # theta1 below theta0 - delta
    with pytest.raises(DomainError):
        PremiumParams(0.5, 1.0, 1.2, 2.0)
    with pytest.raises(DomainError):
        PremiumParams(0.5, 1.0, 0.8, 1.0)
    with pytest.raises(DomainError):
        PremiumParams(1.5, 1.0, 0.5, 2.0)
    assert PremiumParams(0.0, 1.0, 1.0, 2.0).is_constant
    # float noise in theta0 - delta must not flip feasibility
    p = PremiumParams(0.7, 1.0, 1.0 - 0.7, 2.0)
    assert p.floor_ratio == 0.0


def test_thresholds(scheme):
    t = scheme.thresholds(1.0)
    assert (t.d_I, t.u_I, t.floor, t.cap, t.benchmark) == (0.5, 2.0, 1.5, 3.0, 2.0)
    c = PremiumParams(0.0, 1.0, 1.0, 2.0).thresholds(1.0)
    assert c.d_I == c.u_I == math.inf and c.floor == c.cap == 2.0


def test_realized_premium_branches(scheme):
    t = scheme.thresholds(1.0)
    assert realized_premium(scheme, t, 0.2) == 1.5
    assert realized_premium(scheme, t, 1.0) == 2.0
    assert realized_premium(scheme, t, 2.5) == 3.0
    assert list(premium_branch(scheme, t, np.array([0.2, 1.0, 2.5]))) == [FLOOR, BAND, CAP]


def test_realized_premium_continuous_at_joins(scheme):
    t = scheme.thresholds(1.3)
    for y in (t.d_I, t.u_I):
        lo, hi = realized_premium(scheme, t, [y - 1e-12, y + 1e-12])
        assert abs(hi - lo) < 1e-11


def test_constant_branch():
    p = PremiumParams(0.0, 1.0, 1.0, 2.0)
    t = p.thresholds(0.7)
    y = np.array([0.0, 1.0, 100.0])
    assert np.all(realized_premium(p, t, y) == 1.4)
    assert set(premium_branch(p, t, y)) == {CONSTANT}


def test_insurer_total_examples(expo, scheme):
    zero = Indemnity.zero()
    t0 = scheme.thresholds(0.0)
    x = np.linspace(0, 10, 11)
    assert np.allclose(insurer_total(scheme, t0, zero, x), x)
    sl = Indemnity.stop_loss(1.0)
    t = scheme.thresholds(1.0)
    assert insurer_total(scheme, t, sl, 0.0) == 1.5
    assert insurer_total(scheme, t, sl, 2.0) == pytest.approx(3.0)


def test_reinsurer_net_examples(scheme):
    sl = Indemnity.stop_loss(1.0)
    t = scheme.thresholds(1.0)
    assert reinsurer_net(scheme, t, sl, 0.0) == -1.5
    assert reinsurer_net(scheme, t, sl, 4.0) == pytest.approx(0.0)
    # full pass-through of deviations: flat over the band
    band = reinsurer_net(scheme, t, sl, np.linspace(1.0 + 0.5, 1.0 + 2.0, 20))
    assert np.ptp(band) < 1e-12


@pytest.mark.parametrize("delta,theta1", [(1.0, 0.5), (0.6, 0.5), (0.3, 0.8), (0.0, 1.0)])
def test_accounting_identity_and_slopes(expo, delta, theta1):
    p = PremiumParams(delta, 1.0, theta1, 2.5)
    I = Indemnity.general([(0.4, 0.5), (1.0, 1.0), (2.0, 0.0), (3.5, 1.0)])
    T = insurer_total_transform(p, I, expo)
    N = reinsurer_net_transform(p, I, expo)
    x = np.concatenate([np.linspace(0, 20, 401), T.knots, N.knots])
    assert np.allclose(T(x) + N(x), x, atol=1e-12)
    assert T.is_nondecreasing and N.is_nondecreasing
    t = p.thresholds(I.ceded_mean(expo))
    assert np.allclose(T(x), insurer_total(p, t, I, x), atol=1e-12)
    assert N(0.0) == pytest.approx(-(1 + theta1) * t.a if delta > 0 else -t.benchmark)
    allowed = {1 - s for s in I.pl.slopes} | {1 - (1 - delta) * s for s in I.pl.slopes}
    for s in T.slopes:
        assert min(abs(s - v) for v in allowed) < 1e-12


def _i1_with_d2(expo, p, a, d2):
    width = p.floor_ratio * a
    d1 = brentq(lambda d: expo.layer_mean(d, d + width) + expo.stop_loss(d2) - a, 0.0, d2 - width, xtol=1e-15)
    return Indemnity.layered(I1, d1, width, d2)


def test_premium_survival_examples(expo, scheme):
    I = _i1_with_d2(expo, scheme, 1.0, 2.0)
    assert I.ceded_mean(expo) == pytest.approx(1.0, abs=1e-12)
    t = scheme.thresholds(1.0)
    S = premium_survival(scheme, t, I, expo)
    assert S(1.2) == 1.0
    assert S(3.0) == 0.0 and S(5.0) == 0.0
    assert S(2.0) == pytest.approx(math.exp(-1.25), abs=1e-14)


def test_premium_survival_monte_carlo(expo, scheme):
    I = _i1_with_d2(expo, scheme, 1.0, 2.0)
    t = scheme.thresholds(1.0)
    S = premium_survival(scheme, t, I, expo)
    prem = realized_premium(scheme, t, I(expo.sample(10**6, seed=4)))
    for z in (1.6, 2.0, 2.5, 2.9):
        emp = np.mean(prem > z)
        assert abs(emp - S(z)) <= 4 * math.sqrt(S(z) * (1 - S(z)) / prem.size)


def test_premium_survival_rejects_general(expo, scheme):
    I = Indemnity.general([(1.0, 0.5)])
    with pytest.raises(DomainError):
        premium_survival(scheme, scheme.thresholds(I.ceded_mean(expo)), I, expo)


def test_expected_premium_examples(expo, scheme):
    zero = Indemnity.zero()
    assert expected_premium(scheme, scheme.thresholds(0.0), zero, expo) == 0.0
    c = PremiumParams(0.0, 1.0, 1.0, 2.0)
    sl = Indemnity.stop_loss(2 * LN2)
    assert expected_premium(c, c.thresholds(1.0), sl, expo) == 2.0
    t = scheme.thresholds(1.0)
    ev = expected_premium(scheme, t, sl, expo)
    assert ev >= 1.5
    prem = realized_premium(scheme, t, sl(expo.sample(10**6, seed=9)))
    assert abs(prem.mean() - ev) <= 3 * prem.std() / math.sqrt(prem.size)
