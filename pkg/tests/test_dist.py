import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from repremia.dist import exponential, from_config, pareto, tabulated
from repremia.errors import ConfigError, DomainError

LN2 = math.log(2.0)


def test_survival_values(expo, par):
    assert expo.survival(0.0) == 1.0
    assert par.survival(2.0) == pytest.approx(0.25, abs=1e-15)
    assert expo.survival(2.0) == pytest.approx(math.exp(-1.0), abs=1e-15)


def test_survival_rejects_negative(expo):
    with pytest.raises(DomainError):
        expo.survival(-1.0)


def test_quantile_values(expo, par):
    assert expo.quantile(0.5) == pytest.approx(2 * LN2, rel=1e-14)
    assert par.quantile(0.75) == pytest.approx(2.0, rel=1e-14)
    assert expo.quantile(1e-300) == pytest.approx(0.0, abs=1e-290)
    for bad in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(DomainError):
            expo.quantile(bad)


def test_layer_mean_values(expo, par):
    assert expo.layer_mean(0.0, math.inf) == pytest.approx(2.0, rel=1e-14)
    assert par.layer_mean(2.0, math.inf) == pytest.approx(1.0, rel=1e-14)
    assert par.layer_mean(3.0, 3.0) == 0.0
    with pytest.raises(DomainError):
        par.layer_mean(2.0, 1.0)


def test_stop_loss_values(expo, par):
    assert expo.stop_loss(0.0) == pytest.approx(2.0, rel=1e-14)
    assert expo.stop_loss(2 * LN2) == pytest.approx(1.0, rel=1e-14)
    assert par.stop_loss(2.0) == pytest.approx(1.0, rel=1e-14)


def test_invert_stop_loss_values(expo, par):
    assert expo.invert_stop_loss(2.0) == pytest.approx(0.0, abs=1e-14)
    assert expo.invert_stop_loss(1.0) == pytest.approx(2 * LN2, rel=1e-13)
    assert par.invert_stop_loss(1.0) == pytest.approx(2.0, rel=1e-13)
    for bad in (0.0, -1.0, 2.5):
        with pytest.raises(DomainError):
            expo.invert_stop_loss(bad)


def test_sample_contract(expo):
    with pytest.raises(DomainError):
        expo.sample(0, seed=1)
    a = expo.sample(1000, seed=7)
    assert np.array_equal(a, expo.sample(1000, seed=7))
    assert np.all(a >= 0)


def test_sample_mean_clt(expo):
    x = expo.sample(10**6, seed=1)
    assert abs(x.mean() - 2.0) <= 3 * 2.0 / math.sqrt(10**6)


@pytest.mark.parametrize("m", [exponential(2.0), pareto(2.0, 2.0), pareto(0.7, 3.5)])
def test_survival_quantile_roundtrip(m):
    p = np.linspace(0.01, 0.99, 99)
    assert np.max(np.abs(m.survival(m.quantile(p)) - (1 - p))) <= 1e-9


@pytest.mark.parametrize("m", [exponential(2.0), pareto(2.0, 2.0)])
def test_stop_loss_convex(m):
    d = np.linspace(0.0, 20.0, 401)
    sl = m.stop_loss(d)
    assert np.all(np.diff(sl, 2) >= -1e-9)
    assert np.all(np.diff(sl) <= 0)


@pytest.mark.parametrize("m", [exponential(2.0), pareto(2.0, 2.0)])
def test_stop_loss_monte_carlo(m):
    x = m.sample(10**6, seed=3)
    for d in (0.5, 2.0, 5.0):
        z = np.maximum(x - d, 0.0)
        assert abs(z.mean() - m.stop_loss(d)) <= 4 * z.std() / math.sqrt(x.size)


@settings(max_examples=200, deadline=None)
@given(
    st.floats(0.5, 4.0),
    st.floats(1.1, 5.0),
    st.lists(st.floats(0.0, 50.0), min_size=3, max_size=3),
)
def test_layer_additivity(eta, zeta, pts):
    m = pareto(eta, zeta)
    l, u, v = sorted(pts)
    total = m.layer_mean(l, u) + m.layer_mean(u, v)
    assert total == pytest.approx(m.layer_mean(l, v), abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.3, 5.0), st.floats(0.01, 0.999))
def test_invert_stop_loss_roundtrip(mu, frac):
    m = exponential(mu)
    a = frac * m.mean
    assert m.stop_loss(m.invert_stop_loss(a)) == pytest.approx(a, abs=1e-10 * m.mean)


def test_pareto_rejects_infinite_mean():
    with pytest.raises(DomainError):
        pareto(2.0, 1.0)


class TestTabulated:
    pts = [[0.0, 1.0], [1.0, 0.5], [2.0, 0.2], [4.0, 0.05]]

    def test_interpolation_and_tail(self):
        m = tabulated(self.pts)
        assert m.survival(1.0) == pytest.approx(0.5)
        assert m.survival(0.5) == pytest.approx(0.75)
        lam = 2.0 / math.log(0.2 / 0.05)
        assert m.survival(6.0) == pytest.approx(0.05 * math.exp(-2.0 / lam))
        assert m.ess_sup == math.inf

    def test_mean_includes_tail(self):
        m = tabulated(self.pts)
        lam = 2.0 / math.log(0.2 / 0.05)
        body = 0.75 + 0.35 + 0.25
        assert m.mean == pytest.approx(body + 0.05 * lam, rel=1e-12)

    def test_invert_stop_loss(self):
        m = tabulated(self.pts)
        for a in (0.01, 0.3, 1.0):
            assert m.stop_loss(m.invert_stop_loss(a)) == pytest.approx(a, abs=1e-10 * m.mean)

    def test_bounded(self):
        m = tabulated([[0.0, 1.0], [1.0, 0.4], [3.0, 0.0]])
        assert m.ess_sup == 3.0
        assert m.mean == pytest.approx(0.7 + 0.4)
        assert m.survival(5.0) == 0.0

    @pytest.mark.parametrize(
        "pts",
        [
            [[0.0, 0.9], [1.0, 0.5]],
            [[0.0, 1.0], [1.0, 0.5], [2.0, 0.5]],
            [[0.0, 1.0], [1.0, 0.5], [0.5, 0.2]],
            [[0.0, 1.0]],
        ],
    )
    def test_rejects_bad_tables(self, pts):
        with pytest.raises(DomainError):
            tabulated(pts)


def test_from_config_roundtrip():
    for m in (exponential(2.0), pareto(2.0, 3.0), tabulated(TestTabulated.pts)):
        assert from_config(m.to_config()) == m


def test_from_config_names_offending_key():
    with pytest.raises(ConfigError, match="loss.scale"):
        from_config({"kind": "exponential", "mu": 2.0, "scale": 1.0})
    with pytest.raises(ConfigError, match="loss.kind"):
        from_config({"kind": "lognormal"})
