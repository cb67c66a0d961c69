import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gpcert.errors import InvalidInterval
from gpcert.gaussian_integral import (
    MomentRectangle,
    critical_variance,
    max_gaussian_integral,
    max_gaussian_integral_vec,
    min_gaussian_integral,
    min_gaussian_integral_vec,
)
from gpcert.special import gaussian_mass


def _grid(a, b, rect, n=200):
    mu = np.linspace(rect.mean_low, rect.mean_high, n)
    var = np.linspace(rect.var_low, rect.var_high, n)
    M, V = np.meshgrid(mu, var)
    return gaussian_mass(a, b, M, V)


def _random_instance(rng):
    kind = rng.integers(4)
    a, b = np.sort(rng.normal(scale=2, size=2))
    if kind == 1:
        a = -np.inf
    elif kind == 2:
        b = np.inf
    ml = rng.normal(scale=2)
    vl = rng.uniform(0.01, 2)
    return a, b, MomentRectangle(ml, ml + rng.uniform(0, 2), vl, vl + rng.uniform(0, 2))


class TestMaxMin:
    def test_whole_line(self):
        rect = MomentRectangle(-1, 2, 0.5, 3)
        assert max_gaussian_integral(-np.inf, np.inf, rect)[0] == 1.0
        assert min_gaussian_integral(-np.inf, np.inf, rect)[0] == 1.0

    def test_standard_normal_mass(self):
        rect = MomentRectangle(0, 0, 1, 1)
        v, _ = max_gaussian_integral(-1.0, 1.0, rect)
        np.testing.assert_allclose(v, math.erf(1 / math.sqrt(2)), rtol=1e-15)
        assert min_gaussian_integral(-1.0, 1.0, rect)[0] == v

    def test_centre_inside_mean_range_uses_low_variance(self):
        rect = MomentRectangle(-0.5, 0.5, 0.1, 2.0)
        v, opt = max_gaussian_integral(-1.0, 2.0, rect)
        assert opt.mean == 0.5 and opt.var == 0.1
        assert v >= _grid(-1.0, 2.0, rect).max()

    def test_symmetric_tie_goes_to_lower_mean(self):
        rect = MomentRectangle(-1.0, 1.0, 0.5, 0.5)
        v, opt = min_gaussian_integral(-0.3, 0.3, rect)
        assert opt.mean == -1.0
        np.testing.assert_allclose(v, gaussian_mass(-0.3, 0.3, 1.0, 0.5), rtol=1e-15)

    def test_sandwich_and_attained(self):
        rng = np.random.default_rng(0)
        for _ in range(300):
            a, b, rect = _random_instance(rng)
            g = _grid(a, b, rect)
            vmax, omax = max_gaussian_integral(a, b, rect)
            vmin, omin = min_gaussian_integral(a, b, rect)
            assert vmin <= g.min() + 1e-12 and g.max() <= vmax + 1e-12
            assert vmax == gaussian_mass(a, b, omax.mean, omax.var)
            assert vmin == gaussian_mass(a, b, omin.mean, omin.var)
            assert rect.mean_low <= omax.mean <= rect.mean_high
            assert rect.var_low <= omax.var <= rect.var_high

    def test_complement_identity(self):
        rect = MomentRectangle(-0.4, 0.9, 0.3, 1.7)
        for a in (-1.0, 0.2, 2.5):
            up, _ = max_gaussian_integral(a, np.inf, rect)
            lo, _ = min_gaussian_integral(-np.inf, a, rect)
            np.testing.assert_allclose(up, 1.0 - lo, atol=1e-15)

    @settings(max_examples=100)
    @given(st.floats(-3, 3), st.floats(0.1, 3), st.floats(-3, 3), st.floats(0, 1), st.floats(0.05, 2), st.floats(0, 1))
    def test_monotone_in_rectangle(self, a, w, ml, dm, vl, dv):
        b = a + w
        small = MomentRectangle(ml, ml + dm, vl, vl + dv)
        big = MomentRectangle(ml - 0.5, ml + dm + 0.5, vl * 0.5, vl + dv + 1)
        assert max_gaussian_integral(a, b, big)[0] >= max_gaussian_integral(a, b, small)[0] - 1e-15
        assert min_gaussian_integral(a, b, big)[0] <= min_gaussian_integral(a, b, small)[0] + 1e-15

    def test_vectorised_matches_scalar(self):
        rng = np.random.default_rng(1)
        inst = [_random_instance(rng) for _ in range(50)]
        a = np.array([i[0] for i in inst])
        b = np.array([i[1] for i in inst])
        r = [i[2] for i in inst]
        args = [np.array([getattr(x, k) for x in r]) for k in ("mean_low", "mean_high", "var_low", "var_high")]
        vmax, _, _ = max_gaussian_integral_vec(a, b, *args)
        vmin, _, _ = min_gaussian_integral_vec(a, b, *args)
        for k in range(50):
            assert vmax[k] == max_gaussian_integral(a[k], b[k], r[k])[0]
            assert vmin[k] == min_gaussian_integral(a[k], b[k], r[k])[0]

    def test_invalid(self):
        with pytest.raises(InvalidInterval):
            MomentRectangle(1.0, 0.0, 1.0, 1.0)
        with pytest.raises(InvalidInterval):
            MomentRectangle(0.0, 1.0, 0.0, 1.0)
        with pytest.raises(InvalidInterval):
            max_gaussian_integral(1.0, 1.0, MomentRectangle(0, 0, 1, 1))


class TestCriticalVariance:
    def test_maximises_mass(self):
        a, b, mu = 1.0, 2.0, -0.5
        v = critical_variance(a, b, mu)
        vs = np.linspace(0.01, 10, 20001)
        best = vs[np.argmax(gaussian_mass(a, b, mu, vs))]
        assert abs(v - best) < 1e-3

    def test_short_interval_stable(self):
        # direct formula loses digits as b - a -> 0; the limit is (mu - a)^2
        v = critical_variance(1.0, 1.0 + 1e-12, 3.0)
        np.testing.assert_allclose(v, 4.0, rtol=1e-9)

    def test_infinite_and_inside(self):
        assert critical_variance(1.0, np.inf, 0.0) == np.inf
        assert math.isnan(critical_variance(0.0, 1.0, 0.5))
