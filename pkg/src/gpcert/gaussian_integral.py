"""Extremes of a 1-D Gaussian interval probability over a mean/variance rectangle.

For fixed variance the mass of ``[a, b]`` is unimodal in the mean with peak at
the interval centre, and for fixed mean it is unimodal in the variance.  Both
extremes are therefore attained at points that can be written down directly;
no search is involved.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInterval
from .special import gaussian_mass


@dataclass(frozen=True)
class MomentRectangle:
    mean_low: float
    mean_high: float
    var_low: float
    var_high: float

    def __post_init__(self):
        if not self.mean_low <= self.mean_high:
            raise InvalidInterval(f"mean interval [{self.mean_low}, {self.mean_high}] is empty")
        if not 0.0 < self.var_low <= self.var_high:
            raise InvalidInterval(f"variance interval [{self.var_low}, {self.var_high}] is invalid")


@dataclass(frozen=True)
class OptimalParams:
    mean: float
    var: float
    centre: float  # midpoint of [a, b]
    critical_var: float = float("nan")  # variance maximising the mass at ``mean`` when mean is outside [a, b]


def critical_variance(a, b, mu):
    """Variance maximising the mass of ``[a, b]`` for a mean outside the interval.

    Closed form ``((mu-a)^2 - (mu-b)^2) / (2 log((mu-a)/(mu-b)))`` rewritten with
    ``log1p`` so it stays accurate when the interval is short relative to the
    distance.  Infinite endpoints give ``inf``.  NaN for means inside [a, b].
    """
    a, b, mu = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, mu)))
    p = mu - a
    q = mu - b
    out = np.full(mu.shape, np.nan)
    outside = (mu > b) | (mu < a)
    infinite = outside & ~(np.isfinite(a) & np.isfinite(b))
    out[infinite] = np.inf
    fin = outside & ~infinite
    if np.any(fin):
        w = (b - a)[fin]
        # mu within rounding of a gives log1p(-1) = -inf and the correct limit 0
        with np.errstate(divide="ignore"):
            out[fin] = w * (p[fin] + q[fin]) / (2.0 * np.log1p(w / q[fin]))
    return out if out.ndim else float(out)


def _check(a, b):
    if np.any(~(np.asarray(a) < np.asarray(b))):
        raise InvalidInterval("integration interval requires a < b")


def _centre(a, b):
    with np.errstate(invalid="ignore"):
        m = 0.5 * (a + b)
    # (-inf, inf) has no centre; any mean is optimal
    return np.where(np.isnan(m), 0.0, m)


def max_gaussian_integral_vec(a, b, mean_low, mean_high, var_low, var_high):
    """Vectorised maximum; returns ``(value, mean, var)`` arrays."""
    a, b, ml, mh, vl, vh = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (a, b, mean_low, mean_high, var_low, var_high))
    )
    _check(a, b)
    mu = np.clip(_centre(a, b), ml, mh)
    inside = (mu >= a) & (mu <= b)
    crit = critical_variance(a, b, np.where(inside, np.nan, mu))
    var = np.where(inside, vl, np.clip(np.nan_to_num(crit, nan=0.0, posinf=np.inf), vl, vh))
    return gaussian_mass(a, b, mu, var), mu, var


def min_gaussian_integral_vec(a, b, mean_low, mean_high, var_low, var_high):
    """Vectorised minimum; returns ``(value, mean, var)`` arrays."""
    a, b, ml, mh, vl, vh = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (a, b, mean_low, mean_high, var_low, var_high))
    )
    _check(a, b)
    c = _centre(a, b)
    with np.errstate(invalid="ignore"):
        # a half-line's centre is at infinity: the far end is the one facing away from it
        take_high = np.where(np.isinf(c), c < 0, np.abs(mh - c) > np.abs(ml - c))
    mu = np.where(take_high, mh, ml)
    at_low = gaussian_mass(a, b, mu, vl)
    at_high = gaussian_mass(a, b, mu, vh)
    use_high = at_high < at_low
    return np.where(use_high, at_high, at_low), mu, np.where(use_high, vh, vl)


def _params(a, b, mu, var):
    c = float(_centre(np.float64(a), np.float64(b)))
    crit = float(critical_variance(a, b, mu)) if (mu < a or mu > b) else float("nan")
    return OptimalParams(float(mu), float(var), c, crit)


def max_gaussian_integral(a, b, rect):
    """Upper bound (attained) of the mass of ``[a, b]`` over the rectangle."""
    val, mu, var = max_gaussian_integral_vec(a, b, rect.mean_low, rect.mean_high, rect.var_low, rect.var_high)
    return float(val), _params(a, b, float(mu), float(var))


def min_gaussian_integral(a, b, rect):
    """Lower bound (attained) of the mass of ``[a, b]`` over the rectangle."""
    val, mu, var = min_gaussian_integral_vec(a, b, rect.mean_low, rect.mean_high, rect.var_low, rect.var_high)
    return float(val), _params(a, b, float(mu), float(var))
