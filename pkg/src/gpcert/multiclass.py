"""Bounds on softmax class probabilities over an input box.

The latent space R^C is cut into hyper-rectangles.  On each cell the softmax
of class ``c`` is bounded by its values at two vertices, and the Gaussian
mass of the cell is bounded by a chain of one-dimensional conditional
masses whose moments are enclosed with interval arithmetic.

Class ids are 1-based throughout.
"""

from dataclasses import dataclass
import itertools

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import InfiniteRect, SingularConditioning
from .gaussian_integral import max_gaussian_integral_vec, min_gaussian_integral_vec
from .latent import VARIANCE_FLOOR, MulticlassLatentBounds

# ----------------------------------------------------------------------------
# softmax extrema
# ----------------------------------------------------------------------------


def _extreme_vertices(lo, hi, c):
    # c is 0-based here; softmax_c increases in f_c and decreases in every other f_i
    idx = np.arange(lo.shape[-1])
    vmax = np.where(idx == c, hi, lo)
    vmin = np.where(idx == c, lo, hi)
    return vmin, vmax


def softmax_at(f, c):
    """softmax_c(f) = 1 / (1 + sum_{i != c} exp(f_i - f_c)), with infinite entries as limits."""
    f = np.asarray(f, dtype=float)
    fc = f[..., c : c + 1]
    with np.errstate(over="ignore", invalid="ignore"):
        e = np.exp(f - fc)
    others = np.delete(e, c, axis=-1)
    return 1.0 / (1.0 + others.sum(axis=-1))


def softmax_extrema(lo, hi, c):
    """``(min, max, argmin vertex, argmax vertex)`` of softmax class ``c`` on a finite box."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise InfiniteRect("softmax_extrema needs a finite rectangle")
    if np.any(lo > hi):
        raise ValueError("rectangle has lower > upper")
    vmin, vmax = _extreme_vertices(lo, hi, c - 1)
    return float(softmax_at(vmin, c - 1)), float(softmax_at(vmax, c - 1)), vmin, vmax


def softmax_extrema_cells(lo, hi, c):
    """Vectorised extrema over cells (rows), allowing infinite faces."""
    vmin, vmax = _extreme_vertices(lo, hi, c - 1)
    return softmax_at(vmin, c - 1), softmax_at(vmax, c - 1)


# ----------------------------------------------------------------------------
# interval arithmetic
# ----------------------------------------------------------------------------


def _imul(al, ah, bl, bh):
    """Interval product with 0 * inf taken as 0."""
    with np.errstate(invalid="ignore"):
        cands = np.stack([al * bl, al * bh, ah * bl, ah * bh])
    cands = np.where(np.isnan(cands), 0.0, cands)
    return cands.min(axis=0), cands.max(axis=0)


def _isq(al, ah):
    lo = np.where((al <= 0) & (ah >= 0), 0.0, np.minimum(al * al, ah * ah))
    return lo, np.maximum(al * al, ah * ah)


def _idiv_pos(al, ah, bl, bh):
    # divisor interval strictly positive
    return _imul(al, ah, 1.0 / bh, 1.0 / bl)


def _interval_inverse(L, H):
    """Entrywise enclosure of the inverse of every symmetric matrix in ``[L, H]`` (n <= 3)."""
    n = L.shape[0]
    if n == 1:
        if L[0, 0] <= 0:
            raise SingularConditioning("variance interval reaches zero")
        return 1.0 / H, 1.0 / L
    if n == 2:
        a = (L[0, 0], H[0, 0])
        d = (L[1, 1], H[1, 1])
        b = (L[0, 1], H[0, 1])
        b2 = _isq(*b)
        ad = _imul(*a, *d)
        det = (ad[0] - b2[1], ad[1] - b2[0])
        if det[0] <= 0:
            raise SingularConditioning("determinant interval contains zero")
        adj_l = np.array([[d[0], -b[1]], [-b[1], a[0]]])
        adj_h = np.array([[d[1], -b[0]], [-b[0], a[1]]])
        return _idiv_pos(adj_l, adj_h, det[0], det[1])
    if n == 3:
        def entry(i, j):
            return L[i, j], H[i, j]

        def minor(r, c):
            rows = [i for i in range(3) if i != r]
            cols = [j for j in range(3) if j != c]
            p = _imul(*entry(rows[0], cols[0]), *entry(rows[1], cols[1]))
            q = _imul(*entry(rows[0], cols[1]), *entry(rows[1], cols[0]))
            return p[0] - q[1], p[1] - q[0]

        cof_l = np.empty((3, 3))
        cof_h = np.empty((3, 3))
        for r in range(3):
            for c in range(3):
                ml, mh = minor(r, c)
                if (r + c) % 2:
                    ml, mh = -mh, -ml
                cof_l[r, c], cof_h[r, c] = ml, mh
        det_l = det_h = 0.0
        for c in range(3):
            p = _imul(*entry(0, c), cof_l[0, c], cof_h[0, c])
            det_l += p[0]
            det_h += p[1]
        if det_l <= 0:
            raise SingularConditioning("determinant interval contains zero")
        # adjugate is the transposed cofactor matrix
        return _idiv_pos(cof_l.T, cof_h.T, det_l, det_h)
    raise ValueError("interval inverse implemented for blocks up to 3x3")


@dataclass
class ConditionalMomentIntervals:
    index: int  # 0-based
    mean_low: np.ndarray
    mean_high: np.ndarray
    var_low: float
    var_high: float


def _coefficients(mb, i, I):
    # enclosure of Sigma_{i,I} Sigma_{I,I}^{-1} as a row of intervals
    inv_l, inv_h = _interval_inverse(mb.cov_low[np.ix_(I, I)], mb.cov_high[np.ix_(I, I)])
    sl, sh = mb.cov_low[i, I], mb.cov_high[i, I]
    k = len(I)
    vl = np.zeros(k)
    vh = np.zeros(k)
    for j in range(k):
        for t in range(k):
            p = _imul(sl[t], sh[t], inv_l[t, j], inv_h[t, j])
            vl[j] += p[0]
            vh[j] += p[1]
    return vl, vh


def conditional_moment_intervals(mb, i, tail_low, tail_high):
    """Enclosures of the conditional mean/variance of latent ``i`` given latents ``i+1..C-1``.

    ``i`` is 0-based; ``tail_low``/``tail_high`` bound the conditioning
    latents (shape ``(..., C-1-i)`` so several cells can be processed at
    once).  Raises SingularConditioning when the conditioning block cannot be
    shown invertible.
    """
    C = mb.mean_low.size
    I = list(range(i + 1, C))
    tail_low = np.asarray(tail_low, dtype=float)
    tail_high = np.asarray(tail_high, dtype=float)
    if not I:
        shape = tail_low.shape[:-1]
        return ConditionalMomentIntervals(
            i,
            np.full(shape, mb.mean_low[i]),
            np.full(shape, mb.mean_high[i]),
            max(mb.cov_low[i, i], VARIANCE_FLOOR),
            max(mb.cov_high[i, i], VARIANCE_FLOOR),
        )
    vl, vh = _coefficients(mb, i, I)
    # f_I - mu_I
    dl = tail_low - mb.mean_high[I]
    dh = tail_high - mb.mean_low[I]
    ml = np.full(tail_low.shape[:-1], mb.mean_low[i])
    mh = np.full(tail_low.shape[:-1], mb.mean_high[i])
    for j in range(len(I)):
        p = _imul(vl[j], vh[j], dl[..., j], dh[..., j])
        ml = ml + p[0]
        mh = mh + p[1]
    # Sigma^f = Sigma_ii - v . Sigma_{I,i}
    ql = qh = 0.0
    for j, t in enumerate(I):
        p = _imul(vl[j], vh[j], mb.cov_low[t, i], mb.cov_high[t, i])
        ql += p[0]
        qh += p[1]
    var_low = max(mb.cov_low[i, i] - qh, VARIANCE_FLOOR)
    var_high = max(min(mb.cov_high[i, i] - ql, mb.cov_high[i, i]), var_low)
    return ConditionalMomentIntervals(i, ml, mh, var_low, var_high)


def box_prob_bounds(mb, lo, hi):
    """Bounds ``(lower on min, upper on max)`` of the Gaussian mass of cells ``[lo, hi]``.

    ``lo``/``hi`` have shape ``(C,)`` or ``(n_cells, C)``.  Factors whose
    conditioning block is not provably invertible fall back to [0, 1].
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    single = lo.ndim == 1
    lo = np.atleast_2d(lo)
    hi = np.atleast_2d(hi)
    C = lo.shape[1]
    lower = np.ones(lo.shape[0])
    upper = np.ones(lo.shape[0])
    for i in range(C - 1, -1, -1):
        a, b = lo[:, i], hi[:, i]
        full = (a == -np.inf) & (b == np.inf)
        try:
            cm = conditional_moment_intervals(mb, i, lo[:, i + 1 :], hi[:, i + 1 :])
        except SingularConditioning:
            lower = np.where(full, lower, 0.0)
            continue
        aa = np.where(full, -1.0, a)
        bb = np.where(full, 1.0, b)
        mx, _, _ = max_gaussian_integral_vec(aa, bb, cm.mean_low, cm.mean_high, cm.var_low, cm.var_high)
        mn, _, _ = min_gaussian_integral_vec(aa, bb, cm.mean_low, cm.mean_high, cm.var_low, cm.var_high)
        upper = upper * np.where(full, 1.0, mx)
        lower = lower * np.where(full, 1.0, mn)
    lower = np.clip(lower, 0.0, 1.0)
    upper = np.clip(upper, 0.0, 1.0)
    if single:
        return float(lower[0]), float(upper[0])
    return lower, upper


# ----------------------------------------------------------------------------
# latent grid
# ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LatentGrid:
    """Cells of a tensor grid over R^C, each axis with two unbounded tail slabs."""

    edges: tuple  # per axis: finite cut points, ascending

    @property
    def n_classes(self):
        return len(self.edges)

    def axis_intervals(self, i):
        e = self.edges[i]
        lo = np.concatenate([[-np.inf], e])
        hi = np.concatenate([e, [np.inf]])
        return lo, hi

    def cells(self):
        """``(lo, hi)`` arrays of shape ``(n_cells, C)``."""
        per_axis = [self.axis_intervals(i) for i in range(self.n_classes)]
        idx = np.array(list(itertools.product(*[range(p[0].size) for p in per_axis])))
        lo = np.column_stack([per_axis[i][0][idx[:, i]] for i in range(self.n_classes)])
        hi = np.column_stack([per_axis[i][1][idx[:, i]] for i in range(self.n_classes)])
        return lo, hi

    @property
    def n_cells(self):
        return int(np.prod([e.size + 1 for e in self.edges]))


def build_latent_grid(mb, cells_per_axis, width=6.0, spread=1.5):
    """Grid spanning each mean interval widened by ``width`` standard deviations.

    Edges sit at quantiles of a normal ``spread`` times wider than the
    latent marginal, so cells are fine where the mass is and coarse in the
    tails.  Edges below the centre hang off ``mean_low`` and the others off
    ``mean_high``; any tiling is valid, this one just keeps the bound tight.
    """
    if cells_per_axis < 1:
        raise ValueError("cells_per_axis must be at least 1")
    tail = ndtr(-width / spread)
    t = spread * ndtri(np.linspace(tail, 1.0 - tail, cells_per_axis + 1))
    t[0], t[-1] = -width, width
    edges = []
    for i in range(mb.mean_low.size):
        s = np.sqrt(mb.cov_high[i, i])
        edges.append(np.where(t < 0, mb.mean_low[i] + s * t, mb.mean_high[i] + s * t))
    return LatentGrid(tuple(edges))


def pi_c_bounds_from_moments(mb, grid, c):
    """``(lower on pi^c_min, upper on pi^c_max)`` from moment enclosures."""
    lo, hi = grid.cells()
    smin, smax = softmax_extrema_cells(lo, hi, c)
    plo, phi = box_prob_bounds(mb, lo, hi)
    lower = float(np.clip(smin @ plo, 0.0, 1.0))
    upper = float(np.clip(smax @ phi, 0.0, 1.0))
    return lower, upper


def pi_c_bounds(post, box, grid, c, mb=None):
    """Bounds on the minimum and maximum softmax probability of class ``c`` over the box.

    ``grid`` is a LatentGrid or a cells-per-axis count.
    """
    from .latent import latent_bounds_multiclass

    if mb is None:
        mb = latent_bounds_multiclass(post, box)
    if not isinstance(grid, LatentGrid):
        grid = build_latent_grid(mb, int(grid))
    return pi_c_bounds_from_moments(mb, grid, c)


def point_moments(mean, cov):
    """Degenerate moment enclosure around exact moments."""
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    return MulticlassLatentBounds(mean.copy(), mean.copy(), cov.copy(), cov.copy(), [])
