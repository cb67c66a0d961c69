"""Bounds on the latent predictive mean and variance over an input box.

Every kernel value ``r_i(x) = s2 exp(-d_i(x))`` is enclosed by an interval
and by a pair of linear functions of the box coordinates.  The set of
``(x, r)`` satisfying those constraints is a polytope containing the graph of
``r`` over the box; every bound below is an optimum over that polytope.

The workhorse is :func:`linear_min`, the minimum of ``c.r`` over the
polytope.  For fixed ``x`` the optimal ``r_i`` is a clamp of a linear
function, so the objective is a sum of hinges ``max(p_i.x + q_i, s_i)``.
That convex piecewise-linear function is minimised either exactly (LP over
the hinges that change sign inside the box) or by a cheap analytic lower
bound.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .linalg import LpProblem, QpProblem, solve_convex_qp, solve_lp
from .errors import GPCertError

VARIANCE_FLOOR = 1e-12
SLACK = 1e-9
MEAN_LP_MAX_M = 200
ROTATION_LP_MAX_M = 16
QP_MAX_M = 60


@dataclass(frozen=True, eq=False)
class KernelRelaxation:
    """Interval and linear enclosures of the kernel vector over a box.

    Linear pieces act on the varying coordinates only (``x[var_idx]``):
    ``lo_w @ xv + lo_c <= r(x) <= up_w @ xv + up_c``.
    """

    r_low: np.ndarray
    r_high: np.ndarray
    lo_w: np.ndarray
    lo_c: np.ndarray
    up_w: np.ndarray
    up_c: np.ndarray
    var_idx: np.ndarray
    x_low: np.ndarray
    x_high: np.ndarray
    midpoint_r: np.ndarray

    @property
    def n(self):
        return self.r_low.size

    @property
    def k(self):
        return self.var_idx.size

    def lower_at(self, xv):
        return self.lo_w @ xv + self.lo_c

    def upper_at(self, xv):
        return self.up_w @ xv + self.up_c

    def stacked(self):
        """Constraint form ``A_r r + A_x xv <= b`` of the two linear enclosures."""
        eye = np.eye(self.n)
        A_r = np.vstack([eye, -eye])
        A_x = np.vstack([-self.up_w, self.lo_w])
        b = np.concatenate([self.up_c, -self.lo_c])
        return A_r, A_x, b

    @property
    def tight_low(self):
        # interval lower end tightened with the minimum of the linear lower piece
        return np.maximum(self.r_low, self.lo_c + _box_min(self.lo_w, self.x_low, self.x_high))

    @property
    def tight_high(self):
        return np.minimum(self.r_high, self.up_c + _box_max(self.up_w, self.x_low, self.x_high))


def _box_min(W, lo, hi):
    # row-wise minimum of W @ x over the box
    if W.shape[-1] == 0:
        return np.zeros(W.shape[:-1])
    return np.minimum(W * lo, W * hi).sum(axis=-1)


def _box_max(W, lo, hi):
    if W.shape[-1] == 0:
        return np.zeros(W.shape[:-1])
    return np.maximum(W * lo, W * hi).sum(axis=-1)


def _argmin_corner(g, lo, hi):
    return np.where(g > 0, lo, hi)


def relax_kernel_raw(inputs, theta, box):
    """Kernel relaxation for training ``inputs`` under kernel ``theta``."""
    X = np.asarray(inputs, dtype=float)
    s2 = theta.signal_variance
    ell2 = 2.0 * theta.lengthscales**2
    lo, hi = box.lower, box.upper
    v = box.varying
    d_lo_sq = (lo[None, :] - X) ** 2 / ell2
    d_hi_sq = (hi[None, :] - X) ** 2 / ell2
    inside = (X >= lo) & (X <= hi)
    t_min = np.where(inside, 0.0, np.minimum(d_lo_sq, d_hi_sq))
    t_max = np.maximum(d_lo_sq, d_hi_sq)
    fixed = np.ones(X.shape[1], dtype=bool)
    fixed[v] = False
    # pinned axes contribute exactly
    t_min[:, fixed] = d_lo_sq[:, fixed]
    t_max[:, fixed] = d_lo_sq[:, fixed]
    dL = t_min.sum(axis=1)
    dU = t_max.sum(axis=1)
    r_low = s2 * np.exp(-dU)
    r_high = s2 * np.exp(-dL)

    xl, xh = lo[v], hi[v]
    mid = 0.5 * (lo + hi)
    t_mid = (mid[None, :] - X) ** 2 / ell2
    d_mid = t_mid.sum(axis=1)
    Xv = X[:, v]
    e2 = ell2[v]

    # upper piece: secant of exp(-d) on [dL, dU] composed with the tangent plane of d at the box midpoint
    gap = dU - dL
    with np.errstate(invalid="ignore", divide="ignore"):
        slope = np.where(gap > 1e-300, np.exp(-dL) * np.expm1(-gap) / gap, -np.exp(-dL))
    grad = 2.0 * (mid[v][None, :] - Xv) / e2  # tangent-plane gradient of d
    up_w = s2 * slope[:, None] * grad
    up_c = s2 * (np.exp(-dL) + slope * (d_mid - grad @ mid[v] - dL))

    # lower piece: tangent of exp(-d) at the interval midpoint composed with parabola secants
    d0 = 0.5 * (dL + dU)
    sec_slope = ((xh[None, :] - Xv) ** 2 - (xl[None, :] - Xv) ** 2) / (e2 * (xh - xl))
    sec_const = (xl[None, :] - Xv) ** 2 / e2 - sec_slope * xl
    d_fixed = t_min[:, fixed].sum(axis=1)
    e0 = np.exp(-d0)
    lo_w = -s2 * e0[:, None] * sec_slope
    lo_c = s2 * e0 * (1.0 + d0 - d_fixed - sec_const.sum(axis=1))

    r_mid = s2 * np.exp(-d_mid)
    return KernelRelaxation(r_low, r_high, lo_w, lo_c, up_w, up_c, v, xl, xh, r_mid)


def relax_kernel(post, box, c=0):
    """Relaxation of the kernel vector of class ``c`` (binary models: ``c=0``)."""
    return relax_kernel_raw(post.inputs, post.kernels[c], box)


# ----------------------------------------------------------------------------
# min c.r over the relaxation polytope
# ----------------------------------------------------------------------------


def _hinges(relax, c):
    pos = c > 0
    neg = c < 0
    p = np.where(pos[:, None], c[:, None] * relax.lo_w, c[:, None] * relax.up_w)
    q = np.where(pos, c * relax.lo_c, c * relax.up_c)
    s = np.where(pos, c * relax.r_low, c * relax.r_high)
    keep = pos | neg
    return p[keep], q[keep], s[keep]


def _analytic_min(relax, c):
    cp = np.maximum(c, 0.0)
    cn = np.minimum(c, 0.0)
    interval = cp @ relax.tight_low + cn @ relax.tight_high
    g = cp @ relax.lo_w + cn @ relax.up_w
    const = cp @ relax.lo_c + cn @ relax.up_c
    xv = _argmin_corner(g, relax.x_low, relax.x_high)
    corner = const + g @ xv if g.size else const
    return max(interval, corner), xv


def linear_min(relax, c, exact=True):
    """Lower bound on ``min c.r`` over the relaxation polytope, plus a minimising ``xv``.

    With ``exact`` the hinge LP is solved; its value is never below the
    analytic bound, and the larger of the two is returned.
    """
    c = np.asarray(c, dtype=float)
    val, xv = _analytic_min(relax, c)
    if not exact or relax.k == 0:
        return val, xv
    p, q, s = _hinges(relax, c)
    hmin = q + _box_min(p, relax.x_low, relax.x_high) - s
    hmax = q + _box_max(p, relax.x_low, relax.x_high) - s
    lin = hmin >= 0.0
    amb = ~lin & (hmax > 0.0)
    const = np.sum(s[~lin]) + np.sum(q[lin])
    g = p[lin].sum(axis=0)
    if not np.any(amb):
        xl = _argmin_corner(g, relax.x_low, relax.x_high)
        lp_val = const + g @ xl
        return (lp_val, xl) if lp_val >= val else (val, xv)
    na = int(amb.sum())
    k = relax.k
    obj = np.concatenate([g, np.ones(na)])
    A = np.hstack([p[amb], -np.eye(na)])
    b = s[amb] - q[amb]
    lo = np.concatenate([relax.x_low, np.zeros(na)])
    hi = np.concatenate([relax.x_high, hmax[amb]])
    start_upper = np.concatenate([np.zeros(k, dtype=bool), np.ones(na, dtype=bool)])
    try:
        z, lp_val = solve_lp(LpProblem(obj, A, b, lo, hi), start_upper=start_upper)
    except GPCertError:
        return val, xv
    lp_val += const
    if lp_val >= val:
        return lp_val, z[:k]
    return val, xv


def linear_min_batch(relax, Cmat):
    """Analytic lower bounds on ``min c.r`` for every row ``c`` of ``Cmat``."""
    Cp = np.maximum(Cmat, 0.0)
    Cn = np.minimum(Cmat, 0.0)
    interval = Cp @ relax.tight_low + Cn @ relax.tight_high
    G = Cp @ relax.lo_w + Cn @ relax.up_w
    const = Cp @ relax.lo_c + Cn @ relax.up_c
    corner = const + _box_min(G, relax.x_low, relax.x_high)
    return np.maximum(interval, corner)


# ----------------------------------------------------------------------------
# mean and variance
# ----------------------------------------------------------------------------


@dataclass
class LatentBounds:
    mean_low: float
    mean_high: float
    var_low: float
    var_high: float
    witnesses: list = field(default_factory=list)

    def as_tuple(self):
        return self.mean_low, self.mean_high, self.var_low, self.var_high


def _use_lp(flag, M, limit):
    return (M <= limit) if flag is None else bool(flag)


def mean_bounds(post, relax, box=None, weights=None, use_lp=None, slack=SLACK):
    """``(mu_low, mu_high, witness_low, witness_high)`` for ``r(x).weights``."""
    w = post.weights if weights is None else weights
    exact = _use_lp(use_lp, w.size, MEAN_LP_MAX_M)
    lo, xl = linear_min(relax, w, exact)
    hi, xh = linear_min(relax, -w, exact)
    emb = box.embed if box is not None else (lambda z: z)
    return lo - slack, -hi + slack, emb(xl), emb(xh)


def _max_quadform_point(post, box, P, theta, iters=12):
    """Heuristic maximiser of ``r(x).P.r(x)`` over the box by projected gradient."""
    v = box.varying
    x = box.midpoint.copy()
    if v.size == 0:
        return x
    X = post.inputs
    ell2 = theta.lengthscales**2
    w = box.widths[v]
    step = 0.5 * np.max(w)
    best_x, best_f = x.copy(), -np.inf
    for _ in range(iters):
        diff = x[None, :] - X
        r = theta.signal_variance * np.exp(-0.5 * np.sum(diff**2 / ell2, axis=1))
        Pr = P @ r
        f = r @ Pr
        if f > best_f:
            best_f, best_x = f, x.copy()
        g = -2.0 * (Pr * r) @ (diff[:, v] / ell2[v])
        gn = np.max(np.abs(g / np.maximum(w, 1e-300)))
        if gn == 0.0:
            break
        x[v] = np.clip(x[v] + step * g / (gn * np.max(w)) * w / np.max(w), box.lower[v], box.upper[v])
        step *= 0.7
    return best_x


def quadform_min_lower(relax, P, r0, exact=True):
    """Lower bound on ``min r.P.r`` over the polytope via the tangent plane at ``r0``.

    Valid for any ``r0`` because the quadratic is convex.
    """
    g = 2.0 * (P @ r0)
    lin, xv = linear_min(relax, g, exact=exact)
    return lin - r0 @ P @ r0, xv


def variance_upper_bound(post, relax, box=None, use_qp=None, slack=SLACK, P=None, prior=None, theta=None):
    """``(var_high, witness)``: prior variance minus a lower bound on ``min r.P.r``.

    The lower bound is the tangent-plane certificate at a reference point:
    the convex QP optimum over the relaxation when the model is small,
    otherwise the kernel vector at a heuristic variance maximiser.
    """
    P = post.precision if P is None else P
    prior = post.prior_variance if prior is None else prior
    theta = post.kernel if theta is None else theta
    M = relax.n
    x_ref = None
    if box is not None:
        x_ref = _max_quadform_point(post, box, P, theta) if relax.k else box.midpoint
        diff = x_ref[None, :] - post.inputs
        r0 = theta.signal_variance * np.exp(-0.5 * np.sum(diff**2 / theta.lengthscales**2, axis=1))
    else:
        r0 = relax.midpoint_r
    if _use_lp(use_qp, M, QP_MAX_M) and relax.k:
        k = relax.k
        A_r, A_x, b = relax.stacked()
        Q = np.zeros((k + M, k + M))
        Q[k:, k:] = 2.0 * P
        qp = QpProblem(
            Q,
            np.zeros(k + M),
            np.hstack([A_x, A_r]),
            b,
            np.concatenate([relax.x_low, relax.r_low]),
            np.concatenate([relax.x_high, relax.r_high]),
        )
        try:
            res = solve_convex_qp(qp)
            r0 = res.x[k:]
        except GPCertError:
            pass
    lower, xv = quadform_min_lower(relax, P, r0, exact=M <= MEAN_LP_MAX_M)
    var_high = min(prior, prior - lower) + slack
    witness = x_ref if x_ref is not None else (box.embed(xv) if box is not None else xv)
    return var_high, witness


@dataclass(frozen=True, eq=False)
class RotatedRelaxation:
    """Eigen-rotated kernel vector ``u_i.r`` with its ranges and secants."""

    U: np.ndarray
    lam: np.ndarray
    low: np.ndarray
    high: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    @property
    def alpha_hat(self):
        return float(np.sum(self.alpha))


def rotate(relax, U, lam, use_lp=None):
    """Ranges of ``U.T r`` over the polytope and secants of ``-lam_i t^2``."""
    M = relax.n
    low = linear_min_batch(relax, U.T)
    high = -linear_min_batch(relax, -U.T)
    if _use_lp(use_lp, M, ROTATION_LP_MAX_M) and relax.k:
        for i in range(M):
            low[i] = max(low[i], linear_min(relax, U[:, i])[0])
            high[i] = min(high[i], -linear_min(relax, -U[:, i])[0])
    swap = low > high
    low[swap], high[swap] = 0.5 * (low[swap] + high[swap]), 0.5 * (low[swap] + high[swap])
    alpha = lam * low * high
    beta = -lam * (low + high)
    return RotatedRelaxation(U, lam, low, high, alpha, beta)


def variance_lower_bound(post, relax, box=None, use_lp=None, slack=SLACK, eigen=None, prior=None):
    """``(var_low, witness)`` from secant under-estimates in the eigenbasis of P."""
    U, lam = post.eigen if eigen is None else eigen
    prior = post.prior_variance if prior is None else prior
    lam = np.maximum(lam, 0.0)
    rot = rotate(relax, U, lam, use_lp)
    exact = _use_lp(use_lp, relax.n, MEAN_LP_MAX_M)
    lin, xv = linear_min(relax, U @ rot.beta, exact)
    val = prior + rot.alpha_hat + lin
    crude = prior - np.sum(lam * np.maximum(rot.low**2, rot.high**2))
    var_low = max(max(val, crude) - slack, VARIANCE_FLOOR)
    witness = box.embed(xv) if box is not None else xv
    return var_low, witness


def latent_bounds(post, box, use_lp=None, use_qp=None, slack=SLACK, need=("mean", "var_low", "var_high")):
    """Mean and variance bounds over ``box`` plus up to four witness points.

    ``need`` lets a caller skip a variance side it will not use; skipped sides
    get the trivially valid values ``VARIANCE_FLOOR`` and the prior variance.
    """
    relax = relax_kernel(post, box)
    mlo, mhi, wl, wh = mean_bounds(post, relax, box, use_lp=use_lp, slack=slack)
    wit = [wl, wh]
    vlo, vhi = VARIANCE_FLOOR, post.prior_variance + slack
    if "var_high" in need:
        vhi, w = variance_upper_bound(post, relax, box, use_qp=use_qp, slack=slack)
        wit.append(w)
    if "var_low" in need:
        vlo, w = variance_lower_bound(post, relax, box, use_lp=use_lp, slack=slack)
        wit.append(w)
    vlo = min(vlo, vhi)
    return LatentBounds(mlo, mhi, vlo, vhi, wit)


# ----------------------------------------------------------------------------
# multiclass: centred-form enclosures
# ----------------------------------------------------------------------------


@dataclass
class MulticlassLatentBounds:
    mean_low: np.ndarray
    mean_high: np.ndarray
    cov_low: np.ndarray
    cov_high: np.ndarray
    witnesses: list = field(default_factory=list)

    @property
    def n_classes(self):
        return self.mean_low.size


def _joint_linear_min(relaxes, coefs):
    """Analytic lower bound on ``min sum_c coefs[c].r_c`` over a shared box."""
    interval = 0.0
    g = 0.0
    const = 0.0
    for rel, c in zip(relaxes, coefs):
        cp, cn = np.maximum(c, 0.0), np.minimum(c, 0.0)
        interval += cp @ rel.tight_low + cn @ rel.tight_high
        g = g + cp @ rel.lo_w + cn @ rel.up_w
        const += cp @ rel.lo_c + cn @ rel.up_c
    rel = relaxes[0]
    corner = const + (_box_min(np.atleast_1d(g), rel.x_low, rel.x_high) if rel.k else 0.0)
    return max(interval, float(corner))


def latent_bounds_multiclass(post, box, use_lp=None, slack=SLACK):
    """Entrywise enclosures of the latent mean vector and covariance matrix.

    Means use the polytope minimum per class.  Each covariance entry
    ``delta s2_c - k_c.Q_cd.k_d`` is enclosed in centred form around the
    box midpoint: exact value there, a sound bound on the linear term over
    the polytope, and a spectral-norm bound on the quadratic remainder.
    """
    C = post.n_classes
    relaxes = [relax_kernel(post, box, c) for c in range(C)]
    mid = box.midpoint
    z0 = [post.kernel_vector(mid, c)[0] for c in range(C)]
    rad = []
    for rel, z in zip(relaxes, z0):
        dev = np.maximum(np.abs(rel.tight_low - z), np.abs(rel.tight_high - z))
        rad.append(math.sqrt(float(dev @ dev)))
    mlo = np.empty(C)
    mhi = np.empty(C)
    wit = []
    for c in range(C):
        lo, hi, wl, wh = mean_bounds(post, relaxes[c], box, weights=post.weights[c], use_lp=use_lp, slack=slack)
        mlo[c], mhi[c] = lo, hi
        wit += [wl, wh]
    clo = np.empty((C, C))
    chi = np.empty((C, C))
    for c in range(C):
        for d in range(c, C):
            Q = post.precision[c, d]
            q0 = z0[c] @ Q @ z0[d]
            gc = Q @ z0[d]
            gd = Q.T @ z0[c]
            # linear term (gc.(k_c - z_c) + gd.(k_d - z_d)) bounded over the shared box
            off = gc @ z0[c] + gd @ z0[d]
            lin_lo = _joint_linear_min([relaxes[c], relaxes[d]], [gc, gd]) - off
            lin_hi = -_joint_linear_min([relaxes[c], relaxes[d]], [-gc, -gd]) - off
            rem = np.linalg.norm(Q, 2) * rad[c] * rad[d]
            q_lo = q0 + lin_lo - rem
            q_hi = q0 + lin_hi + rem
            base = post.kernels[c].signal_variance if c == d else 0.0
            lo, hi = base - q_hi - slack, base - q_lo + slack
            if c == d:
                # posterior variance lies in (0, prior]
                lo, hi = max(lo, VARIANCE_FLOOR), min(hi, base + slack)
                hi = max(hi, lo)
            clo[c, d] = clo[d, c] = lo
            chi[c, d] = chi[d, c] = hi
    return MulticlassLatentBounds(mlo, mhi, clo, chi, wit)
