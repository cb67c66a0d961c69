"""Dense linear algebra and small LP/QP solvers.

Everything here works on small dense problems (at most a few hundred
variables).  The simplex and Jacobi kernels are numba-compiled unless
``GPCERT_DISABLE_NUMBA=1``.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize

from ._jit import njit
from .errors import Infeasible, NonConvergence, NotPositiveDefinite, Unbounded

SYM_TOL = 1e-12

# simplex status codes
_OPTIMAL, _INFEASIBLE, _UNBOUNDED, _ITERATION_LIMIT = 0, 1, 2, 3


def cholesky_factor(m):
    """Lower-triangular ``L`` with ``L @ L.T == m``.

    Raises NotPositiveDefinite when a pivot is not strictly positive.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("cholesky_factor expects a square matrix")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None


def cho_solve(chol, rhs):
    return scipy.linalg.cho_solve((chol, True), rhs, check_finite=False)


# ----------------------------------------------------------------------------
# Symmetric eigendecomposition (cyclic Jacobi)
# ----------------------------------------------------------------------------


@njit
def _jacobi_kernel(a, tol, max_sweeps):
    n = a.shape[0]
    A = a.copy()
    V = np.eye(n)
    scale = np.sqrt(np.sum(A * A))
    if scale == 0.0:
        return A, V, 0
    for sweep in range(max_sweeps + 1):
        off = 0.0
        for p in range(n):
            for q in range(n):
                if p != q:
                    off += A[p, q] * A[p, q]
        if np.sqrt(off) <= tol * scale:
            return A, V, sweep
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + np.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = A[k, p]
                    akq = A[k, q]
                    A[k, p] = c * akp - s * akq
                    A[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = A[p, k]
                    aqk = A[q, k]
                    A[p, k] = c * apk - s * aqk
                    A[q, k] = s * apk + c * aqk
                for k in range(n):
                    vkp = V[k, p]
                    vkq = V[k, q]
                    V[k, p] = c * vkp - s * vkq
                    V[k, q] = s * vkp + c * vkq
    return A, V, -1


def sym_eigen(m, method="auto", tol=1e-12, max_sweeps=100):
    """Eigendecomposition of a symmetric matrix, eigenvalues sorted descending.

    ``method="jacobi"`` runs cyclic Jacobi; ``"lapack"`` calls ``numpy.linalg.eigh``;
    ``"auto"`` uses Jacobi up to 64x64 and LAPACK above.

    Returns ``(U, lam)`` with ``m == U @ diag(lam) @ U.T``.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("sym_eigen expects a square matrix")
    if not np.allclose(m, m.T, rtol=0.0, atol=SYM_TOL * max(1.0, np.abs(m).max(initial=0.0))):
        raise ValueError("matrix is not symmetric")
    m = 0.5 * (m + m.T)
    if method == "auto":
        method = "jacobi" if m.shape[0] <= 64 else "lapack"
    if method == "jacobi":
        diag, vecs, sweeps = _jacobi_kernel(m, tol, max_sweeps)
        if sweeps < 0:
            raise NonConvergence(f"Jacobi did not converge in {max_sweeps} sweeps")
        lam = np.diag(diag).copy()
    elif method == "lapack":
        lam, vecs = np.linalg.eigh(m)
    else:
        raise ValueError(f"unknown method {method!r}")
    order = np.argsort(-lam, kind="stable")
    return vecs[:, order], lam[order]


# ----------------------------------------------------------------------------
# Linear programming: bounded-variable primal simplex
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class LpProblem:
    """min c.x  s.t.  A x <= b,  low <= x <= high."""

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    low: np.ndarray
    high: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        n = c.size
        A = np.asarray(self.A, dtype=float).reshape(-1, n)
        b = np.asarray(self.b, dtype=float).ravel()
        low = np.broadcast_to(np.asarray(self.low, dtype=float), (n,)).copy()
        high = np.broadcast_to(np.asarray(self.high, dtype=float), (n,)).copy()
        if b.size != A.shape[0]:
            raise ValueError("A and b have inconsistent row counts")
        if np.any(low > high):
            raise ValueError("variable box has low > high")
        if not np.all(np.isfinite(low)):
            raise ValueError("variable lower bounds must be finite")
        for name, val in (("c", c), ("A", A), ("b", b), ("low", low), ("high", high)):
            object.__setattr__(self, name, val)


@njit
def _pivot(T, d, r, j):
    piv = T[r, j]
    T[r, :] /= piv
    m = T.shape[0]
    for i in range(m):
        if i != r:
            f = T[i, j]
            if f != 0.0:
                T[i, :] -= f * T[r, :]
    f = d[j]
    if f != 0.0:
        d -= f * T[r, :]


@njit
def _simplex_phase(T, basis, value, lower, upper, at_upper, is_basic, cost, max_iter, opt_tol):
    m, ncol = T.shape
    d = cost.copy()
    for i in range(m):
        cb = cost[basis[i]]
        if cb != 0.0:
            d -= cb * T[i, :]
    for i in range(m):
        d[basis[i]] = 0.0
    bland = False
    degenerate_run = 0
    ptol = 1e-11
    for it in range(max_iter):
        # entering variable
        j = -1
        best = 0.0
        for k in range(ncol):
            if is_basic[k] or upper[k] <= lower[k]:
                continue
            dk = d[k]
            if at_upper[k]:
                score = dk if dk > opt_tol else 0.0
            else:
                score = -dk if dk < -opt_tol else 0.0
            if score > 0.0:
                if bland:
                    j = k
                    break
                if score > best:
                    best = score
                    j = k
        if j < 0:
            return _OPTIMAL, it
        direction = -1.0 if at_upper[j] else 1.0
        theta = upper[j] - lower[j]
        r = -1
        for i in range(m):
            alpha = -direction * T[i, j]
            bi = basis[i]
            if alpha < -ptol:
                lim = (value[bi] - lower[bi]) / (-alpha)
            elif alpha > ptol:
                if upper[bi] == np.inf:
                    continue
                lim = (upper[bi] - value[bi]) / alpha
            else:
                continue
            if lim < 0.0:
                lim = 0.0
            if r < 0 or lim < theta - 1e-14:
                if lim < theta or r < 0 and lim <= theta:
                    theta = lim
                    r = i
            elif bland and abs(lim - theta) <= 1e-14 and r >= 0 and bi < basis[r]:
                r = i
        if theta == np.inf:
            return _UNBOUNDED, it
        if theta <= 1e-12:
            degenerate_run += 1
            if degenerate_run > 50:
                bland = True
        else:
            degenerate_run = 0
        for i in range(m):
            value[basis[i]] -= direction * T[i, j] * theta
        value[j] += direction * theta
        if r < 0:
            at_upper[j] = not at_upper[j]
            value[j] = upper[j] if at_upper[j] else lower[j]
            continue
        leaving = basis[r]
        alpha_r = -direction * T[r, j]
        if alpha_r < 0.0:
            value[leaving] = lower[leaving]
            at_upper[leaving] = False
        else:
            value[leaving] = upper[leaving]
            at_upper[leaving] = True
        is_basic[leaving] = False
        _pivot(T, d, r, j)
        d[j] = 0.0
        basis[r] = j
        is_basic[j] = True
        at_upper[j] = False
    return _ITERATION_LIMIT, max_iter


@njit
def _simplex_kernel(c, A, b, lo, hi, start_upper, max_iter):
    m, n = A.shape
    x0 = np.empty(n)
    for j in range(n):
        x0[j] = hi[j] if start_upper[j] else lo[j]
    res = b - A @ x0
    n_art = 0
    for i in range(m):
        if res[i] < 0.0:
            n_art += 1
    ncol = n + m + n_art
    T = np.zeros((m, ncol))
    lower = np.zeros(ncol)
    upper = np.full(ncol, np.inf)
    value = np.zeros(ncol)
    at_upper = np.zeros(ncol, dtype=np.bool_)
    is_basic = np.zeros(ncol, dtype=np.bool_)
    basis = np.empty(m, dtype=np.int64)
    for j in range(n):
        lower[j] = lo[j]
        upper[j] = hi[j]
        value[j] = x0[j]
        at_upper[j] = start_upper[j]
    k = 0
    for i in range(m):
        if res[i] >= 0.0:
            T[i, :n] = A[i, :]
            T[i, n + i] = 1.0
            basis[i] = n + i
            value[n + i] = res[i]
        else:
            col = n + m + k
            k += 1
            T[i, :n] = -A[i, :]
            T[i, n + i] = -1.0
            T[i, col] = 1.0
            basis[i] = col
            value[col] = -res[i]
        is_basic[basis[i]] = True
    cscale = 1.0
    for j in range(n):
        if abs(c[j]) > cscale:
            cscale = abs(c[j])
    iters = 0
    if n_art > 0:
        cost1 = np.zeros(ncol)
        cost1[n + m:] = 1.0
        status, used = _simplex_phase(T, basis, value, lower, upper, at_upper, is_basic, cost1, max_iter, 1e-10)
        iters += used
        if status == _ITERATION_LIMIT:
            return _ITERATION_LIMIT, value[:n].copy(), 0.0
        infeas = 0.0
        for col in range(n + m, ncol):
            infeas += value[col]
        bscale = 1.0
        for i in range(m):
            if abs(b[i]) > bscale:
                bscale = abs(b[i])
        if infeas > 1e-9 * bscale:
            return _INFEASIBLE, value[:n].copy(), 0.0
        for col in range(n + m, ncol):
            upper[col] = 0.0
            if not is_basic[col]:
                value[col] = 0.0
                at_upper[col] = False
    cost2 = np.zeros(ncol)
    cost2[:n] = c
    status, used = _simplex_phase(T, basis, value, lower, upper, at_upper, is_basic, cost2, max_iter - iters, 1e-10 * cscale)
    x = value[:n].copy()
    for j in range(n):
        if x[j] < lo[j]:
            x[j] = lo[j]
        elif x[j] > hi[j]:
            x[j] = hi[j]
    return status, x, c @ x


def solve_lp(p, start_upper=None, max_iter=None):
    """Solve ``min c.x s.t. A x <= b, low <= x <= high``.

    Returns ``(x, value)``.  ``start_upper`` optionally marks variables whose
    initial nonbasic position is their upper bound (a warm start hint that can
    avoid phase 1 entirely).
    """
    n = p.c.size
    if start_upper is None:
        start_upper = np.zeros(n, dtype=np.bool_)
    else:
        start_upper = np.asarray(start_upper, dtype=np.bool_) & np.isfinite(p.high)
    if max_iter is None:
        max_iter = 50 * (n + p.A.shape[0]) + 1000
    status, x, value = _simplex_kernel(p.c, p.A, p.b, p.low, p.high, start_upper, max_iter)
    if status == _INFEASIBLE:
        raise Infeasible("linear program has an empty feasible region")
    if status == _UNBOUNDED:
        raise Unbounded("linear program is unbounded below")
    if status == _ITERATION_LIMIT:
        raise NonConvergence("simplex iteration limit reached")
    return x, float(value)


# ----------------------------------------------------------------------------
# Convex quadratic programming: dual active set
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class QpProblem:
    """min 0.5 x'Qx + c.x  s.t.  A x <= b,  low <= x <= high  (Q PSD)."""

    Q: np.ndarray
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    low: np.ndarray
    high: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        n = c.size
        Q = np.asarray(self.Q, dtype=float).reshape(n, n)
        if not np.allclose(Q, Q.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(Q).max(initial=0.0))):
            raise ValueError("Q is not symmetric")
        A = np.asarray(self.A, dtype=float).reshape(-1, n)
        b = np.asarray(self.b, dtype=float).ravel()
        low = np.broadcast_to(np.asarray(self.low, dtype=float), (n,)).copy()
        high = np.broadcast_to(np.asarray(self.high, dtype=float), (n,)).copy()
        if b.size != A.shape[0]:
            raise ValueError("A and b have inconsistent row counts")
        if np.any(low > high):
            raise ValueError("variable box has low > high")
        for name, val in (("Q", 0.5 * (Q + Q.T)), ("c", c), ("A", A), ("b", b), ("low", low), ("high", high)):
            object.__setattr__(self, name, val)

    def objective(self, x):
        return 0.5 * x @ self.Q @ x + self.c @ x

    def constraint_rows(self):
        """All constraints stacked as ``G x <= h`` (finite bounds only)."""
        n = self.c.size
        eye = np.eye(n)
        up = np.isfinite(self.high)
        lo = np.isfinite(self.low)
        G = np.vstack([self.A, eye[up], -eye[lo]])
        h = np.concatenate([self.b, self.high[up], -self.low[lo]])
        return G, h


@dataclass
class QpResult:
    x: np.ndarray
    value: float
    multipliers: np.ndarray = field(repr=False)
    kkt_residual: float = 0.0
    iterations: int = 0
    method: str = "dual-active-set"


def kkt_residual(p, x, lam=None):
    """Max violation over stationarity, primal feasibility and complementarity.

    ``lam`` are multipliers for ``constraint_rows``; when None they are
    estimated by nonnegative least squares on the near-active constraints.
    """
    G, h = p.constraint_rows()
    g = p.Q @ x + p.c
    slack = h - G @ x
    scale = max(1.0, np.abs(g).max(initial=0.0))
    if lam is None:
        active = slack <= 1e-8 * max(1.0, np.abs(h).max(initial=0.0))
        lam = np.zeros(h.size)
        if np.any(active):
            sol, _ = scipy.optimize.nnls(G[active].T, -g)
            lam[active] = sol
    stat = np.abs(g + G.T @ lam).max(initial=0.0)
    primal = max(0.0, -slack.min(initial=0.0))
    comp = np.abs(lam * slack).max(initial=0.0)
    return max(stat / scale, primal, comp / scale)


@njit
def _givens_cols(J, i, j, c, s):
    # columns (i, j) <- (c*Ji + s*Jj, -s*Ji + c*Jj)
    for k in range(J.shape[0]):
        a = J[k, i]
        b = J[k, j]
        J[k, i] = c * a + s * b
        J[k, j] = -s * a + c * b


@njit
def _dual_active_set(Gm, g, C, b, max_iter, feas_tol):
    """Goldfarb-Idnani: min 0.5 x'Gx + g.x s.t. C x >= b, for G positive definite.

    Returns (status, x, active indices, multipliers, iterations).
    """
    n = Gm.shape[0]
    m = C.shape[0]
    L = np.linalg.cholesky(Gm)
    J = np.ascontiguousarray(np.linalg.inv(L).T)  # J J' = G^-1
    x = -(J @ (J.T @ g))
    R = np.zeros((n, n))
    active = np.empty(n, dtype=np.int64)
    u = np.zeros(n + 1)
    is_active = np.zeros(m, dtype=np.bool_)
    q = 0
    iters = 0
    d = np.empty(n)
    r = np.empty(n)
    z = np.empty(n)
    while True:
        # most violated constraint
        p = -1
        worst = 0.0
        for i in range(m):
            if is_active[i]:
                continue
            s = 0.0
            for k in range(n):
                s += C[i, k] * x[k]
            s -= b[i]
            if s < -feas_tol * (1.0 + abs(b[i])) and s < worst:
                worst = s
                p = i
        if p < 0:
            return 0, x, active[:q].copy(), u[:q].copy(), iters
        u[q] = 0.0
        while True:
            iters += 1
            if iters > max_iter:
                return 3, x, active[:q].copy(), u[:q].copy(), iters
            for k in range(n):
                acc = 0.0
                for t in range(n):
                    acc += J[t, k] * C[p, t]
                d[k] = acc
            znorm = 0.0
            for k in range(n):
                acc = 0.0
                for t in range(q, n):
                    acc += J[k, t] * d[t]
                z[k] = acc
                znorm += acc * acc
            for j in range(q - 1, -1, -1):
                acc = d[j]
                for t in range(j + 1, q):
                    acc -= R[j, t] * r[t]
                r[j] = acc / R[j, j]
            t1 = np.inf
            l = -1
            for j in range(q):
                if r[j] > 0.0:
                    ratio = u[j] / r[j]
                    if ratio < t1:
                        t1 = ratio
                        l = j
            cnorm = 0.0
            for k in range(n):
                cnorm += C[p, k] * C[p, k]
            t2 = np.inf
            if znorm > 1e-24 * cnorm:
                zc = 0.0
                sp = -b[p]
                for k in range(n):
                    zc += z[k] * C[p, k]
                    sp += C[p, k] * x[k]
                t2 = -sp / zc
                if t2 < 0.0:
                    t2 = 0.0
            t = min(t1, t2)
            if t == np.inf:
                return 1, x, active[:q].copy(), u[:q].copy(), iters
            if t2 < np.inf:
                for k in range(n):
                    x[k] += t * z[k]
            for j in range(q):
                u[j] -= t * r[j]
            u[q] += t
            if t2 <= t1:
                # add p: rotate d[q:] onto its first entry
                for j in range(n - 1, q, -1):
                    a = d[j - 1]
                    bb = d[j]
                    h = np.hypot(a, bb)
                    if h == 0.0:
                        continue
                    c = a / h
                    s = bb / h
                    d[j - 1] = h
                    d[j] = 0.0
                    _givens_cols(J, j - 1, j, c, s)
                for k in range(q + 1):
                    R[k, q] = d[k]
                active[q] = p
                is_active[p] = True
                q += 1
                break
            # drop active constraint l
            up_saved = u[q]
            is_active[active[l]] = False
            for j in range(l, q - 1):
                active[j] = active[j + 1]
                u[j] = u[j + 1]
                for k in range(n):
                    R[k, j] = R[k, j + 1]
            for k in range(n):
                R[k, q - 1] = 0.0
            for j in range(l, q - 1):
                a = R[j, j]
                bb = R[j + 1, j]
                h = np.hypot(a, bb)
                if h == 0.0:
                    continue
                c = a / h
                s = bb / h
                for k in range(j, q - 1):
                    ra = R[j, k]
                    rb = R[j + 1, k]
                    R[j, k] = c * ra + s * rb
                    R[j + 1, k] = -s * ra + c * rb
                _givens_cols(J, j, j + 1, c, s)
            q -= 1
            u[q] = up_saved


def _polish(p, G, h, act, x, lam):
    # re-solve the KKT system of the final working set without the ridge
    n = x.size
    Aw = G[act]
    K = np.block([[p.Q, Aw.T], [Aw, np.zeros((act.size, act.size))]])
    sol = np.linalg.lstsq(K, np.concatenate([-p.c, h[act]]), rcond=1e-13)[0]
    xp, lw = sol[:n], sol[n:]
    hscale = max(1.0, np.abs(h).max(initial=0.0))
    if np.all(G @ xp <= h + 1e-11 * hscale) and np.all(lw >= -1e-9) and p.objective(xp) <= p.objective(x):
        lam = np.zeros(h.size)
        lam[act] = np.maximum(lw, 0.0)
        return xp, lam
    return x, lam


def _feasible_start(p):
    n = p.c.size
    x = np.clip(np.zeros(n), p.low, p.high)
    if p.A.shape[0] == 0 or np.all(p.A @ x <= p.b + 1e-12):
        return x
    hi = np.where(np.isfinite(p.high), p.high, p.low + 1e6 * (1.0 + np.abs(p.low)))
    x, _ = solve_lp(LpProblem(np.zeros(n), p.A, p.b, p.low, hi))
    return x


def _projected_gradient(p, x, max_iter=20000):
    L = max(np.linalg.eigvalsh(p.Q).max(initial=0.0), 1e-12)
    best = x
    for k in range(max_iter):
        step = 1.0 / (L * (1.0 + 0.01 * k) ** 0.5)
        x_new = np.clip(x - step * (p.Q @ x + p.c), p.low, p.high)
        if np.linalg.norm(x_new - x) <= 1e-14 * max(1.0, np.linalg.norm(x)):
            return x_new
        x = x_new
        if p.objective(x) < p.objective(best):
            best = x
    return best


def _frank_wolfe(p, x, max_iter=2000):
    hi = np.where(np.isfinite(p.high), p.high, p.low + 1e6 * (1.0 + np.abs(p.low)))
    for k in range(max_iter):
        g = p.Q @ x + p.c
        s, _ = solve_lp(LpProblem(g, p.A, p.b, p.low, hi))
        d = s - x
        gap = -g @ d
        if gap <= 1e-10 * max(1.0, abs(p.objective(x))):
            break
        curv = d @ p.Q @ d
        step = min(1.0, gap / curv) if curv > 0 else 1.0
        x = x + step * d
    return x


def solve_convex_qp(p, max_iter=None, ridge=1e-9):
    """Minimize ``0.5 x'Qx + c.x`` over ``{A x <= b, low <= x <= high}``.

    Dual active-set method (Goldfarb-Idnani) started from the unconstrained
    optimum.  A PSD ``Q`` is made definite with a ridge of
    ``ridge * max(1, max|diag Q|)``; the reported KKT residual is for the
    original problem.  If the active-set run stalls or leaves a residual
    above 1e-6, falls back to projected gradient (box-only problems) or
    Frank-Wolfe (general constraints).
    """
    n = p.c.size
    G, h = p.constraint_rows()
    if max_iter is None:
        max_iter = 10 * (n + h.size) + 100
    eps = ridge * max(1.0, np.abs(np.diag(p.Q)).max(initial=0.0))
    status, x, act, u, iters = _dual_active_set(p.Q + eps * np.eye(n), p.c, -G, -h, max_iter, 1e-12)
    if status == 1:
        raise Infeasible("quadratic program has an empty feasible region")
    if status == 0:
        x = np.clip(x, p.low, p.high)
        lam = np.zeros(h.size)
        lam[act] = np.maximum(u, 0.0)
        x, lam = _polish(p, G, h, act, x, lam)
        res = kkt_residual(p, x, lam)
        if res <= 1e-6:
            return QpResult(x, float(p.objective(x)), lam, res, iters)
    x0 = _feasible_start(p)
    if p.A.shape[0] == 0:
        x = _projected_gradient(p, x0)
        method = "projected-gradient"
    else:
        x = _frank_wolfe(p, x0)
        method = "frank-wolfe"
    res = kkt_residual(p, x)
    if res > 1e-6:
        raise NonConvergence(f"QP fallback ({method}) stalled with KKT residual {res:.2e}")
    return QpResult(x, float(p.objective(x)), np.zeros(0), res, max_iter, method)
