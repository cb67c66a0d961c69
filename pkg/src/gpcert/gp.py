"""Gaussian process classifiers with a squared-exponential ARD kernel.

Binary models use a probit or logistic link and the Laplace approximation
(Newton iterations on the latent mode, then a Gaussian around it).  Multiclass
models use an independent GP per class with a softmax link.

Labels are class ids ``1..C``.  For binary models ``predict_prob(post, x, 1)``
is the probability of class 1 and class 2 is its complement.
"""

from dataclasses import dataclass
from functools import cached_property
import logging
import math

import numpy as np
import scipy.linalg
from scipy import special as sps
from scipy.spatial.distance import cdist
from scipy.stats import qmc

from .errors import (
    DimensionMismatch,
    LabelError,
    NonConvergence,
    NotPositiveDefinite,
    UnsupportedLikelihood,
    WrongLikelihood,
)
from .linalg import cholesky_factor, sym_eigen
from .special import norm_cdf

log = logging.getLogger(__name__)

GH_NODES = 64
QMC_POINTS = 2**13
QMC_SEED = 20190501
JITTER_START = 1e-8
JITTER_MAX = 1e-4


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class KernelParams:
    """Signal variance and per-dimension lengthscales of the SE-ARD kernel."""

    signal_variance: float
    lengthscales: np.ndarray

    def __post_init__(self):
        ls = _frozen(np.atleast_1d(self.lengthscales))
        if ls.ndim != 1 or ls.size == 0:
            raise ValueError("lengthscales must be a non-empty vector")
        if not (self.signal_variance > 0 and np.all(ls > 0)):
            raise ValueError("kernel parameters must be strictly positive")
        if not (np.isfinite(self.signal_variance) and np.all(np.isfinite(ls))):
            raise ValueError("kernel parameters must be finite")
        object.__setattr__(self, "signal_variance", float(self.signal_variance))
        object.__setattr__(self, "lengthscales", ls)

    @property
    def dim(self):
        return self.lengthscales.size

    @classmethod
    def isotropic(cls, signal_variance, lengthscale, dim):
        return cls(signal_variance, np.full(dim, float(lengthscale)))

    def to_log(self):
        return np.concatenate([[math.log(self.signal_variance)], np.log(self.lengthscales)])

    @classmethod
    def from_log(cls, v):
        v = np.asarray(v, dtype=float)
        return cls(math.exp(v[0]), np.exp(v[1:]))


def scaled_sqdist(theta, X, Y):
    """Half squared distances ``sum_j (x_j - y_j)^2 / (2 l_j^2)`` between rows."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[1] != theta.dim or Y.shape[1] != theta.dim:
        raise DimensionMismatch(f"inputs have {X.shape[1]}/{Y.shape[1]} columns, kernel expects {theta.dim}")
    s = theta.lengthscales
    return 0.5 * cdist(X / s, Y / s, "sqeuclidean")


def kernel_matrix(theta, X, Y):
    return theta.signal_variance * np.exp(-scaled_sqdist(theta, X, Y))


def kernel_eval(theta, x, xp):
    """``sigma_f^2 exp(-sum_j (x_j - x'_j)^2 / (2 l_j^2))`` for two points."""
    x = np.asarray(x, dtype=float).ravel()
    xp = np.asarray(xp, dtype=float).ravel()
    if x.size != theta.dim or xp.size != theta.dim:
        raise DimensionMismatch(f"points have sizes {x.size}, {xp.size}; kernel expects {theta.dim}")
    d = 0.5 * np.sum(((x - xp) / theta.lengthscales) ** 2)
    return float(theta.signal_variance * np.exp(-d))


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray
    labels: np.ndarray
    n_classes: int
    feature_names: tuple = ()

    def __post_init__(self):
        X = _frozen(np.atleast_2d(self.inputs))
        y = np.asarray(self.labels).ravel()
        if y.size and not np.all(np.equal(np.mod(y, 1), 0)):
            raise LabelError("labels must be integers")
        y = y.astype(np.int64)
        y.setflags(write=False)
        if X.shape[0] != y.size:
            raise DimensionMismatch(f"{X.shape[0]} inputs but {y.size} labels")
        if X.shape[1] < 1:
            raise DimensionMismatch("inputs need at least one dimension")
        if self.n_classes < 2:
            raise LabelError("need at least two classes")
        if y.size and (y.min() < 1 or y.max() > self.n_classes):
            raise LabelError(f"labels must lie in 1..{self.n_classes}")
        if not np.all(np.isfinite(X)):
            raise ValueError("inputs must be finite")
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "n_classes", int(self.n_classes))

    def __len__(self):
        return self.labels.size

    @property
    def dim(self):
        return self.inputs.shape[1]

    def subset(self, idx):
        return Dataset(self.inputs[idx], self.labels[idx], self.n_classes, self.feature_names)

    def signed_targets(self):
        """+1 for class 1, -1 for class 2 (binary only)."""
        return np.where(self.labels == 1, 1.0, -1.0)


@dataclass(frozen=True)
class LikelihoodSpec:
    """``probit`` (Phi(scale * f)), ``logistic`` or ``softmax``."""

    kind: str
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("probit", "logistic", "softmax"):
            raise UnsupportedLikelihood(f"unknown likelihood {self.kind!r}")
        if not self.scale > 0:
            raise ValueError("probit scale must be positive")

    @property
    def binary(self):
        return self.kind != "softmax"

    def check_classes(self, n_classes):
        if self.binary and n_classes != 2:
            raise WrongLikelihood(f"{self.kind} likelihood needs exactly 2 classes, got {n_classes}")

    # binary link ---------------------------------------------------------
    def link(self, f):
        """P(class 1 | latent f)."""
        f = np.asarray(f, dtype=float)
        if self.kind == "probit":
            return sps.ndtr(self.scale * f)
        if self.kind == "logistic":
            return sps.expit(f)
        raise UnsupportedLikelihood("softmax has no scalar link")

    def inverse_link(self, p):
        p = np.asarray(p, dtype=float)
        if self.kind == "probit":
            return sps.ndtri(p) / self.scale
        if self.kind == "logistic":
            return sps.logit(p)
        raise UnsupportedLikelihood("softmax has no scalar inverse link")

    def log_lik_derivs(self, t, f):
        """log p(t|f), its gradient and minus its second derivative, for t = +-1."""
        if self.kind == "probit":
            z = t * self.scale * f
            logcdf = sps.log_ndtr(z)
            ratio = np.exp(-0.5 * z * z - 0.5 * math.log(2 * math.pi) - logcdf)
            grad = t * self.scale * ratio
            w = self.scale**2 * ratio * (ratio + z)
            return logcdf, grad, w
        if self.kind == "logistic":
            p = sps.expit(f)
            logp = -np.logaddexp(0.0, -t * f)
            return logp, 0.5 * (t + 1.0) - p, p * (1.0 - p)
        raise UnsupportedLikelihood("softmax is not a binary likelihood")


# ----------------------------------------------------------------------------
# posterior container
# ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GPCPosterior:
    """Immutable Laplace posterior.

    Binary: ``weights`` has shape (M,) and ``precision`` (M, M), so that the
    latent predictive moments are ``r.weights`` and ``s2 - r.P.r``.
    Multiclass: ``weights`` is (C, M) and ``precision`` (C, C, M, M), with
    ``cov[c, c'] = delta s2_c - k_c.P[c, c'].k_c'``.
    """

    inputs: np.ndarray
    labels: np.ndarray
    n_classes: int
    kernels: tuple
    likelihood: LikelihoodSpec
    weights: np.ndarray
    precision: np.ndarray
    mode: np.ndarray
    jitter: float = 0.0
    log_marginal: float = float("nan")
    iterations: int = 0

    def __post_init__(self):
        for name in ("inputs", "weights", "precision", "mode"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        lab = np.array(self.labels, dtype=np.int64)
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "kernels", tuple(self.kernels))

    @property
    def binary(self):
        return self.likelihood.binary

    @property
    def kernel(self):
        return self.kernels[0]

    @property
    def n_train(self):
        return self.inputs.shape[0]

    @property
    def dim(self):
        return self.inputs.shape[1]

    @property
    def prior_variance(self):
        """Self-covariance s2 of the latent prior (binary)."""
        return self.kernels[0].signal_variance

    @cached_property
    def eigen(self):
        """Eigendecomposition ``(U, lam)`` of the binary precision, descending."""
        return sym_eigen(self.precision, method="lapack")

    @cached_property
    def scaled_inputs(self):
        """Training inputs divided by lengthscales, per class kernel."""
        return tuple(_frozen(self.inputs / k.lengthscales) for k in self.kernels)

    def kernel_vector(self, x, c=0):
        """r(x) between the training inputs and one or more test points (rows)."""
        return kernel_matrix(self.kernels[c], np.atleast_2d(x), self.inputs)


@dataclass(frozen=True)
class PredictiveMoments:
    mean: np.ndarray
    cov: object  # float (binary) or (C, C) array

    @property
    def var(self):
        return float(self.cov) if np.ndim(self.cov) == 0 else np.diag(self.cov)


# ----------------------------------------------------------------------------
# binary Laplace
# ----------------------------------------------------------------------------


def _with_jitter(fit, K, scale):
    jitter = 0.0
    while True:
        try:
            return fit(K if jitter == 0.0 else K + jitter * np.eye(K.shape[0])), jitter
        except NotPositiveDefinite:
            jitter = JITTER_START * scale if jitter == 0.0 else 2.0 * jitter
            if jitter > JITTER_MAX * scale:
                raise
            log.debug("adding jitter %.3g to the Gram diagonal", jitter)


def _newton_binary(K, t, lik, max_iter, tol):
    M = K.shape[0]
    f = np.zeros(M)
    a = np.zeros(M)
    logp, grad, w = lik.log_lik_derivs(t, f)
    psi = np.sum(logp)
    for it in range(1, max_iter + 1):
        sw = np.sqrt(w)
        L = cholesky_factor(np.eye(M) + sw[:, None] * K * sw[None, :])
        b = w * f + grad
        a_new = b - sw * scipy.linalg.cho_solve((L, True), sw * (K @ b))
        # backtrack along the Newton direction in weight space
        step = 1.0
        for _ in range(30):
            a_try = a + step * (a_new - a)
            f_try = K @ a_try
            logp_t, grad_t, w_t = lik.log_lik_derivs(t, f_try)
            psi_try = -0.5 * a_try @ f_try + np.sum(logp_t)
            if psi_try >= psi - 1e-12 * abs(psi):
                break
            step *= 0.5
        a, f, psi = a_try, f_try, psi_try
        grad, w = grad_t, w_t
        if np.max(np.abs(grad - a)) <= tol:
            return f, a, grad, w, it
    raise NonConvergence(f"binary Laplace did not converge in {max_iter} iterations")


def fit_laplace_binary(data, theta, lik, max_iter=100, tol=1e-8):
    """Laplace approximation for a binary GPC.

    The mode is found by damped Newton iterations until the gradient of the
    unnormalised log posterior has max-norm at most ``tol``.
    """
    lik.check_classes(data.n_classes)
    if not lik.binary:
        raise WrongLikelihood("fit_laplace_binary needs a probit or logistic likelihood")
    X = data.inputs
    t = data.signed_targets()
    K0 = kernel_matrix(theta, X, X)

    def fit(K):
        f, a, grad, w, iters = _newton_binary(K, t, lik, max_iter, tol)
        sw = np.sqrt(w)
        L = cholesky_factor(np.eye(K.shape[0]) + sw[:, None] * K * sw[None, :])
        V = scipy.linalg.solve_triangular(L, np.diag(sw), lower=True)
        P = V.T @ V
        logp, _, _ = lik.log_lik_derivs(t, f)
        lml = -0.5 * a @ f + np.sum(logp) - np.sum(np.log(np.diag(L)))
        return f, grad, 0.5 * (P + P.T), lml, iters

    (f, alpha, P, lml, iters), jitter = _with_jitter(fit, K0, theta.signal_variance)
    return GPCPosterior(X, data.labels, 2, (theta,), lik, alpha, P, f, jitter, float(lml), iters)


# ----------------------------------------------------------------------------
# multiclass Laplace
# ----------------------------------------------------------------------------


def _softmax_cols(F):
    # F has shape (C, M); softmax over classes
    Z = F - F.max(axis=0, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=0, keepdims=True)


def _newton_multiclass(Ks, Y, max_iter, tol):
    C, M = Y.shape
    F = np.zeros((C, M))
    A = np.zeros((C, M))

    def psi_of(A, F):
        return -0.5 * np.sum(A * F) + np.sum(Y * F) - np.sum(sps.logsumexp(F, axis=0))

    psi = psi_of(A, F)
    for it in range(1, max_iter + 1):
        Pi = _softmax_cols(F)
        E = np.empty((C, M, M))
        for c in range(C):
            sd = np.sqrt(Pi[c])
            L = cholesky_factor(np.eye(M) + sd[:, None] * Ks[c] * sd[None, :])
            E[c] = sd[:, None] * scipy.linalg.cho_solve((L, True), np.diag(sd))
        S = cholesky_factor(E.sum(axis=0))
        B = Pi * F - Pi * np.sum(Pi * F, axis=0, keepdims=True) + Y - Pi
        Cv = np.stack([E[c] @ (Ks[c] @ B[c]) for c in range(C)])
        tmp = scipy.linalg.cho_solve((S, True), Cv.sum(axis=0))
        A_new = B - Cv + np.stack([E[c] @ tmp for c in range(C)])
        step = 1.0
        for _ in range(30):
            A_try = A + step * (A_new - A)
            F_try = np.stack([Ks[c] @ A_try[c] for c in range(C)])
            psi_try = psi_of(A_try, F_try)
            if psi_try >= psi - 1e-12 * abs(psi):
                break
            step *= 0.5
        A, F, psi = A_try, F_try, psi_try
        if np.max(np.abs(Y - _softmax_cols(F) - A)) <= tol:
            return F, A, it
    raise NonConvergence(f"multiclass Laplace did not converge in {max_iter} iterations")


def _multiclass_terms(Ks, F):
    C, M = F.shape
    Pi = _softmax_cols(F)
    E = np.empty((C, M, M))
    logdet = 0.0
    for c in range(C):
        sd = np.sqrt(Pi[c])
        L = cholesky_factor(np.eye(M) + sd[:, None] * Ks[c] * sd[None, :])
        E[c] = sd[:, None] * scipy.linalg.cho_solve((L, True), np.diag(sd))
        logdet += np.sum(np.log(np.diag(L)))
    S = cholesky_factor(E.sum(axis=0))
    logdet += np.sum(np.log(np.diag(S)))
    return Pi, E, S, logdet


def fit_laplace_multiclass(data, thetas, lik, max_iter=100, tol=1e-8):
    """Laplace approximation for a softmax GPC with one latent GP per class.

    ``thetas`` is a single KernelParams (shared) or one per class.
    """
    if lik.kind != "softmax":
        raise WrongLikelihood("fit_laplace_multiclass needs the softmax likelihood")
    C = data.n_classes
    if isinstance(thetas, KernelParams):
        thetas = (thetas,) * C
    thetas = tuple(thetas)
    if len(thetas) != C:
        raise DimensionMismatch(f"need {C} kernel parameter sets, got {len(thetas)}")
    X = data.inputs
    M = X.shape[0]
    Y = np.zeros((C, M))
    Y[data.labels - 1, np.arange(M)] = 1.0
    K0 = [kernel_matrix(th, X, X) for th in thetas]
    scale = max(th.signal_variance for th in thetas)

    def fit(Kstack):
        Ks = [Kstack[c * M:(c + 1) * M, c * M:(c + 1) * M] for c in range(C)]
        F, A, iters = _newton_multiclass(Ks, Y, max_iter, tol)
        Pi, E, S, logdet = _multiclass_terms(Ks, F)
        # Q[c, c'] = delta E_c - E_c S^-1 E_c'
        SinvE = np.stack([scipy.linalg.cho_solve((S, True), E[c]) for c in range(C)])
        Q = np.empty((C, C, M, M))
        for c in range(C):
            for d in range(C):
                Q[c, d] = -E[c] @ SinvE[d]
                if c == d:
                    Q[c, d] += E[c]
        Q = 0.5 * (Q + Q.transpose(1, 0, 3, 2))
        lml = -0.5 * np.sum(A * F) + np.sum(Y * F) - np.sum(sps.logsumexp(F, axis=0)) - logdet
        return F, Y - Pi, Q, lml, iters

    Kbig = scipy.linalg.block_diag(*K0)
    (F, W, Q, lml, iters), jitter = _with_jitter(fit, Kbig, scale)
    return GPCPosterior(X, data.labels, C, thetas, lik, W, Q, F, jitter, float(lml), iters)


def fit(data, theta, lik, **kw):
    """Dispatch to the binary or multiclass fit by likelihood."""
    if lik.binary:
        return fit_laplace_binary(data, theta, lik, **kw)
    return fit_laplace_multiclass(data, theta, lik, **kw)


# ----------------------------------------------------------------------------
# prediction
# ----------------------------------------------------------------------------


def predict_latent_batch(post, X):
    """Latent means and (co)variances at the rows of ``X``.

    Binary: ``(mean (n,), var (n,))``.  Multiclass: ``(mean (n, C), cov (n, C, C))``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != post.dim:
        raise DimensionMismatch(f"points have {X.shape[1]} columns, model expects {post.dim}")
    if post.binary:
        R = post.kernel_vector(X)
        mean = R @ post.weights
        quad = np.einsum("ij,jk,ik->i", R, post.precision, R)
        var = post.prior_variance - quad
        return mean, np.maximum(var, np.finfo(float).tiny)
    C = post.n_classes
    Rs = np.stack([post.kernel_vector(X, c) for c in range(C)])  # (C, n, M)
    mean = np.einsum("cnm,cm->nc", Rs, post.weights)
    cov = -np.einsum("cnm,cdmk,dnk->ncd", Rs, post.precision, Rs)
    for c in range(C):
        cov[:, c, c] += post.kernels[c].signal_variance
    cov = 0.5 * (cov + cov.transpose(0, 2, 1))
    return mean, cov


def predict_latent(post, x):
    mean, cov = predict_latent_batch(post, np.asarray(x, dtype=float).reshape(1, -1))
    if post.binary:
        return PredictiveMoments(mean.copy(), float(cov[0]))
    return PredictiveMoments(mean[0], cov[0])


_GH = np.polynomial.hermite.hermgauss(GH_NODES)


def logistic_gaussian_mean(mu, var):
    """E[expit(F)] for F ~ N(mu, var) by 64-node Gauss-Hermite quadrature."""
    t, w = _GH
    mu = np.asarray(mu, dtype=float)
    var = np.asarray(var, dtype=float)
    f = mu[..., None] + np.sqrt(2.0 * var)[..., None] * t
    return np.sum(w * sps.expit(f), axis=-1) / math.sqrt(math.pi)


def binary_prob(lik, mu, var):
    """P(class 1) from latent moments (vectorised)."""
    mu = np.asarray(mu, dtype=float)
    var = np.asarray(var, dtype=float)
    if lik.kind == "probit":
        return norm_cdf(mu / np.sqrt(lik.scale**-2 + var))
    if lik.kind == "logistic":
        return logistic_gaussian_mean(mu, var)
    raise UnsupportedLikelihood("softmax probabilities need the multiclass path")


_QMC_CACHE = {}


def _qmc_normals(C):
    if C not in _QMC_CACHE:
        u = qmc.Sobol(d=C, scramble=True, seed=QMC_SEED).random(QMC_POINTS)
        u = np.clip(u, 1e-16, 1.0 - 1e-16)
        z = sps.ndtri(u)
        z.setflags(write=False)
        _QMC_CACHE[C] = z
    return _QMC_CACHE[C]


def softmax_gaussian_mean(mean, cov):
    """E[softmax(F)] for F ~ N(mean, cov) by quasi-Monte Carlo; rows of mean/cov batch."""
    mean = np.atleast_2d(mean)
    cov = np.asarray(cov).reshape(mean.shape[0], mean.shape[1], mean.shape[1])
    C = mean.shape[1]
    z = _qmc_normals(C)
    out = np.empty_like(mean)
    for i in range(mean.shape[0]):
        w, V = np.linalg.eigh(cov[i])
        root = V * np.sqrt(np.maximum(w, 0.0))
        F = mean[i] + z @ root.T
        out[i] = _softmax_cols(F.T).mean(axis=1)
    return out


def predict_prob_batch(post, X, c=1):
    """P(class c) at the rows of ``X``."""
    mean, cov = predict_latent_batch(post, X)
    if post.binary:
        p1 = binary_prob(post.likelihood, mean, cov)
        return p1 if c == 1 else 1.0 - p1
    return softmax_gaussian_mean(mean, cov)[:, c - 1]


def predict_prob(post, x, c=1):
    """Predictive probability of class ``c`` (1-based) at a single point."""
    if not 1 <= c <= post.n_classes:
        raise LabelError(f"class id {c} outside 1..{post.n_classes}")
    return float(predict_prob_batch(post, np.asarray(x, dtype=float).reshape(1, -1), c)[0])


def predict_class(post, x):
    if post.binary:
        return 1 if predict_prob(post, x, 1) >= 0.5 else 2
    mean, cov = predict_latent_batch(post, np.asarray(x, dtype=float).reshape(1, -1))
    return int(np.argmax(softmax_gaussian_mean(mean, cov)[0])) + 1


# ----------------------------------------------------------------------------
# evidence and tuning
# ----------------------------------------------------------------------------


def log_marginal_likelihood(data, theta, lik):
    """Laplace approximation of the log evidence."""
    return fit(data, theta, lik).log_marginal


def _lml_shared(data, theta, lik):
    th = theta if lik.binary else (theta,) * data.n_classes
    return log_marginal_likelihood(data, th, lik)


def tune_hyperparameters(data, lik, epochs, theta0, step=0.2, fd_step=1e-3, history=None, shared_lengthscale=False):
    """Gradient ascent on the log evidence in log-parameter space.

    The gradient is taken by central differences.  Every evidence evaluation,
    including the difference probes and the initial one, counts against
    ``epochs``.  Steps that lower the evidence or fail to converge are
    rejected and the step size halved.  Multiclass models share one kernel
    across classes during tuning.  ``history`` (a list) receives the evidence
    of every accepted point.  With ``shared_lengthscale`` a single
    lengthscale is tuned for all dimensions.
    """
    if epochs < 1:
        raise ValueError("epochs must be at least 1")
    d = theta0.dim

    def unpack(vec):
        if shared_lengthscale:
            return KernelParams.from_log(np.concatenate([vec[:1], np.full(d, vec[1])]))
        return KernelParams.from_log(vec)

    v = theta0.to_log()
    if shared_lengthscale:
        v = np.array([v[0], np.mean(v[1:])])
    p = v.size
    cur = _lml_shared(data, unpack(v), lik)
    used = 1
    if history is not None:
        history.append(cur)

    def safe(vec):
        try:
            return _lml_shared(data, unpack(vec), lik)
        except (NonConvergence, NotPositiveDefinite, ValueError):
            return -np.inf

    while used + 2 * p + 1 <= epochs:
        g = np.empty(p)
        for j in range(p):
            e = np.zeros(p)
            e[j] = fd_step
            hi, lo = safe(v + e), safe(v - e)
            g[j] = (hi - lo) / (2 * fd_step) if np.isfinite(hi) and np.isfinite(lo) else 0.0
        used += 2 * p
        norm = np.linalg.norm(g)
        if norm == 0.0:
            break
        trial = np.clip(v + step * g / max(1.0, norm), -12.0, 12.0)
        val = safe(trial)
        used += 1
        if val > cur:
            v, cur = trial, val
            step = min(2.0 * step, 2.0)
            if history is not None:
                history.append(cur)
        else:
            step *= 0.5
    return unpack(v)


# ----------------------------------------------------------------------------
# input gradients
# ----------------------------------------------------------------------------


def top_class(post, x):
    return predict_class(post, x)


def gpc_gradient(post, x, c=None, fd_step=1e-5):
    """Gradient of P(class c) with respect to the input; ``c`` defaults to the top class.

    Analytic for probit models, central differences otherwise.
    """
    x = np.asarray(x, dtype=float).ravel()
    if c is None:
        c = top_class(post, x)
    if post.likelihood.kind == "probit":
        th = post.kernel
        r = post.kernel_vector(x)[0]
        diff = (x[None, :] - post.inputs) / th.lengthscales**2  # (M, d)
        dr = -r[:, None] * diff  # dr_i/dx
        mu = r @ post.weights
        Pr = post.precision @ r
        var = post.prior_variance - r @ Pr
        dmu = post.weights @ dr
        dvar = -2.0 * Pr @ dr
        s2 = post.likelihood.scale**-2 + var
        s = math.sqrt(s2)
        z = mu / s
        g = math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi) * (dmu / s - 0.5 * mu * dvar / (s2 * s))
        return g if c == 1 else -g
    g = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = fd_step
        pts = np.stack([x + e, x - e])
        p = predict_prob_batch(post, pts, c)
        g[j] = (p[0] - p[1]) / (2 * fd_step)
    return g
