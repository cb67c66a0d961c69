"""Bounds on binary class probabilities over an input box.

Given enclosures of the latent mean and variance over the box, the class-1
probability ``int link(f) N(f | mu, var) df`` is bounded by cutting the
latent line into pieces of equal likelihood increment and bounding the
Gaussian mass of each piece.  Probit models also admit a closed form.
"""

from dataclasses import dataclass, field
import math
from typing import Optional

import numpy as np

from .errors import EmptyCandidateSet, UnsupportedLikelihood, WrongLikelihood
from .gaussian_integral import max_gaussian_integral_vec, min_gaussian_integral_vec
from .gp import predict_prob_batch
from .special import norm_cdf


@dataclass(frozen=True, eq=False)
class LatentPartition:
    """Intervals ``[lower[i], upper[i]]`` covering the real line, with cached link values."""

    lower: np.ndarray
    upper: np.ndarray
    link_lower: np.ndarray
    link_upper: np.ndarray

    @property
    def size(self):
        return self.lower.size


def build_partition(lik, n):
    """``n`` intervals whose link increments are all ``1/n``."""
    if lik.kind == "softmax":
        raise UnsupportedLikelihood("latent partitions here are one-dimensional; use the multiclass grid")
    if n < 1:
        raise ValueError("partition size must be at least 1")
    levels = np.arange(1, n) / n
    cuts = lik.inverse_link(levels)
    lower = np.concatenate([[-np.inf], cuts])
    upper = np.concatenate([cuts, [np.inf]])
    with np.errstate(over="ignore"):
        link_lower = np.concatenate([[0.0], lik.link(cuts)])
        link_upper = np.concatenate([lik.link(cuts), [1.0]])
    return LatentPartition(lower, upper, link_lower, link_upper)


def default_partition_size(epsilon):
    return int(math.ceil(2.0 / epsilon))


def _rect(lb):
    return lb.mean_low, lb.mean_high, lb.var_low, lb.var_high


def pi_min_lower(post, lb, part):
    """Lower bound on the minimum class-1 probability over the box."""
    mins, _, _ = min_gaussian_integral_vec(part.lower, part.upper, *_rect(lb))
    return float(np.clip(part.link_lower @ mins, 0.0, 1.0))


def pi_max_upper(post, lb, part):
    """Upper bound on the maximum class-1 probability over the box."""
    maxs, _, _ = max_gaussian_integral_vec(part.lower, part.upper, *_rect(lb))
    return float(np.clip(part.link_upper @ maxs, 0.0, 1.0))


def probit_variance_choice(mean_bound, var_low, var_high, side):
    """Which variance end the closed form needs for a given mean bound.

    ``side="min"``: the lower bound uses var_high when the mean bound is
    non-negative; ``side="max"``: the upper bound uses var_low then.
    """
    if side == "min":
        return var_high if mean_bound >= 0 else var_low
    return var_low if mean_bound >= 0 else var_high


def probit_bounds(post, lb):
    """``(lower on pi_min, upper on pi_max)`` for probit models in closed form."""
    lik = post.likelihood
    if lik.kind != "probit":
        raise WrongLikelihood("probit_bounds needs a probit likelihood")
    inv2 = lik.scale**-2
    v_lo = probit_variance_choice(lb.mean_low, lb.var_low, lb.var_high, "min")
    v_hi = probit_variance_choice(lb.mean_high, lb.var_low, lb.var_high, "max")
    lower = float(norm_cdf(lb.mean_low / math.sqrt(inv2 + v_lo)))
    upper = float(norm_cdf(lb.mean_high / math.sqrt(inv2 + v_hi)))
    return lower, upper


def evaluate_candidates(post, points, objective="min", c=1):
    """Best probability of class ``c`` among candidate points: ``(value, point)``.

    Every candidate lies in the region, so the result is an inner bound:
    an upper bound on the minimum or a lower bound on the maximum.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] == 0 or pts.size == 0:
        raise EmptyCandidateSet("no candidate points")
    vals = predict_prob_batch(post, pts, c)
    i = int(np.argmin(vals)) if objective == "min" else int(np.argmax(vals))
    return float(vals[i]), pts[i].copy()


@dataclass
class BoundResult:
    """Certified sandwich on ``pi_min`` or ``pi_max`` of one class over a box."""

    objective: str
    lower: float
    upper: float
    witness: Optional[np.ndarray] = None
    class_id: int = 1
    epsilon: float = float("nan")
    converged: bool = True
    status: str = "converged"
    iterations: int = 0
    regions: int = 0
    max_depth: int = 0
    elapsed: float = 0.0
    history: list = field(default_factory=list, repr=False)

    @property
    def gap(self):
        return self.upper - self.lower

    @property
    def inner(self):
        """The bound realised by an actual point (upper for min, lower for max)."""
        return self.upper if self.objective == "min" else self.lower

    @property
    def outer(self):
        return self.lower if self.objective == "min" else self.upper

    def to_dict(self):
        return {
            "objective": self.objective,
            "class_id": self.class_id,
            "lower": self.lower,
            "upper": self.upper,
            "gap": self.gap,
            "epsilon": self.epsilon,
            "converged": self.converged,
            "status": self.status,
            "iterations": self.iterations,
            "regions": self.regions,
            "max_depth": self.max_depth,
            "witness": None if self.witness is None else [float(v) for v in self.witness],
        }
