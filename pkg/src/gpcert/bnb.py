"""Best-first branch-and-bound on the extreme class probability over a box.

Internally everything is phrased as minimising a function ``h`` over the
root box: ``h`` is the class probability for a ``min`` objective and its
negation for ``max``.  Each region carries an outer bound (a certified lower
bound on ``min h`` over the region) and the best value of ``h`` seen at a
concrete point.  The global sandwich after every iteration is

* upper ``U``: the smallest ``h`` observed at any evaluated point, and
* lower ``L``: the smallest outer bound over live and closed regions,

so it is sound at all times, ``L`` never decreases and ``U`` never
increases.  A region is closed once its outer bound is within ``epsilon``
of ``U``; the search stops when ``U - L <= epsilon``.
"""

from dataclasses import dataclass
import heapq
import json
import logging
import math
import time
from typing import Optional

import numpy as np

from .binary import BoundResult, build_partition, default_partition_size, pi_max_upper, pi_min_lower
from .errors import DegenerateRegion
from .gp import predict_prob_batch
from .latent import (
    SLACK,
    LatentBounds,
    latent_bounds_multiclass,
    mean_bounds,
    relax_kernel,
    variance_lower_bound,
    variance_upper_bound,
)
from .multiclass import build_latent_grid, pi_c_bounds_from_moments
from .special import norm_cdf

log = logging.getLogger(__name__)


@dataclass
class CertifyConfig:
    """Settings for :func:`certify`.

    ``partition_size`` defaults to ``ceil(2 / epsilon)`` (binary, non-probit
    links).  ``threshold`` turns the search into a decision procedure that
    stops as soon as the sandwich lies strictly on one side of it.
    """

    epsilon: float = 0.01
    objective: str = "min"
    class_id: int = 1
    partition_size: Optional[int] = None
    max_iterations: int = 100_000
    max_depth: int = 60
    time_limit: Optional[float] = None
    threshold: Optional[float] = None
    slack: float = SLACK
    use_lp: Optional[bool] = None
    use_qp: Optional[bool] = None
    cells_per_axis: int = 12
    trace_path: Optional[str] = None
    keep_history: bool = True

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.objective not in ("min", "max"):
            raise ValueError("objective must be 'min' or 'max'")
        if self.partition_size is not None and self.partition_size < 1:
            raise ValueError("partition_size must be at least 1")
        if self.max_iterations < 1 or self.max_depth < 0:
            raise ValueError("iteration and depth caps must be positive")


@dataclass(eq=False)
class Region:
    box: object
    outer: float
    inner: float
    depth: int = 0


def split_region(region, root_widths=None):
    """Bisect along the widest axis relative to the root box (lowest index on ties).

    Children start from the parent's bounds.
    """
    box = region.box
    w = box.widths
    if np.all(w <= 0):
        raise DegenerateRegion("region has no axis of positive width")
    if root_widths is None:
        rel = w.astype(float)
    else:
        rel = np.where(root_widths > 0, w / np.where(root_widths > 0, root_widths, 1.0), -1.0)
    rel = np.where(w > 0, rel, -1.0)
    axis = int(np.argmax(rel))
    b1, b2 = box.split(axis)
    return (
        Region(b1, region.outer, region.inner, region.depth + 1),
        Region(b2, region.outer, region.inner, region.depth + 1),
    )


class _BinaryBounder:
    """Outer bounds on ``min h`` over a box for binary models."""

    def __init__(self, post, cfg):
        self.post = post
        self.cfg = cfg
        c = cfg.class_id
        if c not in (1, 2):
            raise ValueError("binary models have classes 1 and 2")
        # h = sign * p1 + offset
        self.need_min = (cfg.objective == "min") == (c == 1)
        self.sign = 1.0 if self.need_min else -1.0
        self.offset = {("min", 1): 0.0, ("max", 1): 0.0, ("min", 2): 1.0, ("max", 2): -1.0}[(cfg.objective, c)]
        self.probit = post.likelihood.kind == "probit"
        if not self.probit:
            n = cfg.partition_size or default_partition_size(cfg.epsilon)
            self.partition = build_partition(post.likelihood, n)

    def h_values(self, pts):
        return self.sign * predict_prob_batch(self.post, pts, 1) + self.offset

    def __call__(self, box):
        post, cfg = self.post, self.cfg
        relax = relax_kernel(post, box)
        mlo, mhi, wl, wh = mean_bounds(post, relax, box, use_lp=cfg.use_lp, slack=cfg.slack)
        cands = [box.midpoint, wl, wh]
        if self.probit:
            inv2 = post.likelihood.scale**-2
            m = mlo if self.need_min else mhi
            want_high = (m >= 0) == self.need_min
            if want_high:
                v, w = variance_upper_bound(post, relax, box, use_qp=cfg.use_qp, slack=cfg.slack)
            else:
                v, w = variance_lower_bound(post, relax, box, use_lp=cfg.use_lp, slack=cfg.slack)
            cands.append(w)
            p = float(norm_cdf(m / math.sqrt(inv2 + v)))
        else:
            vhi, w1 = variance_upper_bound(post, relax, box, use_qp=cfg.use_qp, slack=cfg.slack)
            vlo, w2 = variance_lower_bound(post, relax, box, use_lp=cfg.use_lp, slack=cfg.slack)
            cands += [w1, w2]
            lb = LatentBounds(mlo, mhi, min(vlo, vhi), vhi)
            p = pi_min_lower(post, lb, self.partition) if self.need_min else pi_max_upper(post, lb, self.partition)
        outer = self.sign * p + self.offset
        return outer, np.array(cands)


class _MulticlassBounder:
    def __init__(self, post, cfg):
        if not 1 <= cfg.class_id <= post.n_classes:
            raise ValueError(f"class id {cfg.class_id} outside 1..{post.n_classes}")
        self.post = post
        self.cfg = cfg
        self.sign = 1.0 if cfg.objective == "min" else -1.0

    def h_values(self, pts):
        return self.sign * predict_prob_batch(self.post, pts, self.cfg.class_id)

    def __call__(self, box):
        mb = latent_bounds_multiclass(self.post, box, use_lp=self.cfg.use_lp, slack=self.cfg.slack)
        grid = build_latent_grid(mb, self.cfg.cells_per_axis)
        lo, hi = pi_c_bounds_from_moments(mb, grid, self.cfg.class_id)
        outer = lo if self.cfg.objective == "min" else -hi
        return outer, np.array([box.midpoint] + list(mb.witnesses))


def make_bounder(post, cfg):
    return _BinaryBounder(post, cfg) if post.binary else _MulticlassBounder(post, cfg)


def certify(post, root, cfg=None, bounder=None):
    """Refine a sandwich on ``pi_min`` or ``pi_max`` of one class over ``root``.

    Returns a BoundResult.  If the iteration, depth or time budget runs out
    the current (still sound) sandwich is returned with ``converged=False``.
    """
    cfg = cfg or CertifyConfig()
    bounder = bounder or make_bounder(post, cfg)
    t0 = time.perf_counter()
    eps = cfg.epsilon
    sgn = 1.0 if cfg.objective == "min" else -1.0
    h_thr = None if cfg.threshold is None else sgn * cfg.threshold
    root_w = root.widths
    trace_fh = open(cfg.trace_path, "w") if cfg.trace_path else None

    def to_pi(L, U):
        if cfg.objective == "min":
            return float(np.clip(L, 0, 1)), float(np.clip(U, 0, 1))
        return float(np.clip(-U, 0, 1)), float(np.clip(-L, 0, 1))

    outer, cands = bounder(root)
    hv = bounder.h_values(cands)
    j = int(np.argmin(hv))
    U, best_x = float(hv[j]), cands[j].copy()
    outer = min(outer, U)
    heap = [(outer, 0, Region(root, outer, U, 0))]
    counter = 1
    closed_min = math.inf
    history = []
    iterations = 0
    deepest = 0
    status = "converged"

    def lower_now():
        live = heap[0][0] if heap else math.inf
        return min(closed_min, live, U)

    try:
        while True:
            L = lower_now()
            lo_pi, hi_pi = to_pi(L, U)
            if cfg.keep_history:
                history.append((lo_pi, hi_pi))
            if trace_fh is not None:
                trace_fh.write(json.dumps({"iteration": iterations, "lower": lo_pi, "upper": hi_pi,
                                           "gap": hi_pi - lo_pi, "live_regions": len(heap)}) + "\n")
            if U - L <= eps:
                break
            if h_thr is not None and (L > h_thr or U < h_thr):
                status = "decided"
                break
            if not heap:
                status = "depth"
                break
            if iterations >= cfg.max_iterations:
                status = "budget"
                break
            if cfg.time_limit is not None and time.perf_counter() - t0 > cfg.time_limit:
                status = "time"
                break
            iterations += 1
            _, _, region = heapq.heappop(heap)
            if region.depth >= cfg.max_depth or region.box.is_degenerate:
                closed_min = min(closed_min, region.outer)
                continue
            for child in split_region(region, root_w):
                o, cands = bounder(child.box)
                hv = bounder.h_values(cands)
                j = int(np.argmin(hv))
                if hv[j] < U:
                    U, best_x = float(hv[j]), cands[j].copy()
                child.inner = float(hv[j])
                child.outer = min(max(o, region.outer), child.inner)
                deepest = max(deepest, child.depth)
                if U - child.outer <= eps:
                    closed_min = min(closed_min, child.outer)
                else:
                    heapq.heappush(heap, (child.outer, counter, child))
                    counter += 1
                if trace_fh is not None:
                    trace_fh.write(json.dumps({"iteration": iterations, "region_lower": child.box.lower.tolist(),
                                               "region_upper": child.box.upper.tolist(), "outer": child.outer,
                                               "inner": child.inner, "depth": child.depth}) + "\n")
    finally:
        if trace_fh is not None:
            trace_fh.close()
    L = lower_now()
    lo_pi, hi_pi = to_pi(L, U)
    converged = U - L <= eps
    if status == "converged" and not converged:
        status = "budget"
    return BoundResult(
        objective=cfg.objective,
        lower=lo_pi,
        upper=hi_pi,
        witness=best_x,
        class_id=cfg.class_id,
        epsilon=eps,
        converged=converged,
        status=status if not converged or status == "decided" else "converged",
        iterations=iterations,
        regions=counter,
        max_depth=deepest,
        elapsed=time.perf_counter() - t0,
        history=history,
    )
