"""Local safety, delta-robustness, feature sensitivity and a gradient-sign attack."""

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .bnb import CertifyConfig, certify
from .box import InputBox
from .gp import gpc_gradient, predict_class, predict_prob

THRESHOLD = 0.5


@dataclass
class SafetyVerdict:
    """Outcome of the local-safety check for one radius.

    ``lower``/``upper`` sandwich the minimum probability of the original
    class over the ball.  For multiclass models ``margin_lower`` is the
    certified lower bound on that minimum minus the largest competing
    class maximum.
    """

    gamma: float
    verdict: str
    class_id: int
    lower: float
    upper: float
    counterexample: Optional[np.ndarray] = None
    margin_lower: Optional[float] = None
    epsilon: float = float("nan")

    def to_dict(self):
        return {
            "gamma": self.gamma,
            "verdict": self.verdict,
            "class_id": self.class_id,
            "lower": self.lower,
            "upper": self.upper,
            "epsilon": self.epsilon,
            "margin_lower": self.margin_lower,
            "counterexample": None if self.counterexample is None else [float(v) for v in self.counterexample],
        }


@dataclass
class DeltaRobustness:
    lower: float
    upper: float
    epsilon: float = float("nan")
    results: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not 0.0 <= self.lower <= self.upper <= 1.0 + 1e-12:
            raise ValueError(f"invalid delta interval [{self.lower}, {self.upper}]")

    @property
    def gap(self):
        return self.upper - self.lower

    def to_dict(self):
        return {"lower": self.lower, "upper": self.upper, "gap": self.gap, "epsilon": self.epsilon}


@dataclass
class AttackResult:
    candidate: np.ndarray
    probability: float
    original_class: int
    predicted_class: int

    @property
    def success(self):
        return self.predicted_class != self.original_class

    def to_dict(self):
        return {
            "candidate": [float(v) for v in self.candidate],
            "probability": self.probability,
            "original_class": self.original_class,
            "predicted_class": self.predicted_class,
            "success": self.success,
        }


@dataclass
class InterpretabilityProfile:
    """Per-dimension centred sensitivities with a certified error bar."""

    delta: np.ndarray
    gamma: float
    error_bar: float
    count: int = 1
    class_id: int = 1

    def to_dict(self):
        return {
            "delta": [float(v) for v in self.delta],
            "gamma": self.gamma,
            "error_bar": self.error_bar,
            "count": self.count,
            "class_id": self.class_id,
        }


def _ball(x, gamma, dims, domain):
    return InputBox.from_ball(x, gamma, dims, domain)


def _binary_verdict(post, box, c, cfg, gamma):
    res = certify(post, box, replace(cfg, objective="min", class_id=c, threshold=THRESHOLD))
    if res.lower > THRESHOLD:
        return SafetyVerdict(gamma, "safe", c, res.lower, res.upper, epsilon=cfg.epsilon)
    if res.upper < THRESHOLD and predict_class(post, res.witness) != c:
        return SafetyVerdict(gamma, "unsafe", c, res.lower, res.upper, res.witness, epsilon=cfg.epsilon)
    return SafetyVerdict(gamma, "unknown", c, res.lower, res.upper, epsilon=cfg.epsilon)


def _multiclass_verdict(post, box, c, cfg, gamma):
    own = certify(post, box, replace(cfg, objective="min", class_id=c))
    for cand in (own.witness, box.midpoint):
        if predict_class(post, cand) != c:
            return SafetyVerdict(gamma, "unsafe", c, own.lower, own.upper, np.array(cand), epsilon=cfg.epsilon)
    rival = 0.0
    for k in range(1, post.n_classes + 1):
        if k == c:
            continue
        r = certify(post, box, replace(cfg, objective="max", class_id=k))
        if predict_class(post, r.witness) != c:
            return SafetyVerdict(gamma, "unsafe", c, own.lower, own.upper, r.witness, epsilon=cfg.epsilon)
        rival = max(rival, r.upper)
    margin = own.lower - rival
    verdict = "safe" if margin > 0.0 or own.lower > THRESHOLD else "unknown"
    return SafetyVerdict(gamma, verdict, c, own.lower, own.upper, margin_lower=margin, epsilon=cfg.epsilon)


def safety_sweep(post, x, gammas, cfg=None, dims=None, domain=None):
    """Safety verdict of the classification of ``x`` for each radius in ``gammas``.

    Once a counterexample is found it is reused for every larger radius
    since the balls are nested.
    """
    cfg = cfg or CertifyConfig()
    x = np.asarray(x, dtype=float).ravel()
    gammas = [float(g) for g in gammas]
    if any(g < 0 for g in gammas) or any(b < a for a, b in zip(gammas, gammas[1:])):
        raise ValueError("radii must be non-negative and increasing")
    c = predict_class(post, x)
    out = []
    witness = None
    for g in gammas:
        box = _ball(x, g, dims, domain)
        if witness is not None and box.contains(witness):
            # only the counterexample carries over; 0 is the trivially sound lower bound
            out.append(SafetyVerdict(g, "unsafe", c, 0.0, min(out[-1].upper, predict_prob(post, witness, c)),
                                     witness, epsilon=cfg.epsilon))
            continue
        verdict_fn = _binary_verdict if post.binary else _multiclass_verdict
        v = verdict_fn(post, box, c, cfg, g)
        if v.verdict == "unsafe":
            witness = v.counterexample
        out.append(v)
    return out


def delta_robustness(post, box, cfg=None):
    """Certified interval on ``max - min`` of the class probabilities over ``box``.

    Each extreme is certified to ``epsilon / 2`` so the interval is at most
    ``epsilon`` wide.  Multiclass models use the largest per-class range.
    """
    cfg = cfg or CertifyConfig()
    half = replace(cfg, epsilon=cfg.epsilon / 2, threshold=None)
    classes = [1] if post.binary else range(1, post.n_classes + 1)
    lo, hi, results = 0.0, 0.0, []
    for c in classes:
        rmin = certify(post, box, replace(half, objective="min", class_id=c))
        rmax = certify(post, box, replace(half, objective="max", class_id=c))
        results += [rmin, rmax]
        lo = max(lo, rmax.lower - rmin.upper)
        hi = max(hi, rmax.upper - rmin.lower)
    lo = max(0.0, lo)
    return DeltaRobustness(lo, min(1.0, max(hi, lo)), cfg.epsilon, results)


def gpfgs_attack(post, x, gamma, dims=None, domain=None):
    """One signed-gradient step of size ``gamma`` against the current class.

    A heuristic: failure says nothing about safety.
    """
    x = np.asarray(x, dtype=float).ravel()
    c = predict_class(post, x)
    g = gpc_gradient(post, x, c)
    step = np.sign(g)
    if dims is not None:
        mask = np.zeros_like(step)
        mask[np.asarray(dims, dtype=int)] = 1.0
        step *= mask
    cand = x - gamma * step
    if domain is not None:
        cand = np.clip(cand, domain[0], domain[1])
    return AttackResult(cand, predict_prob(post, cand, c), c, predict_class(post, cand))


def interpret_local(post, x, gamma, epsilon=0.005, class_id=1, dims=None, cfg=None):
    """Centred sensitivity of class ``class_id`` to one-sided moves along each axis.

    For each axis the extremes over ``[x, x + gamma e_i]`` and
    ``[x - gamma e_i, x]`` are certified and combined as
    ``(max+ - max-) + (min+ - min-)`` using sandwich midpoints.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    x = np.asarray(x, dtype=float).ravel()
    base = replace(cfg or CertifyConfig(), epsilon=epsilon, class_id=class_id, threshold=None)
    axes = range(x.size) if dims is None else [int(i) for i in dims]
    delta = np.zeros(x.size)

    def mid(box, objective):
        r = certify(post, box, replace(base, objective=objective))
        return 0.5 * (r.lower + r.upper)

    for i in axes:
        e = np.zeros_like(x)
        e[i] = gamma
        plus = InputBox(x, x + e)
        minus = InputBox(x - e, x)
        delta[i] = (mid(plus, "max") - mid(minus, "max")) + (mid(plus, "min") - mid(minus, "min"))
    return InterpretabilityProfile(delta, float(gamma), 4 * epsilon, 1, class_id)


def interpret_global(post, points, gamma, epsilon=0.005, class_id=1, dims=None, cfg=None):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] == 0:
        raise ValueError("need at least one test point")
    profiles = [interpret_local(post, p, gamma, epsilon, class_id, dims, cfg) for p in points]
    mean = np.mean([p.delta for p in profiles], axis=0)
    return InterpretabilityProfile(mean, float(gamma), 4 * epsilon, len(profiles), class_id)
