"""Experiment configuration, orchestration and report emission."""

import csv
import dataclasses
import json
import math
import os
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional, Union

import numpy as np

from .. import __version__
from ..bnb import CertifyConfig, certify
from ..box import InputBox
from ..data import generate_synthetic2d, load_csv, load_idx_images, select_features, train_test_split
from ..gp import KernelParams, LikelihoodSpec, fit, predict_class, predict_prob_batch, tune_hyperparameters
from ..robustness import delta_robustness, gpfgs_attack, interpret_global, interpret_local, safety_sweep
from .serialize import load_posterior, save_posterior

ANALYSES = ("certify", "safety", "robustness", "interpret", "attack", "train")
DATASETS = ("synthetic2d", "csv", "idx")
EXIT_UNKNOWN = 3


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one run.

    ``columns`` selects input columns at load time; ``dims`` / ``k`` pick
    the axes that vary inside the certification boxes (``dims_mode`` is
    ``all``, ``explicit`` or ``lengthscale``).  Split sizes are multiplied
    by ``scale``.
    """

    analysis: str = "certify"
    dataset: str = "synthetic2d"
    data_path: Optional[str] = None
    labels_path: Optional[str] = None
    label_column: Union[int, str] = -1
    normalization: str = "standardize"
    columns: Optional[list] = None
    classes: Optional[list] = None
    downsample: bool = False
    n_total: int = 1200
    n_train: int = 1000
    n_test: int = 200
    scale: float = 1.0
    seed: int = 0
    likelihood: str = "probit"
    probit_scale: float = 1.0
    signal_variance: float = 1.0
    lengthscale: float = 1.0
    epochs: int = 0
    shared_lengthscale: bool = False
    posterior_path: Optional[str] = None
    save_posterior: Optional[str] = None
    n_points: int = 10
    point_selection: str = "random"
    gammas: list = field(default_factory=lambda: [0.1])
    epsilon: float = 0.01
    partition_size: Optional[int] = None
    class_id: Optional[int] = None
    dims_mode: str = "all"
    dims: Optional[list] = None
    k: Optional[int] = None
    domain: Optional[list] = None
    interp_epsilon: float = 0.005
    max_iterations: int = 100_000
    time_limit: Optional[float] = None
    output: Optional[str] = None
    trace_dir: Optional[str] = None

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        return dataclasses.asdict(self)

    def scaled(self, n):
        return max(2, int(round(n * self.scale)))

    def validate(self):
        if self.analysis not in ANALYSES:
            raise ValueError(f"analysis must be one of {ANALYSES}")
        if self.dataset not in DATASETS:
            raise ValueError(f"dataset must be one of {DATASETS}")
        if self.posterior_path is None:
            if self.dataset in ("csv", "idx") and not (self.data_path and os.path.exists(self.data_path)):
                raise FileNotFoundError(f"data file not found: {self.data_path}")
            if self.dataset == "idx" and not (self.labels_path and os.path.exists(self.labels_path)):
                raise FileNotFoundError(f"label file not found: {self.labels_path}")
        elif not os.path.exists(self.posterior_path):
            raise FileNotFoundError(f"posterior file not found: {self.posterior_path}")
        if self.scale <= 0 or self.n_train < 1 or self.n_test < 1 or self.n_points < 1:
            raise ValueError("sizes and scale must be positive")
        if self.epsilon <= 0 or self.interp_epsilon <= 0:
            raise ValueError("tolerances must be positive")
        g = [float(v) for v in self.gammas]
        if not g or any(v < 0 for v in g) or any(b < a for a, b in zip(g, g[1:])):
            raise ValueError("gammas must be non-negative and increasing")
        if self.point_selection not in ("random", "first", "boundary"):
            raise ValueError("point_selection must be random, first or boundary")
        if self.dims_mode not in ("all", "explicit", "lengthscale"):
            raise ValueError("dims_mode must be all, explicit or lengthscale")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        return self


@dataclass
class Report:
    config: dict
    model: dict
    items: list
    summary: dict
    seed: int
    version: str = __version__
    timing: dict = field(default_factory=dict)

    @property
    def unknown_count(self):
        return int(self.summary.get("unknown", 0))

    @property
    def exit_code(self):
        return EXIT_UNKNOWN if self.unknown_count else 0

    def to_dict(self, include_timing=False):
        d = {
            "version": self.version,
            "seed": self.seed,
            "config": self.config,
            "model": self.model,
            "items": self.items,
            "summary": self.summary,
        }
        if include_timing:
            d["timing"] = self.timing
        return _clean(d)

    def to_json(self, include_timing=False):
        return json.dumps(self.to_dict(include_timing), sort_keys=True, indent=2) + "\n"


def _clean(v):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v) if math.isfinite(v) else None
    return v


def schema():
    """The JSON schema reports conform to."""
    with resources.files("gpcert").joinpath("schemas/report.schema.json").open() as fh:
        return json.load(fh)


def validate_report(d):
    import jsonschema

    jsonschema.validate(d, schema())


def _quantiles(values):
    v = np.asarray(values, dtype=float)
    q = np.quantile(v, [0.0, 0.25, 0.5, 0.75, 1.0])
    return dict(zip(("min", "q25", "median", "q75", "max"), q.tolist()))


def load_data(cfg):
    """Dataset and preprocessing info for ``cfg``."""
    if cfg.dataset == "synthetic2d":
        return generate_synthetic2d(cfg.seed, cfg.n_total), {}
    if cfg.dataset == "csv":
        ld = load_csv(cfg.data_path, cfg.label_column, cfg.normalization, cfg.columns)
        info = {"class_values": ld.class_values}
        if ld.standardizer is not None:
            info["standardization"] = ld.standardizer.to_dict()
        return ld.data, info
    ld = load_idx_images(cfg.data_path, cfg.labels_path, cfg.classes, cfg.downsample)
    return ld.data, {"class_values": ld.class_values}


def train_model(cfg, train):
    lik = LikelihoodSpec(cfg.likelihood, cfg.probit_scale)
    theta = KernelParams.isotropic(cfg.signal_variance, cfg.lengthscale, train.dim)
    if cfg.epochs:
        theta = tune_hyperparameters(train, lik, cfg.epochs, theta, shared_lengthscale=cfg.shared_lengthscale)
    th = theta if lik.binary else (theta,) * train.n_classes
    return fit(train, th, lik)


def _select_points(cfg, post, test):
    n = min(cfg.n_points, len(test))
    if cfg.point_selection == "first":
        return np.arange(n)
    if cfg.point_selection == "random":
        return np.random.default_rng(cfg.seed).choice(len(test), n, replace=False)
    if post.binary:
        margin = np.abs(predict_prob_batch(post, test.inputs, 1) - 0.5)
    else:
        P = np.stack([predict_prob_batch(post, test.inputs, c) for c in range(1, post.n_classes + 1)], axis=1)
        top2 = np.sort(P, axis=1)[:, -2:]
        margin = top2[:, 1] - top2[:, 0]
    return np.argsort(margin, kind="stable")[:n]


def _varying_dims(cfg, post):
    if cfg.dims_mode == "all":
        return None
    if cfg.dims_mode == "explicit":
        return select_features(post.dim, "explicit", indices=cfg.dims)
    return select_features(post, "lengthscale", cfg.k)


def _certify_cfg(cfg, **kw):
    base = CertifyConfig(
        epsilon=cfg.epsilon,
        partition_size=cfg.partition_size,
        max_iterations=cfg.max_iterations,
        time_limit=cfg.time_limit,
    )
    return dataclasses.replace(base, **kw)


def _model_info(post, test, prep):
    acc = float(np.mean([predict_class(post, x) == y for x, y in zip(test.inputs, test.labels)])) if len(test) else None
    return {
        "likelihood": {"kind": post.likelihood.kind, "scale": post.likelihood.scale},
        "n_classes": post.n_classes,
        "n_train": post.n_train,
        "n_test": len(test),
        "dim": post.dim,
        "kernels": [{"signal_variance": k.signal_variance, "lengthscales": k.lengthscales.tolist()} for k in post.kernels],
        "log_marginal": post.log_marginal,
        "test_accuracy": acc,
        "preprocessing": prep,
    }


def _run_certify(cfg, post, pts, idx, dims, domain):
    items, worst = [], 0.0
    for j, (i, x) in enumerate(zip(idx, pts)):
        c = cfg.class_id or predict_class(post, x)
        for k, g in enumerate(cfg.gammas):
            box = InputBox.from_ball(x, g, dims, domain)
            entry = {"index": int(i), "point": x, "gamma": g, "class_id": c}
            for obj in ("min", "max"):
                trace = None
                if cfg.trace_dir:
                    os.makedirs(cfg.trace_dir, exist_ok=True)
                    trace = os.path.join(cfg.trace_dir, f"item{j:04d}_g{k:02d}_{obj}.jsonl")
                r = certify(post, box, _certify_cfg(cfg, objective=obj, class_id=c, trace_path=trace))
                entry[obj] = r.to_dict()
                worst = max(worst, r.gap)
            items.append(entry)
    unknown = sum(not (e["min"]["converged"] and e["max"]["converged"]) for e in items)
    return items, {"count": len(items), "max_gap": worst, "unknown": unknown}


def _run_safety(cfg, post, pts, idx, dims, domain):
    items, counts = [], {"safe": 0, "unsafe": 0, "unknown": 0}
    for i, x in zip(idx, pts):
        vs = safety_sweep(post, x, cfg.gammas, _certify_cfg(cfg), dims, domain)
        for v in vs:
            counts[v.verdict] += 1
        items.append({"index": int(i), "point": x, "class_id": vs[0].class_id, "verdicts": [v.to_dict() for v in vs]})
    return items, dict(counts, count=len(items))


def _run_robustness(cfg, post, pts, idx, dims, domain):
    items = []
    g = cfg.gammas[0]
    for i, x in zip(idx, pts):
        box = InputBox.from_ball(x, g, dims, domain)
        r = delta_robustness(post, box, _certify_cfg(cfg))
        items.append({"index": int(i), "point": x, "gamma": g, "delta": r.to_dict()})
    lo = [it["delta"]["lower"] for it in items]
    hi = [it["delta"]["upper"] for it in items]
    gaps = [it["delta"]["gap"] for it in items]
    return items, {
        "count": len(items),
        "epsilon": cfg.epsilon,
        "max_gap": max(gaps),
        "delta_lower": _quantiles(lo),
        "delta_upper": _quantiles(hi),
        "unknown": sum(gp > cfg.epsilon for gp in gaps),
    }


def _run_interpret(cfg, post, pts, idx, dims, domain):
    g = cfg.gammas[0]
    c = cfg.class_id or 1
    items = []
    for i, x in zip(idx, pts):
        p = interpret_local(post, x, g, cfg.interp_epsilon, c, dims)
        items.append({"index": int(i), "point": x, "profile": p.to_dict()})
    glob = interpret_global(post, pts, g, cfg.interp_epsilon, c, dims)
    return items, {"count": len(items), "global": glob.to_dict(), "unknown": 0}


def _run_attack(cfg, post, pts, idx, dims, domain):
    items, n_succ, n_unknown = [], 0, 0
    for i, x in zip(idx, pts):
        vs = safety_sweep(post, x, cfg.gammas, _certify_cfg(cfg), dims, domain)
        rows = []
        for v in vs:
            a = gpfgs_attack(post, x, v.gamma, dims, domain)
            n_succ += a.success
            n_unknown += v.verdict == "unknown"
            rows.append({"gamma": v.gamma, "attack": a.to_dict(), "verdict": v.to_dict()})
        items.append({"index": int(i), "point": x, "results": rows})
    total = sum(len(it["results"]) for it in items)
    missed = sum(r["verdict"]["verdict"] == "unsafe" and not r["attack"]["success"] for it in items for r in it["results"])
    return items, {"count": total, "attack_successes": n_succ, "certified_unsafe_missed_by_attack": missed,
                   "unknown": n_unknown}


_RUNNERS = {
    "certify": _run_certify,
    "safety": _run_safety,
    "robustness": _run_robustness,
    "interpret": _run_interpret,
    "attack": _run_attack,
}


def _csv_rows(analysis, items):
    if analysis == "certify":
        head = ["index", "gamma", "objective", "lower", "upper", "gap", "epsilon", "status"]
        rows = [[it["index"], it["gamma"], o, it[o]["lower"], it[o]["upper"], it[o]["gap"], it[o]["epsilon"],
                 it[o]["status"]] for it in items for o in ("min", "max")]
    elif analysis == "safety":
        head = ["index", "gamma", "verdict", "lower", "upper", "epsilon"]
        rows = [[it["index"], v["gamma"], v["verdict"], v["lower"], v["upper"], v["epsilon"]]
                for it in items for v in it["verdicts"]]
    elif analysis == "robustness":
        head = ["index", "gamma", "delta_lower", "delta_upper", "epsilon"]
        rows = [[it["index"], it["gamma"], it["delta"]["lower"], it["delta"]["upper"], it["delta"]["epsilon"]]
                for it in items]
    elif analysis == "interpret":
        head = ["index", "dim", "delta", "error_bar"]
        rows = [[it["index"], d, v, it["profile"]["error_bar"]] for it in items
                for d, v in enumerate(it["profile"]["delta"])]
    else:
        head = ["index", "gamma", "attack_success", "attack_probability", "verdict"]
        rows = [[it["index"], r["gamma"], r["attack"]["success"], r["attack"]["probability"], r["verdict"]["verdict"]]
                for it in items for r in it["results"]]
    return head, rows


def write_report(report, path):
    """Write the JSON report, a CSV table next to it and a timing sidecar."""
    with open(path, "w") as fh:
        fh.write(report.to_json())
    stem = os.path.splitext(path)[0]
    analysis = report.config["analysis"]
    if analysis in _RUNNERS:
        head, rows = _csv_rows(analysis, report.to_dict()["items"])
        with open(stem + ".csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(head)
            w.writerows(rows)
    with open(stem + ".timing.json", "w") as fh:
        json.dump(_clean(report.timing), fh, sort_keys=True, indent=2)


def run_experiment(cfg):
    """Train or load a model, run the configured analysis and return a Report.

    Files are written when ``cfg.output`` is set.
    """
    cfg.validate()
    t0 = time.perf_counter()
    data, prep = load_data(cfg)
    n_train = cfg.scaled(cfg.n_train)
    n_test = min(cfg.scaled(cfg.n_test), len(data) - n_train)
    train, test = train_test_split(data, n_train, n_test, cfg.seed)
    if cfg.posterior_path:
        post = load_posterior(cfg.posterior_path)
    else:
        post = train_model(cfg, train)
    if cfg.save_posterior:
        save_posterior(post, cfg.save_posterior)
    t_train = time.perf_counter() - t0
    model = _model_info(post, test, prep)
    if cfg.analysis == "train":
        items, summary = [], {"unknown": 0}
    else:
        idx = _select_points(cfg, post, test)
        pts = test.inputs[idx]
        dims = _varying_dims(cfg, post)
        domain = tuple(cfg.domain) if cfg.domain else None
        items, summary = _RUNNERS[cfg.analysis](cfg, post, pts, idx, dims, domain)
    report = Report(
        config=cfg.to_dict(),
        model=model,
        items=items,
        summary=summary,
        seed=cfg.seed,
        timing={"train_seconds": t_train, "total_seconds": time.perf_counter() - t0},
    )
    if cfg.output:
        write_report(report, cfg.output)
    return report
