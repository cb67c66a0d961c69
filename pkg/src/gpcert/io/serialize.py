"""Text serialisation of posteriors.

Floats are written with Python's shortest round-trip repr, so a
save/load cycle reproduces every array bit for bit.
"""

import json
import math

import numpy as np

from ..errors import FormatError
from ..gp import GPCPosterior, KernelParams, LikelihoodSpec

FORMAT = "gpcert-posterior"
VERSION = 1


def _num(v):
    v = float(v)
    return v if math.isfinite(v) else None


def posterior_to_dict(post):
    return {
        "format": FORMAT,
        "version": VERSION,
        "likelihood": {"kind": post.likelihood.kind, "scale": post.likelihood.scale},
        "n_classes": post.n_classes,
        "kernels": [
            {"signal_variance": k.signal_variance, "lengthscales": k.lengthscales.tolist()} for k in post.kernels
        ],
        "inputs": post.inputs.tolist(),
        "labels": post.labels.tolist(),
        "weights": post.weights.tolist(),
        "precision": post.precision.tolist(),
        "mode": post.mode.tolist(),
        "jitter": post.jitter,
        "log_marginal": _num(post.log_marginal),
        "iterations": post.iterations,
    }


def posterior_from_dict(d):
    if d.get("format") != FORMAT:
        raise FormatError("not a serialised posterior")
    if d.get("version") != VERSION:
        raise FormatError(f"unsupported posterior version {d.get('version')}")
    lm = d.get("log_marginal")
    return GPCPosterior(
        inputs=np.array(d["inputs"], dtype=float),
        labels=np.array(d["labels"], dtype=np.int64),
        n_classes=int(d["n_classes"]),
        kernels=tuple(KernelParams(k["signal_variance"], np.array(k["lengthscales"], dtype=float)) for k in d["kernels"]),
        likelihood=LikelihoodSpec(d["likelihood"]["kind"], d["likelihood"]["scale"]),
        weights=np.array(d["weights"], dtype=float),
        precision=np.array(d["precision"], dtype=float),
        mode=np.array(d["mode"], dtype=float),
        jitter=float(d["jitter"]),
        log_marginal=float("nan") if lm is None else float(lm),
        iterations=int(d["iterations"]),
    )


def save_posterior(post, path):
    with open(path, "w") as fh:
        json.dump(posterior_to_dict(post), fh)
        fh.write("\n")


def load_posterior(path):
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as e:
            raise FormatError(f"{path}: {e}") from None
    return posterior_from_dict(d)
