import numpy as np
import pytest

from gpcert.gp import Dataset, KernelParams, LikelihoodSpec, fit


def make_binary(seed=0, m=20, d=2, kind="probit", noise=0.5, sv=None, ls=None):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(m, d))
    y = np.where(X[:, 0] + noise * rng.normal(size=m) > 0, 1, 2)
    if len(set(y.tolist())) < 2:
        y[0] = 3 - y[0]
    sv = rng.uniform(0.5, 3.0) if sv is None else sv
    ls = rng.uniform(0.4, 2.0, d) if ls is None else np.broadcast_to(np.asarray(ls, float), (d,))
    return fit(Dataset(X, y, 2), KernelParams(sv, ls), LikelihoodSpec(kind))


def make_multiclass(seed=0, m=18, d=2, C=3):
    rng = np.random.default_rng(seed)
    centres = rng.normal(scale=2.0, size=(C, d))
    y = np.arange(m) % C + 1
    X = centres[y - 1] + rng.normal(size=(m, d))
    th = tuple(KernelParams(rng.uniform(1.0, 3.0), rng.uniform(0.8, 2.0, d)) for _ in range(C))
    return fit(Dataset(X, y, C), th, LikelihoodSpec("softmax"))


@pytest.fixture
def probit_post():
    return make_binary(0, 20, 2, "probit")


@pytest.fixture
def logistic_post():
    return make_binary(1, 20, 2, "logistic")


@pytest.fixture
def softmax_post():
    return make_multiclass(0)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
