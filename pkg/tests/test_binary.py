import math

import numpy as np
import pytest

from gpcert.binary import (
    build_partition,
    default_partition_size,
    evaluate_candidates,
    pi_max_upper,
    pi_min_lower,
    probit_bounds,
)
from gpcert.box import InputBox
from gpcert.errors import EmptyCandidateSet, UnsupportedLikelihood, WrongLikelihood
from gpcert.gp import LikelihoodSpec, predict_prob, predict_prob_batch
from gpcert.latent import LatentBounds, latent_bounds

from conftest import make_binary


def _point_bounds(post, x):
    return latent_bounds(post, InputBox.point(x))


class TestPartition:
    def test_single_interval(self):
        p = build_partition(LikelihoodSpec("logistic"), 1)
        assert p.lower[0] == -np.inf and p.upper[0] == np.inf

    def test_probit_median(self):
        p = build_partition(LikelihoodSpec("probit"), 2)
        np.testing.assert_allclose(p.upper[0], 0.0, atol=1e-15)

    def test_logistic_quartiles(self):
        p = build_partition(LikelihoodSpec("logistic"), 4)
        np.testing.assert_allclose(p.upper[:3], [-math.log(3), 0.0, math.log(3)], atol=1e-14)
        np.testing.assert_allclose(np.diff(p.link_lower), 0.25, atol=1e-14)

    def test_default_size(self):
        assert default_partition_size(0.01) == 200
        assert default_partition_size(0.3) == 7

    def test_softmax_rejected(self):
        with pytest.raises(UnsupportedLikelihood):
            build_partition(LikelihoodSpec("softmax"), 4)


class TestPartitionBounds:
    def test_vacuous_with_one_piece(self, logistic_post):
        lb = _point_bounds(logistic_post, np.zeros(2))
        part = build_partition(logistic_post.likelihood, 1)
        assert pi_min_lower(logistic_post, lb, part) == 0.0
        assert pi_max_upper(logistic_post, lb, part) == 1.0

    @pytest.mark.parametrize("n", [64, 256, 2048])
    def test_degenerate_box_gap(self, logistic_post, n):
        x = np.array([0.3, -0.4])
        p = predict_prob(logistic_post, x)
        lb = _point_bounds(logistic_post, x)
        part = build_partition(logistic_post.likelihood, n)
        lo, hi = pi_min_lower(logistic_post, lb, part), pi_max_upper(logistic_post, lb, part)
        assert p - 2.0 / n <= lo <= p + 1e-9
        assert p - 1e-9 <= hi <= p + 2.0 / n

    def test_refinement_tightens(self, logistic_post):
        box = InputBox([-0.2, 0.1], [0.1, 0.3])
        lb = latent_bounds(logistic_post, box)
        los = [pi_min_lower(logistic_post, lb, build_partition(logistic_post.likelihood, 2 ** k)) for k in range(1, 10)]
        assert np.all(np.diff(los) >= -1e-15)

    def test_grid_oracle(self):
        post = make_binary(7, 20, 2, "logistic")
        rng = np.random.default_rng(7)
        part = build_partition(post.likelihood, 256)
        for _ in range(5):
            c = rng.normal(size=2)
            box = InputBox(c - 0.15, c + 0.15)
            lb = latent_bounds(post, box)
            p = predict_prob_batch(post, box.grid(41))
            assert pi_min_lower(post, lb, part) <= p.min() + 1e-9
            assert pi_max_upper(post, lb, part) >= p.max() - 1e-9


class TestProbit:
    def test_zero_mean(self, probit_post):
        lo, hi = probit_bounds(probit_post, LatentBounds(0.0, 0.0, 0.5, 2.0))
        assert lo == hi == 0.5

    def test_degenerate_exact(self, probit_post):
        x = np.array([-0.2, 0.5])
        lo, hi = probit_bounds(probit_post, _point_bounds(probit_post, x))
        np.testing.assert_allclose([lo, hi], predict_prob(probit_post, x), atol=1e-7)

    def test_dominates_partition(self):
        post = make_binary(8, 20, 2, "probit")
        part = build_partition(post.likelihood, 4096)
        rng = np.random.default_rng(8)
        for _ in range(10):
            c = rng.normal(size=2)
            box = InputBox(c - 0.2, c + 0.2)
            lb = latent_bounds(post, box)
            lo, hi = probit_bounds(post, lb)
            p = predict_prob_batch(post, box.grid(41))
            assert lo <= p.min() + 1e-9 and hi >= p.max() - 1e-9
            assert lo >= pi_min_lower(post, lb, part) - 1e-3
            assert hi <= pi_max_upper(post, lb, part) + 1e-3

    def test_wrong_likelihood(self, logistic_post):
        with pytest.raises(WrongLikelihood):
            probit_bounds(logistic_post, LatentBounds(0.0, 1.0, 0.5, 1.0))


class TestCandidates:
    def test_single(self, probit_post):
        x = np.array([0.1, 0.2])
        v, w = evaluate_candidates(probit_post, x)
        assert v == predict_prob(probit_post, x)
        np.testing.assert_array_equal(w, x)

    def test_planted_minimiser(self, probit_post):
        box = InputBox([-0.5, -0.5], [0.5, 0.5])
        g = box.grid(31)
        p = predict_prob_batch(probit_post, g)
        v, _ = evaluate_candidates(probit_post, np.vstack([box.midpoint, g[np.argmin(p)]]))
        assert v == p.min()

    def test_max_objective_and_class2(self, probit_post):
        pts = np.array([[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0]])
        p = predict_prob_batch(probit_post, pts)
        assert evaluate_candidates(probit_post, pts, "max")[0] == p.max()
        np.testing.assert_allclose(evaluate_candidates(probit_post, pts, "min", c=2)[0], 1 - p.max())

    def test_empty(self, probit_post):
        with pytest.raises(EmptyCandidateSet):
            evaluate_candidates(probit_post, np.empty((0, 2)))
