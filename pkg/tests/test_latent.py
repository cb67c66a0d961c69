import math

import numpy as np
import pytest

from gpcert.box import InputBox
from gpcert.gp import KernelParams, predict_latent_batch
from gpcert.latent import (
    latent_bounds,
    latent_bounds_multiclass,
    mean_bounds,
    relax_kernel,
    relax_kernel_raw,
    variance_lower_bound,
    variance_upper_bound,
)

from conftest import make_binary, make_multiclass

TOL = 1e-9


def _random_box(rng, d, side=0.4):
    c = rng.normal(size=d)
    w = rng.uniform(0.05, side, d)
    return InputBox(c - w / 2, c + w / 2)


def _kernel_at(post, X, c=0):
    return post.kernel_vector(np.atleast_2d(X), c)


class TestRelaxation:
    def test_degenerate_box_exact(self, probit_post):
        x = np.array([0.3, -0.2])
        rel = relax_kernel(probit_post, InputBox.point(x))
        r = _kernel_at(probit_post, x)[0]
        np.testing.assert_allclose(rel.r_low, r, rtol=1e-14)
        np.testing.assert_allclose(rel.r_high, r, rtol=1e-14)

    def test_training_point_inside(self, probit_post):
        x0 = probit_post.inputs[3]
        rel = relax_kernel(probit_post, InputBox(x0 - 0.1, x0 + 0.1))
        assert rel.r_high[3] == probit_post.kernel.signal_variance

    def test_sampled_soundness(self):
        rng = np.random.default_rng(0)
        for seed in range(20):
            post = make_binary(seed, 15, 2)
            box = _random_box(rng, 2, 1.0)
            rel = relax_kernel(post, box)
            pts = box.sample(1000, seed=seed)
            R = _kernel_at(post, pts)
            xv = pts[:, rel.var_idx]
            assert np.all(R >= rel.r_low - 1e-12) and np.all(R <= rel.r_high + 1e-12)
            assert np.all(R >= xv @ rel.lo_w.T + rel.lo_c - 1e-12)
            assert np.all(R <= xv @ rel.up_w.T + rel.up_c + 1e-12)


class TestMeanBounds:
    def test_single_monotone_term(self):
        # r(x) = exp(-x^2 / 2) on [sqrt(2 ln 2), sqrt(2 ln 5)] spans [0.2, 0.5]
        box = InputBox([math.sqrt(2 * math.log(2))], [math.sqrt(2 * math.log(5))])
        rel = relax_kernel_raw(np.zeros((1, 1)), KernelParams(1.0, np.ones(1)), box)
        lo, hi, _, _ = mean_bounds(None, rel, box, weights=np.ones(1), slack=0.0)
        np.testing.assert_allclose([lo, hi], [0.2, 0.5], rtol=1e-12)

    def test_degenerate_box(self, logistic_post):
        x = np.array([0.1, 0.4])
        lb = latent_bounds(logistic_post, InputBox.point(x))
        mu, var = predict_latent_batch(logistic_post, x[None])
        np.testing.assert_allclose([lb.mean_low, lb.mean_high], mu[0], atol=1e-10)
        np.testing.assert_allclose([lb.var_low, lb.var_high], var[0], atol=1e-6)

    def test_grid_oracle(self):
        post = make_binary(5, 20, 2)
        rng = np.random.default_rng(5)
        for _ in range(5):
            box = _random_box(rng, 2, 0.2)
            lb = latent_bounds(post, box)
            mu, var = predict_latent_batch(post, box.grid(101))
            assert lb.mean_low <= mu.min() + TOL and mu.max() <= lb.mean_high + TOL
            assert lb.var_low <= var.min() + TOL and var.max() <= lb.var_high + TOL


class TestVarianceBounds:
    def test_single_term_secant_exact(self):
        box = InputBox([0.5], [1.5])
        rel = relax_kernel_raw(np.zeros((1, 1)), KernelParams(1.0, np.ones(1)), box)
        lam, prior = 0.7, 1.0
        v, _ = variance_lower_bound(None, rel, box, eigen=(np.eye(1), np.array([lam])), prior=prior, slack=0.0)
        np.testing.assert_allclose(v, prior - lam * rel.r_high[0] ** 2, rtol=1e-12)

    def test_far_box_gives_prior(self, probit_post):
        box = InputBox([50.0, 50.0], [51.0, 51.0])
        v, _ = variance_upper_bound(probit_post, relax_kernel(probit_post, box), box)
        np.testing.assert_allclose(v, probit_post.prior_variance, atol=1e-8)

    @pytest.mark.parametrize("use", [True, False])
    def test_lp_and_analytic_paths_sound(self, use):
        post = make_binary(11, 25, 2, "logistic")
        rng = np.random.default_rng(11)
        for _ in range(4):
            box = _random_box(rng, 2, 0.6)
            lb = latent_bounds(post, box, use_lp=use, use_qp=use)
            _, var = predict_latent_batch(post, box.grid(61))
            assert lb.var_low <= var.min() + TOL and var.max() <= lb.var_high + TOL


class TestLatentBounds:
    def test_nested_boxes(self):
        post = make_binary(2, 20, 2)
        inner = InputBox([-0.2, 0.0], [0.1, 0.2])
        outer = InputBox([-0.4, -0.1], [0.3, 0.5])
        a, b = latent_bounds(post, inner), latent_bounds(post, outer)
        assert b.mean_low <= a.mean_low + 1e-12 and a.mean_high <= b.mean_high + 1e-12
        assert b.var_low <= a.var_low + 1e-12 and a.var_high <= b.var_high + 1e-12

    def test_witnesses_inside(self):
        post = make_binary(3, 20, 3)
        box = InputBox([-0.3, 0.0, 0.2], [0.1, 0.0, 0.6])
        lb = latent_bounds(post, box)
        assert len(lb.witnesses) == 4
        assert all(box.contains(w, tol=1e-12) for w in lb.witnesses)

    def test_pinned_dims_match_lower_dim_box(self):
        post = make_binary(4, 20, 3)
        box = InputBox.from_ball([0.2, -0.1, 0.3], 0.2, dims=[0])
        lb = latent_bounds(post, box)
        mu, var = predict_latent_batch(post, box.grid(201))
        assert lb.mean_low <= mu.min() + TOL and mu.max() <= lb.mean_high + TOL


class TestMulticlass:
    def test_degenerate_box(self, softmax_post):
        x = np.array([0.5, -0.3])
        mb = latent_bounds_multiclass(softmax_post, InputBox.point(x))
        mu, cov = predict_latent_batch(softmax_post, x[None])
        np.testing.assert_allclose(mb.mean_low, mu[0], atol=1e-8)
        np.testing.assert_allclose(mb.mean_high, mu[0], atol=1e-8)
        np.testing.assert_allclose(mb.cov_low, cov[0], atol=1e-8)
        np.testing.assert_allclose(mb.cov_high, cov[0], atol=1e-8)

    def test_far_box_prior(self, softmax_post):
        mb = latent_bounds_multiclass(softmax_post, InputBox([80.0, 80.0], [81.0, 81.0]))
        np.testing.assert_allclose(mb.mean_low, 0.0, atol=1e-8)
        np.testing.assert_allclose(mb.mean_high, 0.0, atol=1e-8)
        prior = np.diag([k.signal_variance for k in softmax_post.kernels])
        np.testing.assert_allclose(mb.cov_high, prior, atol=1e-8)

    def test_grid_soundness(self):
        rng = np.random.default_rng(3)
        for seed in range(5):
            post = make_multiclass(seed)
            box = _random_box(rng, 2, 0.5)
            mb = latent_bounds_multiclass(post, box)
            mu, cov = predict_latent_batch(post, box.grid(41))
            assert np.all(mu >= mb.mean_low - TOL) and np.all(mu <= mb.mean_high + TOL)
            assert np.all(cov >= mb.cov_low - TOL) and np.all(cov <= mb.cov_high + TOL)
