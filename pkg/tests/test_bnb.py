import json

import numpy as np
import pytest

from gpcert.bnb import CertifyConfig, Region, certify, split_region
from gpcert.box import InputBox
from gpcert.errors import DegenerateRegion
from gpcert.gp import predict_prob, predict_prob_batch

from conftest import make_binary, make_multiclass


def _grid_extreme(post, box, objective, c=1, n=101):
    p = predict_prob_batch(post, box.grid(n), c)
    return p.min() if objective == "min" else p.max()


class TestSplit:
    def test_square_splits_first_axis(self):
        a, b = split_region(Region(InputBox([0.0, 0.0], [1.0, 1.0]), 0.0, 1.0))
        assert a.box.upper[0] == 0.5 and a.box.upper[1] == 1.0

    def test_widest_axis(self):
        a, _ = split_region(Region(InputBox([0.0, 0.0], [0.4, 0.1]), 0.0, 1.0))
        np.testing.assert_allclose(a.box.upper, [0.2, 0.1])
        a, _ = split_region(Region(InputBox([0.0, 0.0], [0.1, 0.4]), 0.0, 1.0))
        np.testing.assert_allclose(a.box.upper, [0.1, 0.2])

    def test_relative_to_root(self):
        # 0.4 of a width-4 root is narrower than 0.1 of a width-0.1 root
        a, _ = split_region(Region(InputBox([0.0, 0.0], [0.4, 0.1]), 0.0, 1.0), np.array([4.0, 0.1]))
        np.testing.assert_allclose(a.box.upper, [0.4, 0.05])

    def test_volume_accounting(self):
        root = InputBox([0.0, -1.0, 2.0], [1.0, 1.0, 2.5])
        leaves = [Region(root, 0.0, 0.0)]
        for _ in range(5):
            leaves = [c for r in leaves for c in split_region(r, root.widths)]
        assert len(leaves) == 32 and all(r.depth == 5 for r in leaves)
        np.testing.assert_allclose(sum(r.box.volume() for r in leaves), root.volume(), rtol=1e-14)

    def test_degenerate(self):
        with pytest.raises(DegenerateRegion):
            split_region(Region(InputBox.point([1.0, 2.0]), 0.0, 0.0))


class TestCertify:
    def test_degenerate_root_probit(self, probit_post):
        x = np.array([0.2, 0.1])
        res = certify(probit_post, InputBox.point(x), CertifyConfig(epsilon=0.01))
        assert res.iterations == 0 and res.converged
        np.testing.assert_allclose([res.lower, res.upper], predict_prob(probit_post, x), atol=1e-6)

    def test_degenerate_root_logistic(self, logistic_post):
        res = certify(logistic_post, InputBox.point([0.2, 0.1]), CertifyConfig(epsilon=0.05))
        assert res.converged and res.gap <= 0.05

    @pytest.mark.parametrize("objective", ["min", "max"])
    @pytest.mark.parametrize("c", [1, 2])
    def test_sandwich_contains_grid_optimum(self, objective, c):
        post = make_binary(12, 25, 2, "probit")
        box = InputBox.from_ball([0.1, -0.2], 0.3)
        res = certify(post, box, CertifyConfig(epsilon=0.01, objective=objective, class_id=c))
        opt = _grid_extreme(post, box, objective, c, 201)
        assert res.converged and res.gap <= 0.01
        assert res.lower - 1e-9 <= opt <= res.upper + 1e-9
        assert box.contains(res.witness)
        np.testing.assert_allclose(predict_prob(post, res.witness, c), res.inner, rtol=1e-12)

    def test_history_anytime(self):
        post = make_binary(13, 25, 2, "logistic")
        box = InputBox.from_ball([0.0, 0.3], 0.4)
        res = certify(post, box, CertifyConfig(epsilon=0.01))
        opt = _grid_extreme(post, box, "min")
        h = np.array(res.history)
        assert np.all(h[:, 0] <= opt + 1e-9) and np.all(opt <= h[:, 1] + 1e-9)
        assert np.all(np.diff(h[:, 1] - h[:, 0]) <= 1e-15)
        assert np.all(np.diff(h[:, 0]) >= -1e-15) and np.all(np.diff(h[:, 1]) <= 1e-15)

    def test_finer_epsilon_needs_more_work(self):
        post = make_binary(14, 25, 2)
        box = InputBox.from_ball([0.0, 0.0], 0.5)
        coarse = certify(post, box, CertifyConfig(epsilon=0.05))
        fine = certify(post, box, CertifyConfig(epsilon=0.01))
        assert fine.iterations >= coarse.iterations

    def test_deterministic(self, logistic_post):
        box = InputBox.from_ball([0.1, 0.1], 0.3)
        a = certify(logistic_post, box, CertifyConfig(epsilon=0.02))
        b = certify(logistic_post, box, CertifyConfig(epsilon=0.02))
        assert (a.lower, a.upper, a.iterations) == (b.lower, b.upper, b.iterations)
        np.testing.assert_array_equal(a.witness, b.witness)

    def test_budget_returns_sound_sandwich(self):
        post = make_binary(15, 25, 2, "logistic")
        box = InputBox.from_ball([0.0, 0.0], 1.0)
        res = certify(post, box, CertifyConfig(epsilon=1e-4, max_iterations=3))
        assert not res.converged and res.status == "budget" and res.iterations == 3
        opt = _grid_extreme(post, box, "min")
        assert res.lower - 1e-9 <= opt <= res.upper + 1e-9

    def test_threshold_stops_early(self):
        post = make_binary(16, 25, 2)
        box = InputBox.from_ball([0.0, 0.0], 0.3)
        full = certify(post, box, CertifyConfig(epsilon=1e-3))
        thr = 0.5 * (full.lower + full.upper) + 0.2
        res = certify(post, box, CertifyConfig(epsilon=1e-3, threshold=min(thr, 0.99)))
        assert res.status in ("decided", "converged")
        assert res.iterations <= full.iterations

    def test_trace_file(self, tmp_path, probit_post):
        path = tmp_path / "trace.jsonl"
        res = certify(probit_post, InputBox.from_ball([0.0, 0.0], 0.3), CertifyConfig(trace_path=str(path)))
        rows = [json.loads(line) for line in path.read_text().splitlines()]
        gaps = [r["gap"] for r in rows if "gap" in r]
        assert len(gaps) == len(res.history)
        assert gaps[-1] <= 0.01

    def test_multiclass(self):
        post = make_multiclass(1)
        box = InputBox.from_ball([0.0, 0.0], 0.05)
        res = certify(post, box, CertifyConfig(epsilon=0.1, objective="min", class_id=2, max_iterations=200))
        opt = _grid_extreme(post, box, "min", 2, 11)
        assert res.lower - 1e-3 <= opt <= res.upper + 1e-9

    def test_config_validation(self):
        with pytest.raises(ValueError):
            CertifyConfig(epsilon=0.0)
        with pytest.raises(ValueError):
            CertifyConfig(objective="mean")
