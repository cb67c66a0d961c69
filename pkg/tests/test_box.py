import numpy as np
import pytest

from gpcert.box import InputBox
from gpcert.errors import DegenerateRegion, DimensionMismatch


class TestInputBox:
    def test_ball_pins_other_dims(self):
        b = InputBox.from_ball([1.0, 2.0, 3.0], 0.5, dims=[1])
        np.testing.assert_array_equal(b.lower, [1.0, 1.5, 3.0])
        np.testing.assert_array_equal(b.upper, [1.0, 2.5, 3.0])
        np.testing.assert_array_equal(b.varying, [1])

    def test_domain_clip_keeps_anchor(self):
        b = InputBox.from_ball([0.05, 0.5], 0.1, domain=(0.0, 1.0))
        np.testing.assert_allclose(b.lower, [0.0, 0.4])
        assert b.contains(b.anchor)

    def test_split_covers(self):
        b = InputBox([0.0, 0.0], [2.0, 1.0])
        l, r = b.split(0)
        assert l.upper[0] == r.lower[0] == 1.0
        assert l.volume() + r.volume() == b.volume()

    def test_split_degenerate_axis(self):
        with pytest.raises(DegenerateRegion):
            InputBox([0.0, 0.0], [0.0, 1.0]).split(0)

    def test_validation(self):
        with pytest.raises(ValueError):
            InputBox([1.0], [0.0])
        with pytest.raises(DimensionMismatch):
            InputBox([0.0], [1.0, 2.0])
        with pytest.raises(ValueError):
            InputBox([0.0], [np.inf])

    def test_grid_sample_embed(self):
        b = InputBox([0.0, 5.0, -1.0], [1.0, 5.0, 1.0])
        g = b.grid(3)
        assert g.shape == (9, 3) and np.all(g[:, 1] == 5.0)
        s = b.sample(64, seed=1)
        assert all(b.contains(p) for p in s)
        np.testing.assert_array_equal(b.embed(np.array([0.5, 2.0])), [0.5, 5.0, 1.0])

    def test_corners(self):
        c = InputBox([0.0, 0.0], [1.0, 2.0]).corners()
        assert {tuple(r) for r in c} == {(0, 0), (1, 0), (0, 2), (1, 2)}

    def test_point(self):
        b = InputBox.point([1.0, 2.0])
        assert b.is_degenerate and b.volume() == 0.0
