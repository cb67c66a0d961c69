import gzip

import numpy as np
import pytest

from gpcert.data import (
    downsample2x,
    generate_synthetic2d,
    load_csv,
    load_idx_images,
    read_idx,
    select_features,
    synthetic_glyphs,
    train_test_split,
    write_idx,
)
from gpcert.errors import EmptyFilter, FormatError, KOutOfRange, LabelError, ParseError
from gpcert.gp import KernelParams


class TestSynthetic2D:
    def test_balanced_and_standardised(self):
        d = generate_synthetic2d(3, 1200)
        assert np.sum(d.labels == 1) == np.sum(d.labels == 2) == 600
        np.testing.assert_allclose(d.inputs.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(d.inputs.std(axis=0), 1.0, rtol=1e-12)

    def test_geometry(self):
        d = generate_synthetic2d(0, 1200)
        m1, m2 = d.inputs[d.labels == 1].mean(axis=0), d.inputs[d.labels == 2].mean(axis=0)
        assert m1[0] > m2[0] and m1[1] < m2[1]

    def test_two_points_and_determinism(self):
        assert sorted(generate_synthetic2d(0, 2).labels.tolist()) == [1, 2]
        a, b = generate_synthetic2d(5), generate_synthetic2d(5)
        np.testing.assert_array_equal(a.inputs, b.inputs)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_split(self):
        tr, te = train_test_split(generate_synthetic2d(0), 1000, 200, seed=0)
        assert len(tr) == 1000 and len(te) == 200
        with pytest.raises(ValueError):
            train_test_split(generate_synthetic2d(0, 10), 8, 8)


class TestCSV:
    def _write(self, path, text):
        path.write_text(text)
        return str(path)

    def test_round_trip(self, tmp_path):
        p = self._write(tmp_path / "a.csv", "x1,x2,label\n1.5,-2,yes\n0.25,3,no\n-1,0,yes\n")
        ld = load_csv(p, label_column="label", normalization="none")
        np.testing.assert_array_equal(ld.data.inputs, [[1.5, -2], [0.25, 3], [-1, 0]])
        np.testing.assert_array_equal(ld.data.labels, [2, 1, 2])
        assert ld.class_values == ["no", "yes"] and ld.data.feature_names == ("x1", "x2")

    def test_feature_selection_57_to_11(self, tmp_path):
        rng = np.random.default_rng(0)
        X = rng.uniform(size=(30, 57))
        y = rng.integers(0, 2, 30)
        y[:2] = [0, 1]
        header = ",".join(f"f{i}" for i in range(57)) + ",spam"
        rows = [",".join(f"{v:.17g}" for v in X[i]) + f",{y[i]}" for i in range(30)]
        p = self._write(tmp_path / "spam.csv", header + "\n" + "\n".join(rows) + "\n")
        sel = [0, 2, 5, 8, 15, 20, 23, 40, 51, 52, 56]
        ld = load_csv(p, normalization="none", features=sel)
        assert ld.data.inputs.shape == (30, 11)
        np.testing.assert_array_equal(ld.data.inputs, X[:, sel])

    def test_standardize(self, tmp_path):
        p = self._write(tmp_path / "a.csv", "a,b,y\n1,10,0\n2,20,1\n3,30,1\n")
        ld = load_csv(p)
        np.testing.assert_allclose(ld.data.inputs.mean(axis=0), 0.0, atol=1e-15)
        np.testing.assert_allclose(ld.standardizer.mean, [2, 20])

    def test_errors(self, tmp_path):
        p = self._write(tmp_path / "a.csv", "a,b,y\n1,2,0\n1,oops,1\n")
        with pytest.raises(ParseError) as e:
            load_csv(p)
        assert e.value.row == 3 and e.value.col == 2
        with pytest.raises(LabelError):
            load_csv(p, label_column="label")
        p = self._write(tmp_path / "b.csv", "a,y\n1,0\n2,0\n")
        with pytest.raises(LabelError):
            load_csv(p)
        p = self._write(tmp_path / "c.csv", "a,y\n1,0\n2\n")
        with pytest.raises(ParseError):
            load_csv(p)


class TestIdx:
    def test_filter_counts_match_histogram(self, tmp_path):
        imgs, labels = synthetic_glyphs(40, digits=(3, 8), seed=1)
        extra = np.zeros((10, 28, 28), np.uint8)
        imgs = np.concatenate([imgs, extra])
        labels = np.concatenate([labels, np.full(10, 5, np.uint8)])
        ip, lp = tmp_path / "img.idx", tmp_path / "lab.idx"
        write_idx(ip, imgs)
        write_idx(lp, labels)
        ld = load_idx_images(ip, lp, classes=[3, 8])
        assert np.sum(ld.data.labels == 1) == np.sum(labels == 3)
        assert np.sum(ld.data.labels == 2) == np.sum(labels == 8)
        assert ld.data.inputs.shape[1] == 784 and ld.data.inputs.max() <= 1.0
        ld = load_idx_images(ip, lp, classes=[3, 5], downsample=True)
        assert ld.data.inputs.shape == (50, 196)
        assert np.all(ld.data.inputs[ld.data.labels == 2] == 0.0)
        with pytest.raises(EmptyFilter):
            load_idx_images(ip, lp, classes=[7])

    def test_gzip_and_round_trip(self, tmp_path):
        a = np.arange(24, dtype=np.int32).reshape(2, 3, 4)
        p = tmp_path / "a.idx"
        write_idx(p, a)
        gz = tmp_path / "a.idx.gz"
        gz.write_bytes(gzip.compress(p.read_bytes()))
        np.testing.assert_array_equal(read_idx(gz), a)

    def test_bad_files(self, tmp_path):
        p = tmp_path / "bad"
        p.write_bytes(b"\x01\x02\x08\x01")
        with pytest.raises(FormatError):
            read_idx(p)
        write_idx(p, np.zeros(4, np.uint8))
        p.write_bytes(p.read_bytes()[:-1])
        with pytest.raises(FormatError):
            read_idx(p)

    def test_downsample_constant(self):
        img = np.full((1, 28, 28), 0.7)
        out = downsample2x(img)
        assert out.shape == (1, 14, 14)
        np.testing.assert_allclose(out, 0.7)


class TestSelectFeatures:
    def test_explicit(self):
        assert select_features(57, "explicit", indices=[2, 8]) == [2, 8]
        with pytest.raises(KOutOfRange):
            select_features(5, "explicit", indices=[5])

    def test_lengthscale(self):
        ls = np.random.default_rng(0).uniform(0.1, 5, 10)
        th = KernelParams(1.0, ls)
        assert select_features(th, k=3) == sorted(np.argsort(ls)[:3].tolist())
        assert select_features(th, k=10) == list(range(10))
        with pytest.raises(KOutOfRange):
            select_features(th, k=11)

    def test_ties_by_index(self):
        th = KernelParams(1.0, np.array([1.0, 0.5, 0.5, 0.5]))
        assert select_features(th, k=2) == [1, 2]
