"""Dataset generation, loading and feature selection."""

import csv
import gzip
import struct
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import EmptyFilter, FormatError, KOutOfRange, LabelError, ParseError
from .gp import Dataset, GPCPosterior


@dataclass
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X):
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        return cls(mean, np.where(scale > 0, scale, 1.0))

    def apply(self, X):
        return (X - self.mean) / self.scale

    def to_dict(self):
        return {"mean": [float(v) for v in self.mean], "scale": [float(v) for v in self.scale]}


@dataclass
class LoadedData:
    """A dataset plus the preprocessing applied to it."""

    data: Dataset
    standardizer: Optional[Standardizer] = None
    class_values: list = field(default_factory=list)


def generate_synthetic2d(seed=0, n=1200):
    """Two shifted standard-normal clouds in 2-D, half per class, then standardised.

    Class 1 is shifted by 5 along the first axis, class 2 by 5 along the second.
    """
    if n < 2 or n % 2:
        raise ValueError("n must be a positive even number")
    rng = np.random.default_rng(seed)
    h = n // 2
    X = rng.standard_normal((n, 2))
    X[:h, 0] += 5.0
    X[h:, 1] += 5.0
    y = np.repeat([1, 2], h)
    perm = rng.permutation(n)
    X, y = X[perm], y[perm]
    X = Standardizer.fit(X).apply(X)
    return Dataset(X, y, 2, ("x1", "x2"))


def train_test_split(data, n_train, n_test, seed=0):
    if n_train + n_test > len(data):
        raise ValueError(f"split {n_train}+{n_test} exceeds {len(data)} points")
    perm = np.random.default_rng(seed).permutation(len(data))
    return data.subset(perm[:n_train]), data.subset(perm[n_train:n_train + n_test])


def _map_labels(raw):
    values = sorted(set(raw))
    if len(values) < 2:
        raise LabelError("need at least two distinct labels")
    idx = {v: i + 1 for i, v in enumerate(values)}
    return np.array([idx[v] for v in raw]), values


def load_csv(path, label_column=-1, normalization="standardize", features=None):
    """Read a comma-separated file with a header row.

    ``label_column`` is a column name or index.  Labels are mapped to
    ``1..C`` in sorted order of their values.
    """
    if normalization not in ("standardize", "none"):
        raise ValueError("normalization must be 'standardize' or 'none'")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError("empty file", 1, 0)
    header, body = rows[0], rows[1:]
    if isinstance(label_column, str):
        if label_column not in header:
            raise LabelError(f"no label column named {label_column!r}")
        lab = header.index(label_column)
    else:
        lab = int(label_column)
        if not -len(header) <= lab < len(header):
            raise LabelError(f"label column {label_column} out of range")
        lab %= len(header)
    if not body:
        raise ParseError("no data rows", 2, 0)
    feat_cols = [j for j in range(len(header)) if j != lab]
    X = np.empty((len(body), len(feat_cols)))
    raw = []
    for i, row in enumerate(body):
        line = i + 2
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, found {len(row)}", line, len(row))
        for k, j in enumerate(feat_cols):
            try:
                X[i, k] = float(row[j])
            except ValueError:
                raise ParseError(f"not a number: {row[j]!r}", line, j + 1) from None
        raw.append(row[lab].strip())
    try:
        raw = [float(v) for v in raw]
    except ValueError:
        pass
    y, values = _map_labels(raw)
    names = tuple(header[j] for j in feat_cols)
    if features is not None:
        features = list(features)
        X = X[:, features]
        names = tuple(names[j] for j in features)
    std = None
    if normalization == "standardize":
        std = Standardizer.fit(X)
        X = std.apply(X)
    return LoadedData(Dataset(X, y, len(values), names), std, values)


_IDX_TYPES = {0x08: ">u1", 0x09: ">i1", 0x0B: ">i2", 0x0C: ">i4", 0x0D: ">f4", 0x0E: ">f8"}


def _open(path):
    with open(path, "rb") as fh:
        head = fh.read(2)
    return gzip.open(path, "rb") if head == b"\x1f\x8b" else open(path, "rb")


def read_idx(path):
    """Array from an idx file (optionally gzip-compressed)."""
    with _open(path) as fh:
        buf = fh.read()
    if len(buf) < 4 or buf[0] != 0 or buf[1] != 0:
        raise FormatError(f"{path}: bad magic number")
    code, ndim = buf[2], buf[3]
    if code not in _IDX_TYPES:
        raise FormatError(f"{path}: unknown element type 0x{code:02x}")
    if len(buf) < 4 + 4 * ndim:
        raise FormatError(f"{path}: truncated header")
    shape = struct.unpack(f">{ndim}I", buf[4:4 + 4 * ndim])
    dt = np.dtype(_IDX_TYPES[code])
    need = int(np.prod(shape)) * dt.itemsize
    body = buf[4 + 4 * ndim:]
    if len(body) != need:
        raise FormatError(f"{path}: expected {need} data bytes, found {len(body)}")
    return np.frombuffer(body, dtype=dt).reshape(shape)


def write_idx(path, arr):
    arr = np.asarray(arr)
    codes = {v: k for k, v in _IDX_TYPES.items()}
    dt = arr.dtype.newbyteorder(">") if arr.dtype.itemsize > 1 else arr.dtype
    key = dt.str.replace("|", ">")
    if key not in codes:
        raise FormatError(f"dtype {arr.dtype} has no idx code")
    with open(path, "wb") as fh:
        fh.write(bytes([0, 0, codes[key], arr.ndim]))
        fh.write(struct.pack(f">{arr.ndim}I", *arr.shape))
        fh.write(arr.astype(dt).tobytes())


def downsample2x(images):
    """2x2 mean pooling over the last two axes."""
    n, h, w = images.shape
    if h % 2 or w % 2:
        raise FormatError("image sides must be even to downsample")
    return images.reshape(n, h // 2, 2, w // 2, 2).mean(axis=(2, 4))


def load_idx_images(images_path, labels_path, classes=None, downsample=False, limit=None):
    """Images scaled to [0, 1] and flattened; ``classes`` filters and relabels densely."""
    imgs = read_idx(images_path)
    labels = read_idx(labels_path).astype(int)
    if imgs.ndim != 3 or labels.ndim != 1 or imgs.shape[0] != labels.shape[0]:
        raise FormatError("need an (n, h, w) image file and a matching (n,) label file")
    if classes is None:
        classes = sorted(set(labels.tolist()))
    classes = [int(c) for c in classes]
    keep = np.isin(labels, classes)
    if not np.any(keep):
        raise EmptyFilter(f"no images with labels {classes}")
    imgs, labels = imgs[keep], labels[keep]
    if limit is not None:
        imgs, labels = imgs[:limit], labels[:limit]
    X = imgs.astype(float) / 255.0
    if downsample:
        X = downsample2x(X)
    relabel = {c: i + 1 for i, c in enumerate(classes)}
    y = np.array([relabel[v] for v in labels])
    return LoadedData(Dataset(X.reshape(X.shape[0], -1), y, len(classes)), None, classes)


def select_features(source, mode="lengthscale", k=None, indices: Optional[Sequence[int]] = None):
    """Feature indices: an explicit list, or the ``k`` shortest lengthscales (ties by index).

    ``source`` is a posterior (or kernel parameters) for lengthscale mode and
    a dataset or dimension count for explicit mode.
    """
    if isinstance(source, GPCPosterior):
        d, ls = source.dim, source.kernel.lengthscales
    elif isinstance(source, Dataset):
        d, ls = source.dim, None
    elif hasattr(source, "lengthscales"):
        d, ls = source.dim, source.lengthscales
    else:
        d, ls = int(source), None
    if mode == "explicit":
        idx = [int(i) for i in indices]
        if any(not 0 <= i < d for i in idx):
            raise KOutOfRange(f"feature index outside 0..{d - 1}")
        return idx
    if mode != "lengthscale":
        raise ValueError("mode must be 'explicit' or 'lengthscale'")
    if ls is None:
        raise ValueError("lengthscale mode needs a trained model")
    if k is None or not 1 <= k <= d:
        raise KOutOfRange(f"k must lie in 1..{d}")
    return sorted(np.argsort(ls, kind="stable")[:k].tolist())


def synthetic_glyphs(n_per_class=300, digits=(3, 8), seed=0, size=28):
    """Noisy stroke images of two digits, ``uint8`` in idx layout.

    Stand-in for real digit files in tests and desk benchmarks.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size] / (size - 1.0)

    def ring(cx, cy, r, th, lo=0.0, hi=2 * np.pi):
        ang = np.mod(np.arctan2(yy - cy, xx - cx), 2 * np.pi)
        on = (ang >= lo) & (ang <= hi) if hi - lo < 2 * np.pi else np.ones_like(ang, bool)
        dist = np.abs(np.hypot(xx - cx, yy - cy) - r)
        return np.exp(-(dist / th) ** 2) * on

    def three(j, th):
        return np.maximum(ring(0.5 + j[0], 0.32 + j[1], 0.17, th, 1.2 * np.pi, 2.6 * np.pi - 0.1),
                          ring(0.5 + j[0], 0.68 + j[1], 0.17, th, 1.0 * np.pi + 0.5, 2 * np.pi + 0.9))

    def eight(j, th):
        return np.maximum(ring(0.5 + j[0], 0.32 + j[1], 0.16, th), ring(0.5 + j[0], 0.68 + j[1], 0.17, th))

    shapes = {3: three, 8: eight}
    imgs, labels = [], []
    for dgt in digits:
        make = shapes.get(dgt, eight)
        for _ in range(n_per_class):
            jit = rng.normal(0, 0.05, size=2)
            th = rng.uniform(0.035, 0.07)
            img = rng.uniform(0.6, 1.0) * make(jit, th) + rng.normal(0, 0.2, size=(size, size))
            imgs.append(np.clip(img * 255, 0, 255).astype(np.uint8))
            labels.append(dgt)
    perm = rng.permutation(len(labels))
    return np.array(imgs)[perm], np.array(labels, dtype=np.uint8)[perm]
