"""Axis-aligned input boxes."""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import qmc

from .errors import DegenerateRegion, DimensionMismatch


def _ro(a):
    a = np.array(a, dtype=float).ravel()
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class InputBox:
    """Hyper-rectangle ``[lower, upper]``; zero-width axes are pinned coordinates."""

    lower: np.ndarray
    upper: np.ndarray
    anchor: Optional[np.ndarray] = None
    radius: Optional[float] = None

    def __post_init__(self):
        lo, hi = _ro(self.lower), _ro(self.upper)
        if lo.shape != hi.shape:
            raise DimensionMismatch("lower and upper corners differ in length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("box corners must be finite")
        if np.any(lo > hi):
            raise ValueError("box has lower > upper on some axis")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if self.anchor is not None:
            a = _ro(self.anchor)
            if a.shape != lo.shape or not self.contains(a):
                raise ValueError("anchor must lie inside the box")
            object.__setattr__(self, "anchor", a)

    @classmethod
    def from_ball(cls, x, gamma, dims=None, domain=None):
        """L-infinity ball of radius ``gamma`` around ``x``.

        Only the axes in ``dims`` (default: all) vary; the rest are pinned to
        ``x``.  ``domain`` is an optional ``(low, high)`` pair of scalars or
        vectors the box is intersected with.
        """
        x = np.asarray(x, dtype=float).ravel()
        if gamma < 0:
            raise ValueError("radius must be non-negative")
        mask = np.zeros(x.size, dtype=bool)
        if dims is None:
            mask[:] = True
        else:
            mask[np.asarray(dims, dtype=int)] = True
        lo = np.where(mask, x - gamma, x)
        hi = np.where(mask, x + gamma, x)
        if domain is not None:
            lo = np.maximum(lo, np.broadcast_to(np.asarray(domain[0], dtype=float), x.shape))
            hi = np.minimum(hi, np.broadcast_to(np.asarray(domain[1], dtype=float), x.shape))
            lo = np.minimum(lo, x)
            hi = np.maximum(hi, x)
        return cls(lo, hi, x, float(gamma))

    @classmethod
    def point(cls, x):
        return cls(x, x, x, 0.0)

    @property
    def dim(self):
        return self.lower.size

    @property
    def widths(self):
        return self.upper - self.lower

    @property
    def midpoint(self):
        return 0.5 * (self.lower + self.upper)

    @property
    def varying(self):
        """Indices of axes with positive width."""
        return np.flatnonzero(self.upper > self.lower)

    @property
    def is_degenerate(self):
        return self.varying.size == 0

    def volume(self):
        v = self.varying
        return float(np.prod(self.widths[v])) if v.size else 0.0

    def contains(self, x, tol=0.0):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def contains_box(self, other, tol=0.0):
        return bool(np.all(other.lower >= self.lower - tol) and np.all(other.upper <= self.upper + tol))

    def clip(self, x):
        return np.clip(x, self.lower, self.upper)

    def embed(self, xv):
        """Full point from values on the varying axes (others at their pinned value)."""
        x = self.lower.copy()
        v = self.varying
        x[v] = np.clip(xv, self.lower[v], self.upper[v])
        return x

    def split(self, axis):
        if self.upper[axis] <= self.lower[axis]:
            raise DegenerateRegion(f"axis {axis} has zero width")
        m = 0.5 * (self.lower[axis] + self.upper[axis])
        hi1 = self.upper.copy()
        hi1[axis] = m
        lo2 = self.lower.copy()
        lo2[axis] = m
        return InputBox(self.lower, hi1), InputBox(lo2, self.upper)

    def grid(self, n):
        """Tensor grid with ``n`` points per varying axis (rows are full points)."""
        v = self.varying
        if v.size == 0:
            return self.lower[None, :].copy()
        axes = [np.linspace(self.lower[j], self.upper[j], n) for j in v]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.tile(self.lower, (mesh[0].size, 1))
        for k, j in enumerate(v):
            pts[:, j] = mesh[k].ravel()
        return pts

    def sample(self, n, seed=0):
        """``n`` scrambled Sobol points inside the box."""
        v = self.varying
        pts = np.tile(self.lower, (n, 1))
        if v.size:
            m = max(0, int(np.ceil(np.log2(max(n, 1)))))
            u = qmc.Sobol(d=v.size, scramble=True, seed=seed).random_base2(m)[:n]
            pts[:, v] = self.lower[v] + u * self.widths[v]
        return pts

    def corners(self):
        v = self.varying
        out = []
        for bits in range(1 << v.size):
            x = self.lower.copy()
            for k, j in enumerate(v):
                if bits >> k & 1:
                    x[j] = self.upper[j]
            out.append(x)
        return np.array(out)

    def to_dict(self):
        d = {"lower": self.lower.tolist(), "upper": self.upper.tolist()}
        if self.anchor is not None:
            d["anchor"] = self.anchor.tolist()
            d["radius"] = self.radius
        return d

    def __repr__(self):
        return f"InputBox(lower={self.lower.tolist()}, upper={self.upper.tolist()})"
