"""Optional numba acceleration.

Hot kernels are written in a loop/row-operation style that numba compiles
and that plain numpy also executes correctly.  Set ``GPCERT_DISABLE_NUMBA=1``
to run every kernel through the pure-numpy path (useful for debugging and
for the benchmark in ``benchmarks/``).
"""

import os

DISABLED = os.environ.get("GPCERT_DISABLE_NUMBA", "0").strip().lower() in ("1", "true", "yes")

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

HAS_NUMBA = _numba is not None and not DISABLED


def njit(*args, **kwargs):
    """``numba.njit`` when available and enabled, otherwise the identity decorator."""
    if HAS_NUMBA:
        kwargs.setdefault("cache", True)
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn
