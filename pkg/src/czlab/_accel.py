"""Numba availability and the switch between compiled and pure-numpy kernels.

Set ``CZLAB_NUMBA=0`` in the environment before import to force the numpy
path (useful for debugging and for comparing the two in benchmarks).
"""
import os

# avoid probing an incompatible TBB install on every first parallel call
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

try:
    import numba  # noqa: F401
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("CZLAB_NUMBA", "1").strip().lower() not in (
    "0", "false", "no", "off")


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity decorator otherwise."""
    if HAVE_NUMBA:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


if HAVE_NUMBA:
    prange = numba.prange
else:  # pragma: no cover
    prange = range
