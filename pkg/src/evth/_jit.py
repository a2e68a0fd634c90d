"""Numba switch.

Set ``EVTH_DISABLE_NUMBA=1`` to route every hot kernel through its pure-numpy
twin. The jitted versions are still importable (for benchmarks and the
cross-path tests); only the default dispatch changes.
"""

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None
    HAVE_NUMBA = False


def _flag(name):
    return os.environ.get(name, "").strip().lower() in ("1", "true", "yes", "on")


USE_NUMBA = HAVE_NUMBA and not _flag("EVTH_DISABLE_NUMBA")


def njit(*args, **kwargs):
    """``numba.njit`` with on-disk caching, or a no-op without numba."""
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)
    if args and callable(args[0]):
        return args[0]
    return lambda f: f


if HAVE_NUMBA:
    prange = numba.prange
else:  # pragma: no cover
    prange = range


def set_threads_from_env():
    """Honour ``EVTH_NUM_THREADS`` for the parallel kernels."""
    raw = os.environ.get("EVTH_NUM_THREADS")
    if raw and HAVE_NUMBA:
        numba.set_num_threads(max(1, min(int(raw), numba.config.NUMBA_NUM_THREADS)))


def pyfunc(f):
    """The interpreted body of a jitted function (itself if not jitted)."""
    return getattr(f, "py_func", f)
