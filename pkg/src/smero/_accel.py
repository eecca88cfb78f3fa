"""Optional numba acceleration.

Set ``SMERO_DISABLE_NUMBA=1`` to force the pure-numpy kernels even when numba
is importable.
"""
import os


def _noop_jit(*args, **kwargs):
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrap(f):
        return f

    return wrap


def _have_numba():
    if os.environ.get("SMERO_DISABLE_NUMBA", "").strip() not in ("", "0"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


HAVE_NUMBA = _have_numba()

if HAVE_NUMBA:
    from numba import njit, prange
else:
    njit = _noop_jit
    prange = range
