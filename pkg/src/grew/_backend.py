"""Kernel backend selection.

Set ``GREW_NUMBA=0`` in the environment before import to force the
pure-numpy code paths. Numba is used by default when it imports cleanly.
"""
import os

_flag = os.environ.get("GREW_NUMBA", "1").strip().lower()

try:
    if _flag in ("0", "false", "no", "off"):
        raise ImportError("numba disabled by GREW_NUMBA")
    import numba

    HAS_NUMBA = True
except ImportError:
    numba = None
    HAS_NUMBA = False


def njit(*args, **kws):
    """``numba.njit(cache=True)`` when available, identity otherwise."""
    if not HAS_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn
    kws.setdefault("cache", True)
    return numba.njit(*args, **kws)


def backend_name():
    return "numba" if HAS_NUMBA else "numpy"
