"""numba switch.

Kernels are written in the numba subset of Python. When numba is missing or
``HAMRGG_DISABLE_NUMBA=1`` is set, ``njit`` becomes the identity and the same
functions run as plain Python; modules with a vectorised numpy alternative
check ``ENABLED`` and dispatch to it instead.
"""
import os

_flag = os.environ.get("HAMRGG_DISABLE_NUMBA", "").strip().lower()
_disabled = _flag in ("1", "true", "yes", "on")

try:
    if _disabled:
        raise ImportError
    import numba as _numba
except ImportError:
    _numba = None

ENABLED = _numba is not None

_OPTS = {"cache": True, "nogil": True}


def njit(fn=None, **kw):
    if not ENABLED:
        if fn is None:
            return lambda f: f
        return fn
    opts = dict(_OPTS)
    opts.update(kw)
    if fn is None:
        return _numba.njit(**opts)
    return _numba.njit(**opts)(fn)


def backend() -> str:
    return "numba" if ENABLED else "python"
