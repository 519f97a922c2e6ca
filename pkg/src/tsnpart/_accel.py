"""Backend selection for the numeric kernels.

Set ``TSNPART_NUMBA=0`` before import to force the pure-numpy paths.
"""

import os


def _noop_jit(*args, **kwargs):
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrap(f):
        return f

    return wrap


def _want_numba():
    flag = os.environ.get("TSNPART_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "no", "off")


try:
    import numba as _numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _want_numba()

if HAVE_NUMBA:
    njit = _numba.njit
else:  # pragma: no cover
    njit = _noop_jit
