"""Optional numba acceleration.

Hot loops (Bellman sweeps, simplex enumeration, coordinate descent) are
written as plain scalar loops and jitted when numba is importable.  Without
numba everything still runs, just slower; set RELAYLINE_NO_NUMBA=1 to force
the pure-Python path.
"""

from __future__ import annotations

import os

HAVE_NUMBA = False

if not os.environ.get("RELAYLINE_NO_NUMBA"):
    try:
        from numba import njit, prange  # noqa: F401

        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover
        pass

if not HAVE_NUMBA:  # pragma: no cover
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap

    def prange(*args):
        return range(*args)
