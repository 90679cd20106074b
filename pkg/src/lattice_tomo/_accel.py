"""Numba switch.

Set ``LATTICE_TOMO_NUMBA=0`` to force the pure-numpy kernels. When numba is
missing the fallback is selected automatically.
"""

import os

_flag = os.environ.get("LATTICE_TOMO_NUMBA", "1").strip().lower()

try:
    from numba import njit as _numba_njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only without numba
    _numba_njit = None
    NUMBA_AVAILABLE = False

USE_NUMBA = NUMBA_AVAILABLE and _flag not in ("0", "false", "off", "no")


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if _numba_njit is not None:
        return _numba_njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f
