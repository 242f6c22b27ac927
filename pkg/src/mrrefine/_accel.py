"""Numba switch.

Set ``MRREFINE_NUMBA=0`` to force the pure-numpy kernels (useful for
debugging and for platforms without an LLVM toolchain).
"""

import os

try:
    from numba import njit as _njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _njit = None
    NUMBA_AVAILABLE = False

USE_NUMBA = NUMBA_AVAILABLE and os.environ.get("MRREFINE_NUMBA", "1").strip().lower() not in (
    "0",
    "false",
    "off",
    "no",
)


def njit(*args, **kwargs):
    """``numba.njit`` with caching on, or the identity when numba is unavailable."""
    kwargs.setdefault("cache", True)
    if _njit is None:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    return _njit(*args, **kwargs)
