"""Numba backend selection.

The hot kernels in :mod:`sqzphase.kernels` are written once and compiled with
numba when available.  Setting ``SQZPHASE_NUMBA=0`` (or numba being absent)
selects the pure-numpy fallback: the same kernel source runs uncompiled, with
the per-grid work still vectorized through numpy.  ``sqzphase.bench`` compares
the two paths.
"""
import os

_DISABLED = os.environ.get("SQZPHASE_NUMBA", "1").lower() in ("0", "false", "off")

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via env flag instead
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _DISABLED


def njit(*args, **kwargs):
    """numba.njit when the compiled path is active, identity decorator otherwise."""
    if USE_NUMBA:
        return numba.njit(*args, **kwargs)
    if args and callable(args[0]):
        return args[0]

    def deco(func):
        return func

    return deco


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
