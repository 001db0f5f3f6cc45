"""Optional numba acceleration.

Set ``TLPS_DISABLE_NUMBA=1`` to force the pure-numpy code paths even when
numba is installed. Both paths stay importable so tests and benchmarks can
compare them in one process.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None

HAVE_NUMBA = numba is not None
NUMBA_DISABLED = os.environ.get("TLPS_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")
DEFAULT_BACKEND = "numba" if HAVE_NUMBA and not NUMBA_DISABLED else "numpy"


def njit(fn):
    if numba is None:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)
