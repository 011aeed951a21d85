"""Kernel backend selection.

Hot loops ship in two flavours: a numba ``@njit`` kernel and a pure-numpy
equivalent. The numba path is used when numba imports and the environment
variable ``TEXFUSE_BACKEND`` is not set to ``numpy``.
"""
import os
import warnings

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAVE_NUMBA = False

_requested = os.environ.get("TEXFUSE_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    warnings.warn(f"unknown TEXFUSE_BACKEND={_requested!r}, using numba")
    _requested = "numba"

USE_NUMBA = HAVE_NUMBA and _requested == "numba"

JIT_OPTIONS = {"nogil": True, "cache": True}


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise the identity decorator."""
    if HAVE_NUMBA:
        opts = {**JIT_OPTIONS, **kwargs}
        return numba.njit(*args, **opts)
    if len(args) == 1 and callable(args[0]):
        return args[0]
    return lambda func: func


def backend_name():
    return "numba" if USE_NUMBA else "numpy"


def thread_limit():
    """Worker cap from ``TEXFUSE_THREADS`` (defaults to the CPU count)."""
    raw = os.environ.get("TEXFUSE_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            warnings.warn(f"ignoring non-integer TEXFUSE_THREADS={raw!r}")
    return os.cpu_count() or 1


if HAVE_NUMBA and os.environ.get("TEXFUSE_THREADS"):
    try:
        numba.set_num_threads(min(thread_limit(), numba.config.NUMBA_NUM_THREADS))
    except (ValueError, AttributeError):  # pragma: no cover
        pass
