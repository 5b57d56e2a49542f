"""JIT switch for the numeric kernels.

Kernels are written in the numba-compatible subset of Python. Setting
``MCQR_DISABLE_NUMBA=1`` (or running without numba installed) leaves them as
plain Python functions operating on numpy arrays.
"""

import os

_FLAG = os.environ.get("MCQR_DISABLE_NUMBA", "").strip().lower()
DISABLED = _FLAG in ("1", "true", "yes", "on")

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USING_NUMBA = numba is not None and not DISABLED


def njit(func):
    """Compile ``func`` with numba when acceleration is enabled."""
    if USING_NUMBA:
        return numba.njit(cache=True)(func)
    return func


def py_func(func):
    """Return the uncompiled Python function behind a kernel."""
    return getattr(func, "py_func", func)
