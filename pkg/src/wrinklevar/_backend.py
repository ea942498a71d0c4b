"""Optional numba acceleration.

Set ``WRINKLEVAR_DISABLE_NUMBA=1`` to force the pure-numpy kernels.
"""
import os

DISABLED = os.environ.get("WRINKLEVAR_DISABLE_NUMBA", "").strip().lower() in (
    "1", "true", "yes", "on",
)

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not DISABLED


def njit(*args, **kwargs):
    if not HAVE_NUMBA:  # pragma: no cover
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    kwargs.setdefault("error_model", "numpy")
    return numba.njit(*args, **kwargs)


def default_backend():
    return "numba" if USE_NUMBA else "numpy"
