"""Backend selection for the hot numerical kernels.

Two implementations of every hot kernel exist: a numba @njit version and a
pure-numpy chunked version.  The active backend is chosen once at import
from the environment variable ``OSCLAB_BACKEND``:

    OSCLAB_BACKEND=numba    force numba (error if unavailable)
    OSCLAB_BACKEND=numpy    force the pure-numpy fallback
    unset                   numba when importable, else numpy

``benchmarks/bench_backends.py`` compares the two paths on the same inputs.
"""

import os

_env = os.environ.get("OSCLAB_BACKEND", "").strip().lower()

if _env == "numpy":
    HAVE_NUMBA = False
elif _env == "numba":
    import numba  # noqa: F401  (fail loudly if forced but missing)
    HAVE_NUMBA = True
elif _env == "":
    try:
        import numba  # noqa: F401
        HAVE_NUMBA = True
    except ImportError:
        HAVE_NUMBA = False
else:
    raise ValueError(f"OSCLAB_BACKEND must be 'numba' or 'numpy', got {_env!r}")


def backend_name():
    return "numba" if HAVE_NUMBA else "numpy"
