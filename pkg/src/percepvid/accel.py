"""Runtime switch between numba-compiled kernels and their pure-numpy twins.

Every hot kernel in this package exists in two implementations with identical
semantics: a scalar-loop version compiled with ``numba.njit`` and a vectorized
numpy version.  Which one runs is decided *per call* so tests and benchmarks
can flip the switch without reimporting anything:

    PERCEPVID_DISABLE_NUMBA=1  -> always take the numpy path

If numba is not importable at all, the numpy path is used silently.
"""

import os

DISABLE_ENV = "PERCEPVID_DISABLE_NUMBA"

try:
    import numba  # noqa: F401

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - mirror environments without numba
    HAS_NUMBA = False


def numba_enabled() -> bool:
    """True when the compiled kernel path should be used for this call."""
    if not HAS_NUMBA:
        return False
    flag = os.environ.get(DISABLE_ENV, "").strip().lower()
    return flag in ("", "0", "false", "no")
