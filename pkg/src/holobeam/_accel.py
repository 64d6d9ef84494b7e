"""Optional numba acceleration with a pure-numpy fallback.

Every kernel in this package is written in nopython-compatible numpy, so the
same source runs either JIT-compiled or as plain numpy. Backend selection:

1. ``HOLOBEAM_NUMBA=0`` (also ``false``/``off``/``no``) forces the numpy path.
2. If numba is not importable the numpy path is used automatically.

``benchmarks/bench_kernels.py`` compares the two paths.
"""

import logging
import os

logger = logging.getLogger("holobeam.accel")

try:
    import numba as _numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None
    _HAVE_NUMBA = False


def _flag_enabled() -> bool:
    val = os.environ.get("HOLOBEAM_NUMBA", "1").strip().lower()
    return val not in ("0", "false", "off", "no")


NUMBA_ENABLED = _HAVE_NUMBA and _flag_enabled()

if not _HAVE_NUMBA:  # pragma: no cover
    logger.warning("numba not importable; falling back to pure numpy kernels")


if NUMBA_ENABLED:

    def njit(func=None, **kwargs):
        kwargs.setdefault("cache", True)
        if func is None:
            return _numba.njit(**kwargs)
        return _numba.njit(**kwargs)(func)

else:

    def njit(func=None, **kwargs):
        """No-op decorator: the decorated function runs as plain numpy."""
        if func is None:
            return lambda f: f
        return func


def backend() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
