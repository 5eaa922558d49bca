"""JIT backend selection.

Hot numeric kernels throughout the package are written in nopython style
(explicit loops, scalar math) and decorated with :func:`kernel`.  By default
they are compiled with numba.  Setting the environment variable
``WRAOPT_NUMBA=0`` before import selects a pure-Python/NumPy fallback in
which the identical source runs uncompiled.  Both paths execute the same
arithmetic in the same order, so results are intended to be bit-identical
(see ``tests/test_backend_parity.py``); only speed differs.
"""

import os
import warnings

_flag = os.environ.get("WRAOPT_NUMBA", "1").strip().lower()
NUMBA_ENABLED = _flag not in ("0", "false", "off", "no")

if NUMBA_ENABLED:
    from numba import njit as _njit

    def kernel(func=None, **kwargs):
        kwargs.setdefault("cache", True)
        if func is not None:
            return _njit(**kwargs)(func)
        return _njit(**kwargs)

else:
    # The RNG kernels rely on wrapping uint64 arithmetic; NumPy wraps
    # correctly but warns on scalar overflow, so silence that one warning.
    warnings.filterwarnings(
        "ignore", message="overflow encountered", category=RuntimeWarning
    )

    def kernel(func=None, **kwargs):
        if func is not None:
            return func
        return lambda f: f
