"""Kernel backend selection.

The numba backend is used when numba imports and ``FRACDELAY_NUMBA`` is not
set to a false value (``0``, ``false``, ``no``, ``off``).  The choice is made
once, at import time.
"""

import os

_FALSE = {"0", "false", "no", "off"}


def numba_requested():
    return os.environ.get("FRACDELAY_NUMBA", "1").strip().lower() not in _FALSE


try:
    import numba  # noqa: F401
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

if HAVE_NUMBA and numba_requested():
    from . import _kernels_numba as kernels
    BACKEND = "numba"
else:
    from . import _kernels_numpy as kernels
    BACKEND = "numpy"

__all__ = ["BACKEND", "HAVE_NUMBA", "kernels", "numba_requested"]
