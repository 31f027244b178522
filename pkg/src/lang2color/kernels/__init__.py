"""Backend dispatch for the hot numeric kernels.

The env var ``LANG2COLOR_BACKEND`` selects the implementation:

* ``auto`` (default) - per-kernel best: numpy's strided slab copy wins
  the im2col gather on a single core, numba wins the col2im scatter-add
  and the resize; falls back to pure numpy when numba is missing
* ``numba``          - all-numba, fail loudly if numba is missing
* ``numpy``          - force the pure-numpy fallback

Both backends expose identical signatures and results; run
``benchmarks/bench_kernels.py`` for the speed comparison behind the
``auto`` profile.
"""

import importlib
import os

from . import numpy_kernels

_requested = os.environ.get("LANG2COLOR_BACKEND", "auto").lower()

if _requested not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"LANG2COLOR_BACKEND must be auto, numba or numpy, got {_requested!r}"
    )


def _try_numba():
    try:
        return importlib.import_module(".numba_kernels", __name__)
    except ImportError:
        if _requested == "numba":
            raise
        return None


_numba = _try_numba() if _requested != "numpy" else None

if _numba is None:
    BACKEND = "numpy"
    im2col = numpy_kernels.im2col
    col2im = numpy_kernels.col2im
    bilinear_resize = numpy_kernels.bilinear_resize
elif _requested == "numba":
    BACKEND = "numba"
    im2col = _numba.im2col
    col2im = _numba.col2im
    bilinear_resize = _numba.bilinear_resize
else:
    BACKEND = "auto"
    im2col = numpy_kernels.im2col
    col2im = _numba.col2im
    bilinear_resize = _numba.bilinear_resize


def active_backend() -> str:
    """Name of the kernel backend selected at import time."""
    return BACKEND
