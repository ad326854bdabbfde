"""Backend selection for the pointwise transport kernels.

The compiled extension is used when it imports; ``SALTNS_BACKEND=python``
forces the numpy fallback.  Inputs are normalised to C-contiguous float64
so both backends see identical memory layouts.
"""
import logging
import os

import numpy as np

from . import _kernels_py

log = logging.getLogger(__name__)

_impl = _kernels_py
BACKEND = "python"
if os.environ.get("SALTNS_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as _compiled

        _impl = _compiled
        BACKEND = "compiled"
    except ImportError:  # extension not built
        log.debug("compiled kernels unavailable, using numpy fallback")


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def advect_grid(phi, grad):
    return _impl.advect_grid(_c(phi), _c(grad))


def stretch_grid(f, gxi):
    return _impl.stretch_grid(_c(f), _c(gxi))


def salt_grid(xi, gxi, f, grad):
    return _impl.salt_grid(_c(xi), _c(gxi), _c(f), _c(grad))


def implementation(name):
    """Return the kernel module for ``"python"`` or ``"compiled"`` (for tests and benchmarks)."""
    if name == "python":
        return _kernels_py
    from . import _kernels

    return _kernels
