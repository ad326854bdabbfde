"""Pure numpy versions of the pointwise transport kernels.

Array conventions (batch axis ``B`` first, points ``P`` last)::

    vec   (B, 2, P)       velocity samples
    grad  (B, 2, 2, P)    grad[b, l, j] = d_j f^l
    xi    (2, P), gxi (2, 2, P)   a single driving field and its gradient
"""
import numpy as np


def advect_grid(phi, grad):
    """``(phi . grad) f`` for matching batches."""
    return phi[:, 0, None, :] * grad[:, :, 0, :] + phi[:, 1, None, :] * grad[:, :, 1, :]


def stretch_grid(f, gxi):
    """``sum_j f^j grad xi^j`` with ``xi`` shared across the batch."""
    return f[:, 0, None, :] * gxi[None, 0, :, :] + f[:, 1, None, :] * gxi[None, 1, :, :]


def salt_grid(xi, gxi, f, grad):
    out = xi[None, 0, None, :] * grad[:, :, 0, :] + xi[None, 1, None, :] * grad[:, :, 1, :]
    out += f[:, 0, None, :] * gxi[None, 0, :, :]
    out += f[:, 1, None, :] * gxi[None, 1, :, :]
    return out
