"""Zeros of integer-order Bessel functions of the first kind.

Zeros are bracketed by a sign scan, narrowed by bisection and polished with
an Illinois (regula falsi) step.  Values of ``J_n`` come from
:func:`scipy.special.jv`.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import jv


class BesselZeroError(RuntimeError):
    def __init__(self, n: int, m: int, msg: str):
        super().__init__(f"Bessel zero j_({n},{m}): {msg}")
        self.n = n
        self.m = m


def mcmahon(n: int, m: int) -> float:
    """Large-``m`` asymptotic expansion of ``j_{n,m}`` (three terms)."""
    mu = 4.0 * n * n
    beta = (m + 0.5 * n - 0.25) * math.pi
    b8 = 8.0 * beta
    return (
        beta
        - (mu - 1.0) / b8
        - 4.0 * (mu - 1.0) * (7.0 * mu - 31.0) / (3.0 * b8**3)
    )


def _refine(n: int, a: float, b: float, fa: float, fb: float, tol: float, maxiter: int = 200) -> float:
    # bisection until the bracket is small, then Illinois steps
    for _ in range(maxiter):
        if b - a < 1e-3:
            break
        c = 0.5 * (a + b)
        fc = float(jv(n, c))
        if fc == 0.0:
            return c
        if (fa < 0) == (fc < 0):
            a, fa = c, fc
        else:
            b, fb = c, fc
    side = 0
    for _ in range(maxiter):
        c = (a * fb - b * fa) / (fb - fa)
        fc = float(jv(n, c))
        if fc == 0.0 or b - a < tol * max(1.0, abs(c)):
            return c
        if (fa < 0) == (fc < 0):
            a, fa = c, fc
            if side == -1:
                fb *= 0.5
            side = -1
        else:
            b, fb = c, fc
            if side == 1:
                fa *= 0.5
            side = 1
        if abs(b - a) < tol * max(1.0, abs(c)):
            return 0.5 * (a + b)
    raise BesselZeroError(n, -1, "refinement did not converge")


def bessel_zeros(n: int, count: int, tol: float = 1e-15) -> np.ndarray:
    """First ``count`` positive zeros of ``J_n`` (``n >= 0``)."""
    if n < 0 or count < 1:
        raise ValueError("need n >= 0 and count >= 1")
    zeros = []
    step = 0.1
    x = max(n, 1e-3) if n > 0 else 1e-3
    fx = float(jv(n, x))
    limit = n + (count + 2) * math.pi + 10.0
    while len(zeros) < count:
        if x > limit:
            raise BesselZeroError(n, len(zeros) + 1, "no sign change found in scan range")
        y = x + step
        fy = float(jv(n, y))
        if fx == 0.0:
            zeros.append(x)
        elif (fx < 0) != (fy < 0):
            try:
                zeros.append(_refine(n, x, y, fx, fy, tol))
            except BesselZeroError as exc:
                raise BesselZeroError(n, len(zeros) + 1, str(exc)) from None
        x, fx = y, fy
    out = np.array(zeros[:count])
    for m, z in enumerate(out, start=1):
        if m >= n + 3 and abs(z - mcmahon(n, m)) > 1e-2:
            raise BesselZeroError(n, m, f"value {z} disagrees with asymptotic estimate {mcmahon(n, m)}")
    return out
