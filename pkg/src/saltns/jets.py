"""Pointwise derivative jets of functions on the plane.

A :class:`Jet` stores, at a fixed set of sample points, every Cartesian
partial derivative ``d^(a+b) / dx^a dy^b`` of a (possibly vector valued)
function up to a total order.  Jets are closed under addition, products
(Leibniz rule), differentiation (which lowers the order by one) and
composition with univariate functions, which is all the disk geometry
needs to evaluate the transport and stretching operators exactly at
quadrature nodes.
"""
from __future__ import annotations

from math import comb, factorial
from typing import Callable, Dict, Iterator, Sequence, Tuple

import numpy as np

Index = Tuple[int, int]


def multi_indices(order: int) -> Iterator[Index]:
    for total in range(order + 1):
        for a in range(total, -1, -1):
            yield (a, total - a)


class Jet:
    """Derivatives of a field up to ``order`` at ``P`` points.

    ``data[(a, b)]`` has shape ``shape + (P,)`` where ``shape`` is ``()`` for
    scalar jets and ``(2,)`` for planar vector fields.
    """

    __slots__ = ("order", "data", "shape")

    def __init__(self, data: Dict[Index, np.ndarray], order: int):
        self.order = order
        self.data = data
        self.shape = data[(0, 0)].shape[:-1]

    # construction -----------------------------------------------------
    @classmethod
    def zeros(cls, shape, npts: int, order: int) -> "Jet":
        return cls({ab: np.zeros(tuple(shape) + (npts,)) for ab in multi_indices(order)}, order)

    @classmethod
    def constant(cls, value, npts: int, order: int) -> "Jet":
        value = np.asarray(value, dtype=float)
        jet = cls.zeros(value.shape, npts, order)
        jet.data[(0, 0)][...] = value[..., None]
        return jet

    @classmethod
    def stack(cls, comps: Sequence["Jet"]) -> "Jet":
        order = min(c.order for c in comps)
        return cls({ab: np.stack([c.data[ab] for c in comps]) for ab in multi_indices(order)}, order)

    # access -----------------------------------------------------------
    @property
    def value(self) -> np.ndarray:
        return self.data[(0, 0)]

    @property
    def npts(self) -> int:
        return self.value.shape[-1]

    def __getitem__(self, comp: int) -> "Jet":
        return Jet({ab: v[comp] for ab, v in self.data.items()}, self.order)

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise ValueError(f"cannot raise jet order {self.order} to {order}")
        return Jet({ab: self.data[ab] for ab in multi_indices(order)}, order)

    def gradient_values(self) -> np.ndarray:
        """First derivatives as ``shape + (2, P)`` with last-but-one axis the direction."""
        return np.stack([self.data[(1, 0)], self.data[(0, 1)]], axis=-2)

    # calculus ---------------------------------------------------------
    def d(self, direction: int) -> "Jet":
        if self.order < 1:
            raise ValueError("jet has no derivative information left")
        shift = (1, 0) if direction == 0 else (0, 1)
        return Jet(
            {(a, b): self.data[(a + shift[0], b + shift[1])] for (a, b) in multi_indices(self.order - 1)},
            self.order - 1,
        )

    def laplacian(self) -> "Jet":
        return self.d(0).d(0) + self.d(1).d(1)

    # algebra ----------------------------------------------------------
    def _match(self, other: "Jet") -> int:
        return min(self.order, other.order)

    def __add__(self, other: "Jet") -> "Jet":
        order = self._match(other)
        return Jet({ab: self.data[ab] + other.data[ab] for ab in multi_indices(order)}, order)

    def __sub__(self, other: "Jet") -> "Jet":
        order = self._match(other)
        return Jet({ab: self.data[ab] - other.data[ab] for ab in multi_indices(order)}, order)

    def __neg__(self) -> "Jet":
        return Jet({ab: -v for ab, v in self.data.items()}, self.order)

    def scale(self, c) -> "Jet":
        return Jet({ab: c * v for ab, v in self.data.items()}, self.order)

    def __mul__(self, other: "Jet") -> "Jet":
        """Pointwise product by the two-variable Leibniz rule.

        At least one operand must be scalar; a scalar times a vector jet
        broadcasts over components.
        """
        if not isinstance(other, Jet):
            return self.scale(other)
        order = self._match(other)
        out = {}
        for a, b in multi_indices(order):
            acc = 0.0
            for i in range(a + 1):
                for j in range(b + 1):
                    c = comb(a, i) * comb(b, j)
                    acc = acc + c * self.data[(i, j)] * other.data[(a - i, b - j)]
            out[(a, b)] = acc
        return Jet(out, order)

    __rmul__ = scale

    def compose(self, derivs: Callable[[np.ndarray, int], Sequence[np.ndarray]]) -> "Jet":
        """Jet of ``F(self)`` for scalar ``self`` and univariate ``F``.

        ``derivs(values, order)`` must return ``[F(v), F'(v), ..., F^(order)(v)]``.
        Uses the truncated Taylor expansion in the increment, which is exact
        for all derivatives up to the jet order.
        """
        u0 = self.value
        fd = derivs(u0, self.order)
        inc = Jet(dict(self.data), self.order)
        inc.data[(0, 0)] = np.zeros_like(u0)
        result = Jet.constant(0.0, self.npts, self.order)
        result.data[(0, 0)] = np.asarray(fd[0], dtype=float).copy()
        power = None
        for j in range(1, self.order + 1):
            power = inc if power is None else power * inc
            result = result + power.scale(fd[j] / factorial(j))
        return result


def dot(u: Jet, v: Jet) -> Jet:
    """Pointwise Euclidean product of two vector jets."""
    out = u[0] * v[0]
    for c in range(1, u.shape[0]):
        out = out + u[c] * v[c]
    return out


def curl(f: Jet) -> Jet:
    return f[1].d(0) - f[0].d(1)


def divergence(f: Jet) -> Jet:
    return f[0].d(0) + f[1].d(1)


def advect(phi: Jet, f: Jet) -> Jet:
    """``sum_j phi^j d_j f`` for vector or scalar ``f``."""
    if f.shape == ():
        return phi[0] * f.d(0) + phi[1] * f.d(1)
    return Jet.stack([advect(phi, f[c]) for c in range(f.shape[0])])


def stretch(g: Jet, f: Jet) -> Jet:
    """``sum_j f^j grad g^j``."""
    comps = []
    for l in range(2):
        comps.append(f[0] * g[0].d(l) + f[1] * g[1].d(l))
    return Jet.stack(comps)


def perp_gradient(psi: Jet) -> Jet:
    """``(-d_y psi, d_x psi)``."""
    return Jet.stack([-psi.d(1), psi.d(0)])
