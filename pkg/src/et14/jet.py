"""Truncated Taylor jets for exact first and second derivatives.

A :class:`Jet` carries a value, its gradient and (optionally) its Hessian
with respect to a fixed set of seed variables.  Arithmetic propagates all
three exactly, so derivatives are limited only by floating-point roundoff.

Jets work inside numpy ``object`` arrays, which lets the tensor formulas in
:mod:`et14.invariants` run unchanged on floats or on jets.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np


class Jet:
    """Value + gradient (+ Hessian) of a scalar with respect to ``n`` seeds."""

    __slots__ = ("val", "grad", "hess")
    __array_priority__ = 100

    def __init__(self, val: float, grad: np.ndarray, hess: np.ndarray | None = None):
        self.val = float(val)
        self.grad = grad
        self.hess = hess

    @property
    def order(self) -> int:
        return 1 if self.hess is None else 2

    @property
    def n(self) -> int:
        return self.grad.shape[0]

    @classmethod
    def seed(cls, values: Sequence[float], order: int = 1) -> list["Jet"]:
        """Independent variables: jet ``i`` has unit gradient along axis ``i``."""
        n = len(values)
        eye = np.eye(n)
        out = []
        for i, v in enumerate(values):
            hess = np.zeros((n, n)) if order >= 2 else None
            out.append(cls(v, eye[i].copy(), hess))
        return out

    @classmethod
    def constant(cls, val: float, n: int, order: int = 1) -> "Jet":
        return cls(val, np.zeros(n), np.zeros((n, n)) if order >= 2 else None)

    # -- arithmetic -----------------------------------------------------

    def __neg__(self) -> "Jet":
        return Jet(-self.val, -self.grad, None if self.hess is None else -self.hess)

    def __pos__(self) -> "Jet":
        return self

    def __add__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        if isinstance(other, Jet):
            hess = None
            if self.hess is not None and other.hess is not None:
                hess = self.hess + other.hess
            return Jet(self.val + other.val, self.grad + other.grad, hess)
        return Jet(self.val + other, self.grad, self.hess)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        if isinstance(other, Jet):
            hess = None
            if self.hess is not None and other.hess is not None:
                hess = self.hess - other.hess
            return Jet(self.val - other.val, self.grad - other.grad, hess)
        return Jet(self.val - other, self.grad, self.hess)

    def __rsub__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        return Jet(other - self.val, -self.grad, None if self.hess is None else -self.hess)

    def __mul__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        if isinstance(other, Jet):
            a, b = self, other
            hess = None
            if a.hess is not None and b.hess is not None:
                outer = np.outer(a.grad, b.grad)
                hess = a.hess * b.val + b.hess * a.val + outer + outer.T
            return Jet(a.val * b.val, a.grad * b.val + b.grad * a.val, hess)
        return Jet(self.val * other, self.grad * other,
                   None if self.hess is None else self.hess * other)

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet":
        v = self.val
        if v == 0.0:
            raise ZeroDivisionError("jet division by a zero value")
        inv = 1.0 / v
        grad = -self.grad * inv * inv
        hess = None
        if self.hess is not None:
            hess = -self.hess * inv * inv + 2.0 * inv ** 3 * np.outer(self.grad, self.grad)
        return Jet(inv, grad, hess)

    def __truediv__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self * (1.0 / other)

    def __rtruediv__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        return self.reciprocal() * other

    def __pow__(self, k: int) -> "Jet":
        if not isinstance(k, (int, np.integer)) or k < 0:
            raise ValueError("jets support non-negative integer powers only")
        k = int(k)
        if k == 0:
            return Jet.constant(1.0, self.n, self.order)
        if k == 1:
            return self
        v = self.val
        d1 = k * v ** (k - 1)
        hess = None
        if self.hess is not None:
            d2 = k * (k - 1) * v ** (k - 2)
            hess = d1 * self.hess + d2 * np.outer(self.grad, self.grad)
        return Jet(v ** k, d1 * self.grad, hess)

    def __repr__(self) -> str:
        return f"Jet({self.val!r}, order={self.order}, n={self.n})"

    # -- composition ----------------------------------------------------

    @staticmethod
    def compose(val: float, grad: np.ndarray, hess: np.ndarray | None,
                args: Sequence["Jet"]) -> "Jet":
        """Chain rule for ``f(args)`` given f's own value/gradient/Hessian."""
        G = np.array([a.grad for a in args])  # (m, n)
        out_grad = grad @ G
        out_hess = None
        if args[0].hess is not None:
            out_hess = np.einsum("i,ijk->jk", grad, np.array([a.hess for a in args]))
            if hess is not None:
                out_hess = out_hess + G.T @ hess @ G
        return Jet(val, out_grad, out_hess)


def value(x) -> float:
    """Plain float value of a jet or number."""
    return x.val if isinstance(x, Jet) else float(x)


def gradient(x, n: int) -> np.ndarray:
    return x.grad if isinstance(x, Jet) else np.zeros(n)


def hessian(x, n: int) -> np.ndarray:
    if isinstance(x, Jet) and x.hess is not None:
        return x.hess
    return np.zeros((n, n))


def jet_order(args) -> int:
    """Highest jet order among ``args`` (0 when all are plain numbers)."""
    order = 0
    for a in args:
        if isinstance(a, Jet):
            order = max(order, a.order)
    return order
