"""Minimal reverse-mode automatic differentiation over float64 numpy arrays.

Each op builds a Tensor holding its forward value and a closure that routes
the upstream gradient to the op's parents; calling backward() on a scalar
loss walks the recorded graph once in reverse topological order. Every op
output is checked finite at construction, so a NaN or Inf surfaces at the op
that produced it rather than poisoning the training loop.
"""

from __future__ import annotations

import numpy as np

from . import special
from .errors import DomainError, TrainingError


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_spent")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=float)
        if not np.all(np.isfinite(self.data)):
            raise TrainingError("non-finite values in tensor")
        self.grad = None
        self.requires_grad = bool(requires_grad) or any(p.requires_grad for p in _parents)
        self._parents = _parents
        self._backward = _backward
        self._spent = False

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self):
        """Reverse sweep from a scalar root. A graph can be swept once."""
        if self.data.size != 1:
            raise ValueError("backward() expects a scalar loss tensor")
        if self._spent:
            raise RuntimeError("this tape has already been consumed by backward()")
        self._spent = True
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))
        self._accumulate(np.ones_like(self.data))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        other = _wrap(other)

        def push(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g, self.data.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g, other.data.shape))

        return Tensor(self.data + other.data, _parents=(self, other), _backward=push)

    __radd__ = __add__

    def __neg__(self):
        def push(g):
            if self.requires_grad:
                self._accumulate(-g)

        return Tensor(-self.data, _parents=(self,), _backward=push)

    def __sub__(self, other):
        return self + (-_wrap(other))

    def __rsub__(self, other):
        return _wrap(other) + (-self)

    def __mul__(self, other):
        other = _wrap(other)

        def push(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g * other.data, self.data.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g * self.data, other.data.shape))

        return Tensor(self.data * other.data, _parents=(self, other), _backward=push)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _wrap(other)

        def push(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g / other.data, self.data.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(-g * self.data / other.data**2, other.data.shape))

        return Tensor(self.data / other.data, _parents=(self, other), _backward=push)

    def __rtruediv__(self, other):
        return _wrap(other) / self

    def __pow__(self, exponent):
        exponent = float(exponent)

        def push(g):
            if self.requires_grad:
                self._accumulate(g * exponent * self.data ** (exponent - 1.0))

        return Tensor(self.data**exponent, _parents=(self,), _backward=push)

    def __matmul__(self, other):
        other = _wrap(other)
        if self.data.ndim != 2 or other.data.ndim != 2:
            raise ValueError("matmul supports 2-D tensors only")

        def push(g):
            if self.requires_grad:
                self._accumulate(g @ other.data.T)
            if other.requires_grad:
                other._accumulate(self.data.T @ g)

        return Tensor(self.data @ other.data, _parents=(self, other), _backward=push)

    def __getitem__(self, key):
        def push(g):
            if self.requires_grad:
                full = np.zeros_like(self.data)
                np.add.at(full, key, g)
                self._accumulate(full)

        return Tensor(self.data[key], _parents=(self,), _backward=push)

    def sum(self):
        def push(g):
            if self.requires_grad:
                self._accumulate(np.broadcast_to(g, self.data.shape).copy())

        return Tensor(self.data.sum(), _parents=(self,), _backward=push)

    def mean(self):
        n = self.data.size

        def push(g):
            if self.requires_grad:
                self._accumulate(np.broadcast_to(g / n, self.data.shape).copy())

        return Tensor(self.data.mean(), _parents=(self,), _backward=push)


def _wrap(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def _unbroadcast(g, shape):
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def log(t: Tensor) -> Tensor:
    t = _wrap(t)
    if np.any(t.data <= 0.0):
        raise DomainError("log requires strictly positive input")

    def push(g):
        if t.requires_grad:
            t._accumulate(g / t.data)

    return Tensor(np.log(t.data), _parents=(t,), _backward=push)


def log1p(t: Tensor) -> Tensor:
    t = _wrap(t)
    if np.any(t.data <= -1.0):
        raise DomainError("log1p requires input > -1")

    def push(g):
        if t.requires_grad:
            t._accumulate(g / (1.0 + t.data))

    return Tensor(np.log1p(t.data), _parents=(t,), _backward=push)


def exp(t: Tensor) -> Tensor:
    t = _wrap(t)
    value = np.exp(t.data)

    def push(g):
        if t.requires_grad:
            t._accumulate(g * value)

    return Tensor(value, _parents=(t,), _backward=push)


def sqrt(t: Tensor) -> Tensor:
    t = _wrap(t)
    if np.any(t.data < 0.0):
        raise DomainError("sqrt requires non-negative input")
    value = np.sqrt(t.data)

    def push(g):
        if t.requires_grad:
            t._accumulate(g * 0.5 / value)

    return Tensor(value, _parents=(t,), _backward=push)


def softplus(t: Tensor) -> Tensor:
    t = _wrap(t)

    def push(g):
        if t.requires_grad:
            t._accumulate(g * special.sigmoid(t.data))

    return Tensor(special.softplus(t.data), _parents=(t,), _backward=push)


def leaky_relu(t: Tensor, negative_slope=0.01) -> Tensor:
    t = _wrap(t)
    factor = np.where(t.data >= 0.0, 1.0, negative_slope)

    def push(g):
        if t.requires_grad:
            t._accumulate(g * factor)

    return Tensor(t.data * factor, _parents=(t,), _backward=push)


def maximum(a: Tensor, b: Tensor) -> Tensor:
    a = _wrap(a)
    b = _wrap(b)
    take_a = a.data >= b.data  # ties route to the first argument

    def push(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * take_a, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * ~take_a, b.data.shape))

    return Tensor(np.maximum(a.data, b.data), _parents=(a, b), _backward=push)


def gammaln(t: Tensor) -> Tensor:
    t = _wrap(t)
    value = special.gammaln(t.data)

    def push(g):
        if t.requires_grad:
            t._accumulate(g * special.digamma(t.data))

    return Tensor(value, _parents=(t,), _backward=push)
