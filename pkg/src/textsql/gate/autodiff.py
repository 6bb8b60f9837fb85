"""Reverse-mode automatic differentiation over float64 numpy arrays.

A deliberately small tape: just the operations the encoder-decoder and the
extraction gate need. Every op records a closure that routes the output
gradient to its parents; ``backward()`` on a scalar walks the graph once in
reverse topological order. All math is double precision so finite-difference
checks resolve well below the acceptance tolerance.
"""

from __future__ import annotations

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient down to the shape it was broadcast from."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """A node in the computation graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backward_fn=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self.grad: np.ndarray | None = None
        self._parents = _parents
        self._backward_fn = _backward_fn

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def _accumulate(self, grad: np.ndarray):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    def backward(self):
        """Backpropagate from a scalar root."""
        if self.data.ndim != 0:
            raise ValueError("backward() requires a scalar root")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited or not node.requires_grad:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward_fn is not None:
                node._backward_fn(node)

    # Operator sugar for the common arithmetic.
    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __matmul__(self, other):
        return matmul(self, _as_tensor(other))

    def __neg__(self):
        return mul(self, _as_tensor(-1.0))


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _binary(a: Tensor, b: Tensor, out_data, da_fn, db_fn) -> Tensor:
    def backward(out: Tensor):
        if a.requires_grad:
            a._accumulate(_unbroadcast(da_fn(out.grad), a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(db_fn(out.grad), b.shape))

    return Tensor(out_data, _parents=(a, b), _backward_fn=backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    return _binary(a, b, a.data + b.data, lambda g: g, lambda g: g)


def sub(a: Tensor, b: Tensor) -> Tensor:
    return _binary(a, b, a.data - b.data, lambda g: g, lambda g: -g)


def mul(a: Tensor, b: Tensor) -> Tensor:
    return _binary(a, b, a.data * b.data, lambda g: g * b.data, lambda g: g * a.data)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data @ b.data

    def backward(out: Tensor):
        if a.requires_grad:
            a._accumulate(out.grad @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ out.grad)

    return Tensor(out_data, _parents=(a, b), _backward_fn=backward)


def _unary(a: Tensor, out_data, da_fn) -> Tensor:
    def backward(out: Tensor):
        if a.requires_grad:
            a._accumulate(da_fn(out.grad, out.data))

    return Tensor(out_data, _parents=(a,), _backward_fn=backward)


def relu(a: Tensor) -> Tensor:
    return _unary(a, np.maximum(a.data, 0.0), lambda g, y: g * (a.data > 0.0))


def exp(a: Tensor) -> Tensor:
    return _unary(a, np.exp(a.data), lambda g, y: g * y)


def log(a: Tensor) -> Tensor:
    return _unary(a, np.log(a.data), lambda g, y: g / a.data)


def sigmoid(a: Tensor) -> Tensor:
    # Stable on both tails.
    x = a.data
    y = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    return _unary(a, y, lambda g, out: g * out * (1.0 - out))


def power(a: Tensor, exponent: float) -> Tensor:
    out_data = a.data**exponent
    return _unary(a, out_data, lambda g, y: g * exponent * a.data ** (exponent - 1.0))


def softmax(a: Tensor) -> Tensor:
    """Row softmax over the last axis (max-shifted for stability; the shift
    does not change the derivative)."""
    z = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)

    def backward(out: Tensor):
        if a.requires_grad:
            g = out.grad
            a._accumulate(y * (g - (g * y).sum(axis=-1, keepdims=True)))

    return Tensor(y, _parents=(a,), _backward_fn=backward)


def tsum(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(out: Tensor):
        if not a.requires_grad:
            return
        g = out.grad
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        a._accumulate(np.broadcast_to(g, a.shape).copy())

    return Tensor(out_data, _parents=(a,), _backward_fn=backward)


def tmean(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    count = a.data.size if axis is None else a.data.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), _as_tensor(1.0 / count))


def concat_last(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate along the last axis."""
    out_data = np.concatenate([a.data, b.data], axis=-1)
    split = a.data.shape[-1]

    def backward(out: Tensor):
        if a.requires_grad:
            a._accumulate(out.grad[..., :split])
        if b.requires_grad:
            b._accumulate(out.grad[..., split:])

    return Tensor(out_data, _parents=(a, b), _backward_fn=backward)


def take_rows(a: Tensor, ids: np.ndarray) -> Tensor:
    """Gather rows of a 2-D tensor by integer ids (embedding lookup)."""
    ids = np.asarray(ids, dtype=np.int64)
    out_data = a.data[ids]

    def backward(out: Tensor):
        if a.requires_grad:
            grad = np.zeros_like(a.data)
            np.add.at(grad, ids, out.grad)
            a._accumulate(grad)

    return Tensor(out_data, _parents=(a,), _backward_fn=backward)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-6) -> Tensor:
    """Per-row layer normalization with learnable gain and bias."""
    m = tmean(x, axis=-1, keepdims=True)
    centered = sub(x, m)
    var = tmean(mul(centered, centered), axis=-1, keepdims=True)
    inv = power(add(var, _as_tensor(eps)), -0.5)
    return add(mul(mul(centered, inv), gain), bias)
