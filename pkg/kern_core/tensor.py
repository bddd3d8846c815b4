#!/usr/bin/env python3

"""
Dense float64 tensors with reverse-mode differentiation.

Every operation returns a new ``Tensor`` that remembers its inputs and a closure
propagating the upstream gradient into them. ``Tensor.backward`` walks the graph
in reverse topological order. Broadcasting is limited to scalar-with-tensor and
equal shapes; the few layout operations the routers need (``replicate``,
``narrow``, ``leave_one_out_sum``) carry their own gradient rules instead.
"""

from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from kern_core.exceptions.ContractException import ContractException
from kern_core.exceptions.DimensionException import DimensionException
from kern_core.exceptions.NumericalException import NumericalException

Operand = Union["Tensor", float, int]

_debug_finite_checks = False


def set_debug_mode(enabled: bool):
    global _debug_finite_checks
    _debug_finite_checks = bool(enabled)


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_prev", "_backward", "_op")

    def __init__(self, data, requires_grad: bool = False, _children: Tuple["Tensor", ...] = (), _op: str = ""):
        self.data: np.ndarray = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = np.zeros_like(self.data) if self.requires_grad else None
        self._prev = _children
        self._backward: Callable[[], None] = _noop
        self._op = _op

        if _debug_finite_checks and not np.all(np.isfinite(self.data)):
            raise NumericalException(f"Non-finite value produced by '{_op or 'leaf'}' with shape {self.shape}")

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def is_leaf(self) -> bool:
        return len(self._prev) == 0

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractException(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self):
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def backward(self):
        if self.data.size != 1:
            raise ContractException(f"backward() needs a scalar loss, got shape {self.shape}")
        if not self.requires_grad:
            raise ContractException("backward() called on a tensor that does not track gradients")

        order = _topological_order(self)

        # Intermediate gradients are recomputed on every pass; leaves accumulate.
        for node in order:
            if not node.is_leaf:
                node.grad = np.zeros_like(node.data)
        self.grad = self.grad + np.ones_like(self.data)

        for node in reversed(order):
            node._backward()

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op='{self._op}', requires_grad={self.requires_grad})"

    def __add__(self, other: Operand) -> "Tensor":
        return add(self, other)

    def __radd__(self, other: Operand) -> "Tensor":
        return add(other, self)

    def __sub__(self, other: Operand) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: Operand) -> "Tensor":
        return sub(other, self)

    def __mul__(self, other: Operand) -> "Tensor":
        return mul(self, other)

    def __rmul__(self, other: Operand) -> "Tensor":
        return mul(other, self)

    def __neg__(self) -> "Tensor":
        return mul(self, -1.0)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)


def _noop():
    pass


def _topological_order(root: Tensor) -> List[Tensor]:
    order = []
    visited = set()
    stack = [(root, False)]

    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for child in reversed(node._prev):
            if child.requires_grad and id(child) not in visited:
                stack.append((child, False))

    return order


def as_tensor(value: Operand) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def _make(data: np.ndarray, children: Sequence[Tensor], op: str) -> Tensor:
    tracked = any(c.requires_grad for c in children)
    return Tensor(data, requires_grad=tracked, _children=tuple(children) if tracked else (), _op=op)


def _accumulate(target: Tensor, gradient: np.ndarray):
    if target.requires_grad:
        target.grad += gradient


def _reduce_to(gradient: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    if gradient.shape == shape:
        return gradient
    return np.asarray(gradient.sum()).reshape(shape)


def _check_broadcast(a: Tensor, b: Tensor, op: str):
    if a.shape == b.shape or a.data.size == 1 and a.ndim == 0 or b.data.size == 1 and b.ndim == 0:
        return
    raise DimensionException(f"'{op}' supports only equal shapes or a scalar operand", a.shape, b.shape)


def add(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")
    out = _make(a.data + b.data, (a, b), "add")

    def _backward():
        _accumulate(a, _reduce_to(out.grad, a.shape))
        _accumulate(b, _reduce_to(out.grad, b.shape))
    out._backward = _backward

    return out


def sub(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")
    out = _make(a.data - b.data, (a, b), "sub")

    def _backward():
        _accumulate(a, _reduce_to(out.grad, a.shape))
        _accumulate(b, _reduce_to(-out.grad, b.shape))
    out._backward = _backward

    return out


def mul(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")
    out = _make(a.data * b.data, (a, b), "mul")

    def _backward():
        _accumulate(a, _reduce_to(out.grad * b.data, a.shape))
        _accumulate(b, _reduce_to(out.grad * a.data, b.shape))
    out._backward = _backward

    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """
    Matrix product of two 2-D tensors, or a batched product of two 3-D tensors
    with identical leading (batch) dimension.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != b.ndim or a.ndim not in (2, 3) \
            or a.shape[-1] != b.shape[-2] \
            or a.ndim == 3 and a.shape[0] != b.shape[0]:
        raise DimensionException("matmul inner dimensions disagree", a.shape, b.shape)

    out = _make(np.matmul(a.data, b.data), (a, b), "matmul")

    def _backward():
        if a.requires_grad:
            a.grad += np.matmul(out.grad, np.swapaxes(b.data, -1, -2))
        if b.requires_grad:
            b.grad += np.matmul(np.swapaxes(a.data, -1, -2), out.grad)
    out._backward = _backward

    return out


def sigmoid(a: Tensor) -> Tensor:
    a = as_tensor(a)
    # exp of a non-positive argument only, so it never overflows
    decay = np.exp(-np.abs(a.data))
    value = np.where(a.data >= 0, 1.0 / (1.0 + decay), decay / (1.0 + decay))
    out = _make(value, (a,), "sigmoid")

    def _backward():
        _accumulate(a, out.grad * value * (1.0 - value))
    out._backward = _backward

    return out


def tanh(a: Tensor) -> Tensor:
    a = as_tensor(a)
    value = np.tanh(a.data)
    out = _make(value, (a,), "tanh")

    def _backward():
        _accumulate(a, out.grad * (1.0 - value * value))
    out._backward = _backward

    return out


def log(a: Tensor) -> Tensor:
    a = as_tensor(a)
    if np.any(a.data <= 0):
        raise NumericalException("log of a non-positive value")
    out = _make(np.log(a.data), (a,), "log")

    def _backward():
        _accumulate(a, out.grad / a.data)
    out._backward = _backward

    return out


def tensor_sum(a: Tensor, axis: Optional[int] = None) -> Tensor:
    a = as_tensor(a)
    out = _make(np.sum(a.data, axis=axis), (a,), "sum")

    def _backward():
        if axis is None:
            _accumulate(a, np.broadcast_to(out.grad, a.shape))
        else:
            _accumulate(a, np.broadcast_to(np.expand_dims(out.grad, axis), a.shape))
    out._backward = _backward

    return out


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - np.max(a.data, axis=axis, keepdims=True)
    exp = np.exp(shifted)
    value = exp / np.sum(exp, axis=axis, keepdims=True)
    out = _make(value, (a,), "softmax")

    def _backward():
        inner = np.sum(out.grad * value, axis=axis, keepdims=True)
        _accumulate(a, value * (out.grad - inner))
    out._backward = _backward

    return out


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - np.max(a.data, axis=axis, keepdims=True)
    log_norm = np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))
    value = shifted - log_norm
    out = _make(value, (a,), "log_softmax")

    def _backward():
        probabilities = np.exp(value)
        _accumulate(a, out.grad - probabilities * np.sum(out.grad, axis=axis, keepdims=True))
    out._backward = _backward

    return out


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ContractException("concat needs at least one tensor")

    reference = tensors[0]
    norm_axis = axis % reference.ndim
    for t in tensors[1:]:
        if t.ndim != reference.ndim or \
                any(t.shape[i] != reference.shape[i] for i in range(t.ndim) if i != norm_axis):
            raise DimensionException("concat shapes disagree off the joined axis", reference.shape, t.shape)

    out = _make(np.concatenate([t.data for t in tensors], axis=norm_axis), tensors, "concat")
    boundaries = np.cumsum([t.shape[norm_axis] for t in tensors])[:-1]

    def _backward():
        for t, piece in zip(tensors, np.split(out.grad, boundaries, axis=norm_axis)):
            _accumulate(t, piece)
    out._backward = _backward

    return out


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    try:
        value = a.data.reshape(shape)
    except ValueError:
        raise DimensionException("cannot reshape", a.shape, tuple(shape))
    out = _make(value, (a,), "reshape")

    def _backward():
        _accumulate(a, out.grad.reshape(a.shape))
    out._backward = _backward

    return out


def transpose(a: Tensor, axes: Optional[Sequence[int]] = None) -> Tensor:
    a = as_tensor(a)
    axes = tuple(reversed(range(a.ndim))) if axes is None else tuple(axes)
    out = _make(np.transpose(a.data, axes), (a,), "transpose")
    inverse = tuple(np.argsort(axes))

    def _backward():
        _accumulate(a, np.transpose(out.grad, inverse))
    out._backward = _backward

    return out


def replicate(a: Tensor, count: int, axis: int) -> Tensor:
    """Insert a new axis at ``axis`` and repeat ``a`` ``count`` times along it."""
    a = as_tensor(a)
    value = np.repeat(np.expand_dims(a.data, axis), count, axis=axis)
    out = _make(value, (a,), "replicate")

    def _backward():
        _accumulate(a, np.sum(out.grad, axis=axis))
    out._backward = _backward

    return out


def narrow(a: Tensor, axis: int, start: int, stop: int) -> Tensor:
    a = as_tensor(a)
    index = [slice(None)] * a.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)
    out = _make(a.data[index], (a,), "narrow")

    def _backward():
        if a.requires_grad:
            a.grad[index] += out.grad
    out._backward = _backward

    return out


def leave_one_out_sum(a: Tensor) -> Tensor:
    """out[i] = sum over j != i of a[j], along the first axis."""
    a = as_tensor(a)
    out = _make(np.sum(a.data, axis=0, keepdims=True) - a.data, (a,), "leave_one_out_sum")

    def _backward():
        _accumulate(a, np.sum(out.grad, axis=0, keepdims=True) - out.grad)
    out._backward = _backward

    return out


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """Rows of ``x`` (N x in) through ``weight`` (out x in) plus ``bias`` (out)."""
    x = as_tensor(x)
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise DimensionException("linear input does not match weight", x.shape, weight.shape)

    out = matmul(x, transpose(weight))
    if bias is not None:
        out = add(out, replicate(bias, x.shape[0], axis=0))

    return out


_ELEMENTWISE: Dict[str, Callable[..., Tensor]] = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "sigmoid": sigmoid,
    "tanh": tanh,
    "log": log,
    "sum": tensor_sum,
    "softmax": softmax,
    "log_softmax": log_softmax,
    "concat": lambda *tensors, axis=-1: concat(tensors, axis=axis),
}


def elementwise(op: str, *inputs: Operand, **kwargs) -> Tensor:
    if op not in _ELEMENTWISE:
        raise ContractException(f"Unknown elementwise operation '{op}'")
    return _ELEMENTWISE[op](*inputs, **kwargs)


def cross_entropy(logits: Tensor, targets: Iterable[int]) -> Tensor:
    """Mean softmax cross-entropy of the rows of ``logits`` against class indices."""
    targets = np.asarray(list(targets), dtype=np.int64)
    if logits.ndim != 2 or logits.shape[0] != targets.shape[0]:
        raise DimensionException("cross entropy logits do not match targets", logits.shape, targets.shape)
    if targets.size and (targets.min() < 0 or targets.max() >= logits.shape[1]):
        raise DimensionException("cross entropy target out of range", logits.shape, targets.shape)

    one_hot = np.zeros(logits.shape, dtype=np.float64)
    one_hot[np.arange(targets.shape[0]), targets] = 1.0

    picked = tensor_sum(mul(log_softmax(logits, axis=1), Tensor(one_hot)))
    return mul(picked, -1.0 / max(targets.shape[0], 1))
