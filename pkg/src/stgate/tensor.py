"""Dense tensors with reverse-mode gradients.

A ``Tensor`` wraps a numpy array and records, for every operation, a
closure that maps the upstream gradient to per-parent gradients.  Calling
``backward`` on a scalar result walks the recorded graph in reverse
topological order and accumulates gradients into every leaf tensor that
has ``requires_grad`` set.  Gradients accumulate across calls until they
are explicitly zeroed.

Elementwise operations follow numpy broadcasting; the backward pass
sum-reduces gradients over broadcast axes so leaf gradients always match
the leaf shape.  ``matmul`` multiplies the last two axes and broadcasts
any leading (batch) axes.  No other implicit shape coercion happens:
incompatible operands raise :class:`ShapeError`.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np
from scipy.special import erf

from .errors import ContractError, ShapeError

Array = np.ndarray

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sum-reduce ``grad`` over axes that were broadcast relative to ``shape``."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """n-dimensional numeric array with an optional gradient slot."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype.kind not in "fiu":
            raise ContractError(f"tensor data must be numeric, got dtype {arr.dtype}")
        if arr.dtype.kind in "iu":
            arr = arr.astype(np.float64)
        self.data: Array = arr
        self.grad: Array | None = None
        self.requires_grad = requires_grad
        # op outputs carry their parents plus a closure mapping the upstream
        # gradient to a list of per-parent gradients (None = parent skipped)
        self._parents: tuple[Tensor, ...] = ()
        self._vjp: Callable[[Array], list[Array | None]] | None = None

    # -- basic introspection -------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    def item(self) -> float:
        if self.size != 1:
            raise ShapeError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    # -- gradient plumbing ---------------------------------------------------

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def _accumulate(self, g: Array) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self, grad: Array | None = None) -> None:
        """Propagate gradients from this tensor into every reachable leaf.

        Without an explicit seed gradient this tensor must be scalar.
        """
        if grad is None:
            if self.size != 1:
                raise ContractError(
                    f"backward() without a seed gradient needs a scalar, got shape {self.shape}"
                )
            grad = np.ones_like(self.data)
        pending: dict[int, Array] = {id(self): np.asarray(grad, dtype=self.data.dtype)}
        for node in _topo_order(self):
            g = pending.pop(id(node), None)
            if g is None:
                continue
            if node._vjp is None:
                if node.requires_grad:
                    node._accumulate(g)
                continue
            for parent, pg in zip(node._parents, node._vjp(g)):
                if pg is None:
                    continue
                key = id(parent)
                if key in pending:
                    pending[key] = pending[key] + pg
                else:
                    pending[key] = pg


def _topo_order(root: Tensor) -> list[Tensor]:
    """Iterative depth-first topological order, reversed so root comes first."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
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
            if id(parent) not in seen:
                stack.append((parent, False))
    order.reverse()
    return order


def _make_op(
    data: Array,
    parents: Sequence[Tensor],
    vjp: Callable[[Array], list[Array | None]],
) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._vjp = vjp
    return out


def _as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))


def _as_pair(a, b) -> tuple[Tensor, Tensor]:
    """Wrap operands; 0-d constants adopt the other side's dtype so that
    scalar literals never upcast a float32 computation."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim == 0 and b.ndim > 0 and a.dtype != b.dtype and not a.requires_grad:
        a = Tensor(a.data.astype(b.dtype))
    elif b.ndim == 0 and a.ndim > 0 and b.dtype != a.dtype and not b.requires_grad:
        b = Tensor(b.data.astype(a.dtype))
    return a, b


def _check_broadcast(a: Tensor, b: Tensor, opname: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(
            f"{opname}: shapes {a.shape} and {b.shape} do not broadcast"
        ) from None


# -- arithmetic ---------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _as_pair(a, b)
    _check_broadcast(a, b, "add")
    return _make_op(
        a.data + b.data,
        (a, b),
        lambda g: [_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)],
    )


def sub(a, b) -> Tensor:
    a, b = _as_pair(a, b)
    _check_broadcast(a, b, "sub")
    return _make_op(
        a.data - b.data,
        (a, b),
        lambda g: [_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)],
    )


def mul(a, b) -> Tensor:
    a, b = _as_pair(a, b)
    _check_broadcast(a, b, "mul")
    return _make_op(
        a.data * b.data,
        (a, b),
        lambda g: [_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)],
    )


def div(a, b) -> Tensor:
    a, b = _as_pair(a, b)
    _check_broadcast(a, b, "div")
    return _make_op(
        a.data / b.data,
        (a, b),
        lambda g: [
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.shape),
        ],
    )


def neg(a) -> Tensor:
    a = _as_tensor(a)
    return _make_op(-a.data, (a,), lambda g: [-g])


def power(a, exponent: float) -> Tensor:
    """Elementwise ``a ** exponent`` for a constant scalar exponent."""
    a = _as_tensor(a)
    e = float(exponent)
    out = a.data**e
    return _make_op(out, (a,), lambda g: [g * e * a.data ** (e - 1.0)])


def matmul(a, b) -> Tensor:
    """Matrix product over the last two axes; leading axes broadcast.

    Raises :class:`ShapeError` when the inner extents differ, naming both
    operand shapes.
    """
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs >=2-D operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner extents differ: {a.shape} x {b.shape}")
    try:
        out = np.matmul(a.data, b.data)
    except ValueError:
        raise ShapeError(f"matmul batch axes differ: {a.shape} x {b.shape}") from None
    need_a, need_b = a.requires_grad, b.requires_grad

    def vjp(g: Array) -> list[Array | None]:
        ga = gb = None
        if need_b and b.ndim == 2 and a.ndim > 2:
            # weight on the right: collapse batch axes into a single gemm
            k, n = b.shape
            gb = a.data.reshape(-1, k).T @ g.reshape(-1, n)
        elif need_b:
            gb = _unbroadcast(np.matmul(a.data.swapaxes(-1, -2), g), b.shape)
        if need_a:
            ga = _unbroadcast(np.matmul(g, b.data.swapaxes(-1, -2)), a.shape)
        return [ga, gb]

    return _make_op(out, (a, b), vjp)


# -- reductions ---------------------------------------------------------------


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g: Array) -> list[Array]:
        if axis is None:
            return [np.broadcast_to(g, a.shape).copy()]
        gg = g if keepdims else np.expand_dims(g, axis)
        return [np.broadcast_to(gg, a.shape).copy()]

    return _make_op(out, (a,), vjp)


def tmean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    out = a.data.mean(axis=axis, keepdims=keepdims)
    if axis is None:
        count = a.size
    elif isinstance(axis, tuple):
        count = int(np.prod([a.shape[ax] for ax in axis]))
    else:
        count = a.shape[axis]

    def vjp(g: Array) -> list[Array]:
        if axis is None:
            return [np.broadcast_to(g, a.shape) / count]
        gg = g if keepdims else np.expand_dims(g, axis)
        return [np.broadcast_to(gg, a.shape) / count]

    return _make_op(out, (a,), vjp)


# -- shape manipulation -------------------------------------------------------


def reshape(a, shape: Sequence[int]) -> Tensor:
    a = _as_tensor(a)
    out = a.data.reshape(shape)
    return _make_op(out, (a,), lambda g: [g.reshape(a.shape)])


def swapaxes(a, ax1: int, ax2: int) -> Tensor:
    a = _as_tensor(a)
    out = a.data.swapaxes(ax1, ax2)
    return _make_op(out, (a,), lambda g: [g.swapaxes(ax1, ax2)])


def concat_lastdim(a, b) -> Tensor:
    """Concatenate along the last axis; leading extents must match exactly."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape[:-1] != b.shape[:-1]:
        raise ShapeError(f"concat_lastdim leading extents differ: {a.shape} vs {b.shape}")
    out = np.concatenate([a.data, b.data], axis=-1)
    p = a.shape[-1]
    return _make_op(out, (a, b), lambda g: [g[..., :p], g[..., p:]])


# -- nonlinearities -----------------------------------------------------------


def sigmoid(a) -> Tensor:
    """Elementwise logistic function, computed in the overflow-safe form."""
    a = _as_tensor(a)
    x = a.data
    z = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    return _make_op(out, (a,), lambda g: [g * out * (1.0 - out)])


def tanh(a) -> Tensor:
    a = _as_tensor(a)
    out = np.tanh(a.data)
    return _make_op(out, (a,), lambda g: [g * (1.0 - out * out)])


def relu(a) -> Tensor:
    a = _as_tensor(a)
    out = np.maximum(a.data, 0.0)
    return _make_op(out, (a,), lambda g: [g * (a.data > 0)])


def gelu(a) -> Tensor:
    """Exact (erf-based) Gaussian error linear unit."""
    a = _as_tensor(a)
    x = a.data
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    out = x * cdf

    def vjp(g: Array) -> list[Array]:
        pdf = _INV_SQRT2PI * np.exp(-0.5 * x * x)
        return [g * (cdf + x * pdf)]

    return _make_op(out, (a,), vjp)


def texp(a) -> Tensor:
    a = _as_tensor(a)
    out = np.exp(a.data)
    return _make_op(out, (a,), lambda g: [g * out])


def tlog(a) -> Tensor:
    a = _as_tensor(a)
    out = np.log(a.data)
    return _make_op(out, (a,), lambda g: [g / a.data])


_ACTIVATIONS: dict[str, Callable[[Tensor], Tensor]] = {
    "relu": relu,
    "gelu": gelu,
    "tanh": tanh,
    "identity": lambda t: t,
}


def activation_fn(name: str) -> Callable[[Tensor], Tensor]:
    try:
        return _ACTIVATIONS[name]
    except KeyError:
        raise ContractError(
            f"unknown activation {name!r}; expected one of {sorted(_ACTIVATIONS)}"
        ) from None


def softmax_rows(a) -> Tensor:
    """Softmax over the last axis, stabilized by row-max subtraction.

    Each output row is nonnegative and sums to 1 (within 1e-9).
    """
    a = _as_tensor(a)
    x = a.data
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def vjp(g: Array) -> list[Array]:
        dot = (g * out).sum(axis=-1, keepdims=True)
        return [out * (g - dot)]

    return _make_op(out, (a,), vjp)


def layer_norm(x, gain, bias, eps: float = 1e-8) -> Tensor:
    """Normalize the last axis to mean 0 / population variance 1, then affine.

    ``eps`` guards the zero-variance case; with gain 1 and bias 0 the output
    statistics match 0/1 up to ``eps`` effects.
    """
    x, gain, bias = _as_tensor(x), _as_tensor(gain), _as_tensor(bias)
    d = x.shape[-1]
    if d < 1:
        raise ShapeError("layer_norm needs a non-empty last axis")
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(
            f"layer_norm gain/bias must have shape ({d},), got {gain.shape} and {bias.shape}"
        )
    mu = tmean(x, axis=-1, keepdims=True)
    centered = sub(x, mu)
    var = tmean(mul(centered, centered), axis=-1, keepdims=True)
    inv_std = power(add(var, eps), -0.5)
    normed = mul(centered, inv_std)
    return add(mul(normed, gain), bias)


# -- operator sugar -------------------------------------------------------------

Tensor.__add__ = lambda self, other: add(self, other)
Tensor.__radd__ = lambda self, other: add(other, self)
Tensor.__sub__ = lambda self, other: sub(self, other)
Tensor.__rsub__ = lambda self, other: sub(other, self)
Tensor.__mul__ = lambda self, other: mul(self, other)
Tensor.__rmul__ = lambda self, other: mul(other, self)
Tensor.__truediv__ = lambda self, other: div(self, other)
Tensor.__rtruediv__ = lambda self, other: div(other, self)
Tensor.__neg__ = lambda self: neg(self)
Tensor.__matmul__ = lambda self, other: matmul(self, other)
Tensor.__pow__ = lambda self, e: power(self, e)
Tensor.reshape = lambda self, shape: reshape(self, shape)
Tensor.swapaxes = lambda self, ax1, ax2: swapaxes(self, ax1, ax2)
Tensor.sum = lambda self, axis=None, keepdims=False: tsum(self, axis, keepdims)
Tensor.mean = lambda self, axis=None, keepdims=False: tmean(self, axis, keepdims)


def assert_finite(t: Tensor, context: str = "tensor") -> None:
    if not np.isfinite(t.data).all():
        raise ContractError(f"{context} contains non-finite values")
