"""Dense float64 tensors with reverse-mode automatic differentiation.

Every operation that involves a gradient-requiring input records itself
on an implicit tape (the operation graph). ``backward`` replays that
tape exactly once in reverse topological order, returns the gradients of
the gradient-requiring leaves, and releases the tape.

The op set is deliberately small: matmul, affine, concat / stack,
elementwise add / mul / neg, sigmoid, tanh, relu, clamp, sum / mean and
binary cross-entropy. That is everything a GRU stack, bilinear scoring
and a critic MLP need.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

Array = np.ndarray

_grad_enabled = True


class no_grad:
    """Context manager that suppresses tape recording, for inference."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


class Tensor:
    """A float64 array plus the bookkeeping needed for backprop.

    Leaf tensors (anything built directly from data) reject NaN/Inf at
    construction. Interior tensors produced by ops skip that check; they
    carry references to their parents and a function that maps the
    output gradient to per-parent gradients.
    """

    __slots__ = ("data", "requires_grad", "grad", "name", "_parents", "_backward", "_is_leaf")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"non-finite values in leaf tensor {name or ''!r}")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: Array | None = None
        self.name = name
        self._parents: tuple = ()
        self._backward = None
        self._is_leaf = True

    @classmethod
    def _from_op(cls, data: Array, parents: tuple, backward_fn) -> "Tensor":
        out = object.__new__(cls)
        out.data = data
        out.requires_grad = _grad_enabled and any(p.requires_grad for p in parents)
        out.grad = None
        out.name = None
        out._is_leaf = False
        if out.requires_grad:
            out._parents = parents
            out._backward = backward_fn
        else:
            out._parents = ()
            out._backward = None
        return out

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad}{tag})"

    # operator sugar over the module-level ops
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __sub__(self, other):
        return add(self, neg(other) if isinstance(other, Tensor) else -other)

    def __rsub__(self, other):
        return add(neg(self), other)

    def __matmul__(self, other):
        return matmul(self, other)


def _as_array(x) -> Array:
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def add(a: Tensor, b) -> Tensor:
    if isinstance(b, Tensor):
        if a.shape != b.shape:
            raise ValueError(f"add shape mismatch: {a.shape} vs {b.shape}")

        def back(g):
            return (g, g)

        return Tensor._from_op(a.data + b.data, (a, b), back)
    scalar = float(b)

    def back_s(g):
        return (g,)

    return Tensor._from_op(a.data + scalar, (a,), back_s)


def mul(a: Tensor, b) -> Tensor:
    if isinstance(b, Tensor):
        if a.shape != b.shape:
            raise ValueError(f"mul shape mismatch: {a.shape} vs {b.shape}")
        a_data, b_data = a.data, b.data

        def back(g):
            ga = g * b_data if a.requires_grad else None
            gb = g * a_data if b.requires_grad else None
            return (ga, gb)

        return Tensor._from_op(a.data * b.data, (a, b), back)
    scalar = float(b)

    def back_s(g):
        return (g * scalar,)

    return Tensor._from_op(a.data * scalar, (a,), back_s)


def neg(a: Tensor) -> Tensor:
    def back(g):
        return (-g,)

    return Tensor._from_op(-a.data, (a,), back)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    ad, bd = a.data, b.data
    if ad.ndim == 0 or bd.ndim == 0 or ad.ndim > 2 or bd.ndim > 2:
        raise ValueError(f"matmul supports 1-D/2-D operands, got {ad.shape} @ {bd.shape}")
    if ad.shape[-1] != bd.shape[0]:
        raise ValueError(f"matmul shape mismatch: {ad.shape} @ {bd.shape}")
    out = np.asarray(ad @ bd)

    def back(g):
        if ad.ndim == 2 and bd.ndim == 2:
            ga = g @ bd.T if a.requires_grad else None
            gb = ad.T @ g if b.requires_grad else None
        elif ad.ndim == 1 and bd.ndim == 2:
            ga = bd @ g if a.requires_grad else None
            gb = np.outer(ad, g) if b.requires_grad else None
        elif ad.ndim == 2 and bd.ndim == 1:
            ga = np.outer(g, bd) if a.requires_grad else None
            gb = ad.T @ g if b.requires_grad else None
        else:  # 1-D dot 1-D
            ga = g * bd if a.requires_grad else None
            gb = g * ad if b.requires_grad else None
        return (ga, gb)

    return Tensor._from_op(out, (a, b), back)


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x @ w + b with the bias broadcast over rows when x is a matrix."""
    xd, wd, bd = x.data, w.data, b.data
    if wd.ndim != 2 or bd.ndim != 1 or wd.shape[1] != bd.shape[0]:
        raise ValueError(f"affine weight/bias mismatch: {wd.shape} vs {bd.shape}")
    if xd.ndim not in (1, 2) or xd.shape[-1] != wd.shape[0]:
        raise ValueError(f"affine input mismatch: {xd.shape} @ {wd.shape}")
    out = xd @ wd + bd

    def back(g):
        gx = g @ wd.T if x.requires_grad else None
        if w.requires_grad:
            gw = np.outer(xd, g) if xd.ndim == 1 else xd.T @ g
        else:
            gw = None
        if b.requires_grad:
            gb = g if g.ndim == 1 else g.sum(axis=0)
        else:
            gb = None
        return (gx, gw, gb)

    return Tensor._from_op(out, (x, w, b), back)


def concat(parts: list[Tensor]) -> Tensor:
    """Concatenate 1-D tensors."""
    if not parts:
        raise ValueError("concat of zero tensors")
    for p in parts:
        if p.data.ndim != 1:
            raise ValueError(f"concat expects 1-D tensors, got shape {p.shape}")
    sizes = [p.data.shape[0] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def back(g):
        return tuple(
            g[offsets[i]:offsets[i + 1]] if p.requires_grad else None
            for i, p in enumerate(parts)
        )

    return Tensor._from_op(np.concatenate([p.data for p in parts]), tuple(parts), back)


def stack_rows(rows: list[Tensor]) -> Tensor:
    """Stack equal-length 1-D tensors into a matrix, one per row."""
    if not rows:
        raise ValueError("stack of zero tensors")
    width = rows[0].data.shape[0]
    for r in rows:
        if r.data.ndim != 1 or r.data.shape[0] != width:
            raise ValueError(f"stack expects 1-D tensors of length {width}, got {r.shape}")

    def back(g):
        return tuple(g[i] if r.requires_grad else None for i, r in enumerate(rows))

    return Tensor._from_op(np.stack([r.data for r in rows]), tuple(rows), back)


def sigmoid(x: Tensor) -> Tensor:
    out = np.asarray(expit(x.data))

    def back(g):
        return (g * out * (1.0 - out),)

    return Tensor._from_op(out, (x,), back)


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)

    def back(g):
        return (g * (1.0 - out * out),)

    return Tensor._from_op(out, (x,), back)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0

    def back(g):
        return (g * mask,)

    return Tensor._from_op(np.where(mask, x.data, 0.0), (x,), back)


def clamp(x: Tensor, low: float, high: float) -> Tensor:
    """Clip values to [low, high]; gradient is zero where the clip bites."""
    inside = (x.data > low) & (x.data < high)

    def back(g):
        return (g * inside,)

    return Tensor._from_op(np.clip(x.data, low, high), (x,), back)


def tsum(x: Tensor) -> Tensor:
    shape = x.data.shape

    def back(g):
        return (np.full(shape, float(g)),)

    return Tensor._from_op(np.asarray(x.data.sum()), (x,), back)


def mean(x: Tensor) -> Tensor:
    """Mean over all elements (mean over the batch for stacked losses)."""
    n = x.data.size
    if n == 0:
        raise ValueError("mean of empty tensor")
    shape = x.data.shape

    def back(g):
        return (np.full(shape, float(g) / n),)

    return Tensor._from_op(np.asarray(x.data.mean()), (x,), back)


def bce(p: Tensor, target) -> Tensor:
    """Elementwise binary cross-entropy -(t log p + (1-t) log(1-p)).

    Probabilities must lie strictly inside (0, 1); clamp first if they
    may saturate.
    """
    pd = p.data
    if np.any(pd <= 0.0) or np.any(pd >= 1.0):
        raise ValueError("bce probabilities must lie strictly in (0, 1)")
    t = _as_array(target)
    out = -(t * np.log(pd) + (1.0 - t) * np.log(1.0 - pd))

    def back(g):
        return (g * (pd - t) / (pd * (1.0 - pd)),)

    return Tensor._from_op(out, (p,), back)


def backward(loss: Tensor) -> dict[Tensor, Array]:
    """Backpropagate from a scalar loss.

    Returns a map from each gradient-requiring leaf tensor to its
    gradient array, and stores the same array on ``leaf.grad``. The tape
    is released afterwards; a second backward through the same graph
    raises.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return {}
    if not loss._is_leaf and loss._backward is None:
        raise RuntimeError("tape already consumed by a previous backward")

    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen and parent.requires_grad:
                stack.append((parent, False))

    grads: dict[int, Array] = {id(loss): np.ones_like(loss.data)}
    leaf_grads: dict[Tensor, Array] = {}
    for node in reversed(topo):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._parents:
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
        elif node._is_leaf and node.requires_grad:
            g = g.reshape(node.data.shape)
            node.grad = g
            leaf_grads[node] = g

    for node in topo:
        node._parents = ()
        node._backward = None
    return leaf_grads
