"""Dense float64 arrays with reverse-mode automatic differentiation.

Every op records its inputs and a vector-Jacobian closure on the output
node; ``backward`` walks the graph in reverse topological order and
accumulates gradients into the ``grad`` field of every node it reaches.
Inference code should wrap calls in ``no_grad()`` to skip recording.

Arrays are always C-contiguous float64.  There is no GPU path and no
higher-order differentiation.
"""

from __future__ import annotations

import contextlib
import math
from typing import Callable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Operand shapes are incompatible for the attempted op."""


class ContractError(ValueError):
    """An op was called outside its documented contract."""


_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (inference mode)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    """One node of the computation graph.

    ``data`` holds the value, ``grad`` accumulates d(root)/d(self) across
    ``backward`` calls until reset to ``None``.  Leaf tensors created with
    ``requires_grad=True`` are trainable parameters; everything reachable
    from one inherits ``requires_grad`` so backward can prune dead branches.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._vjp: Callable[[np.ndarray], tuple] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def backward(self) -> None:
        backward(self)

    def zero_grad(self) -> None:
        self.grad = None

    # arithmetic sugar; scalars are wrapped as constants
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

    def __truediv__(self, other):
        return div(self, _as_tensor(other))

    def __neg__(self):
        return mul(self, _as_tensor(-1.0))

    def __matmul__(self, other):
        return matmul(self, _as_tensor(other))

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def reshape(self, shape):
        return reshape(self, shape)


def parameter(data) -> Tensor:
    """A trainable leaf tensor (copies its input)."""
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data: np.ndarray, parents: tuple[Tensor, ...], vjp) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._vjp = vjp
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand's shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def backward(root: Tensor) -> None:
    """Accumulate d(root)/d(node) into ``grad`` for every node feeding root.

    ``root`` must be scalar.  Within one call gradients propagate through a
    scratch table, so repeated calls without resetting grads add exactly one
    more copy of the gradient (accumulation semantics).
    """
    if root.shape != ():
        raise ContractError(f"backward: root must be scalar, got shape {root.shape}")

    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))

    local: dict[int, np.ndarray] = {id(root): np.ones_like(root.data)}
    for node in reversed(topo):
        g = local.get(id(node))
        if g is None or node._vjp is None:
            continue
        for p, pg in zip(node._parents, node._vjp(g)):
            if pg is None or not p.requires_grad:
                continue
            acc = local.get(id(p))
            local[id(p)] = pg if acc is None else acc + pg

    for node in topo:
        g = local.get(id(node))
        if g is None:
            continue
        if node.grad is None:
            node.grad = np.array(g, dtype=np.float64)
        else:
            node.grad += g


# ---------------------------------------------------------------------------
# elementwise and broadcasting ops


def _binary(name: str, a: Tensor, b: Tensor, fwd, vjp_factory) -> Tensor:
    try:
        data = fwd(a.data, b.data)
    except ValueError as exc:
        raise ShapeError(f"{name}: incompatible shapes {a.shape} and {b.shape}") from exc
    return _node(data, (a, b), vjp_factory(a, b))


def add(a: Tensor, b: Tensor) -> Tensor:
    return _binary(
        "add", a, b, np.add,
        lambda a, b: lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a: Tensor, b: Tensor) -> Tensor:
    return _binary(
        "sub", a, b, np.subtract,
        lambda a, b: lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    return _binary(
        "multiply", a, b, np.multiply,
        lambda a, b: lambda g: (
            _unbroadcast(g * b.data, a.shape),
            _unbroadcast(g * a.data, b.shape),
        ),
    )


def div(a: Tensor, b: Tensor) -> Tensor:
    return _binary(
        "divide", a, b, np.divide,
        lambda a, b: lambda g: (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.shape),
        ),
    )


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return _node(y, (x,), lambda g, y=y: (g * (1.0 - y * y),))


def sigmoid(x: Tensor) -> Tensor:
    # tanh form is stable for large |x|
    y = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return _node(y, (x,), lambda g, y=y: (g * y * (1.0 - y),))


def relu(x: Tensor) -> Tensor:
    y = np.maximum(x.data, 0.0)
    mask = x.data > 0.0
    return _node(y, (x,), lambda g, mask=mask: (g * mask,))


def exp(x: Tensor) -> Tensor:
    y = np.exp(x.data)
    return _node(y, (x,), lambda g, y=y: (g * y,))


def log(x: Tensor) -> Tensor:
    return _node(np.log(x.data), (x,), lambda g, d=x.data: (g / d,))


def sqrt(x: Tensor) -> Tensor:
    y = np.sqrt(x.data)
    return _node(y, (x,), lambda g, y=y: (g / (2.0 * y),))


def sum_(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    data = x.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g, shape=x.shape, axis=axis, keepdims=keepdims):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape),)

    return _node(data, (x,), vjp)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = x.size if axis is None else x.shape[axis]
    data = x.data.mean(axis=axis, keepdims=keepdims)

    def vjp(g, shape=x.shape, axis=axis, keepdims=keepdims, n=n):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape) / n,)

    return _node(data, (x,), vjp)


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """np.matmul over stacks of matrices; operands must have ndim >= 2."""
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul: operands must have ndim >= 2, got {a.shape} @ {b.shape}")
    try:
        data = np.matmul(a.data, b.data)
    except ValueError as exc:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}") from exc

    def vjp(g, a=a, b=b):
        ga = np.matmul(g, b.data.swapaxes(-1, -2))
        gb = np.matmul(a.data.swapaxes(-1, -2), g)
        return (_unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape))

    return _node(data, (a, b), vjp)


def affine(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """``w @ x + b`` for a vector x, or ``x @ w.T + b`` row-wise for 2-D x.

    ``w`` is stored [out, in]; this is the fused linear layer used by every
    architecture, kept primitive to cut graph size.
    """
    if w.ndim != 2:
        raise ShapeError(f"affine: weight must be 2-D, got {w.shape}")
    if x.ndim == 1:
        if x.shape[0] != w.shape[1]:
            raise ShapeError(f"affine: incompatible shapes {w.shape} and {x.shape}")
        data = w.data @ x.data
    elif x.ndim == 2:
        if x.shape[1] != w.shape[1]:
            raise ShapeError(f"affine: incompatible shapes {x.shape} and {w.shape}")
        data = x.data @ w.data.T
    else:
        raise ShapeError(f"affine: input must be 1-D or 2-D, got {x.shape}")
    if b is not None:
        data = data + b.data

    def vjp(g, x=x, w=w, with_bias=b is not None):
        if x.ndim == 1:
            gx = w.data.T @ g
            gw = np.outer(g, x.data)
            gb = g if with_bias else None
        else:
            gx = g @ w.data
            gw = g.T @ x.data
            gb = g.sum(axis=0) if with_bias else None
        return (gx, gw, gb) if with_bias else (gx, gw)

    parents = (x, w) if b is None else (x, w, b)
    return _node(data, parents, vjp)


# ---------------------------------------------------------------------------
# shape manipulation


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = tuple(tensors)
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError(
            f"concat: incompatible shapes {[t.shape for t in tensors]} along axis {axis}"
        ) from exc
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def vjp(g, offsets=offsets, axis=axis, n=len(tensors)):
        slicer = [slice(None)] * g.ndim
        out = []
        for i in range(n):
            slicer[axis] = slice(offsets[i], offsets[i + 1])
            out.append(g[tuple(slicer)])
        return tuple(out)

    return _node(data, tensors, vjp)


def narrow(x: Tensor, axis: int, start: int, length: int) -> Tensor:
    slicer = [slice(None)] * x.ndim
    slicer[axis] = slice(start, start + length)
    slicer = tuple(slicer)
    data = x.data[slicer]

    def vjp(g, shape=x.shape, slicer=slicer):
        out = np.zeros(shape)
        out[slicer] = g
        return (out,)

    return _node(data, (x,), vjp)


def row(x: Tensor, i: int) -> Tensor:
    """x[i] along the first axis (drops the axis)."""
    data = x.data[i]

    def vjp(g, shape=x.shape, i=i):
        out = np.zeros(shape)
        out[i] = g
        return (out,)

    return _node(data, (x,), vjp)


def reshape(x: Tensor, shape) -> Tensor:
    data = x.data.reshape(shape)
    return _node(data, (x,), lambda g, s=x.shape: (g.reshape(s),))


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    data = x.data.transpose(axes)
    inv = tuple(np.argsort(axes))
    return _node(data, (x,), lambda g, inv=inv: (g.transpose(inv),))


def stack_rows(tensors: Sequence[Tensor]) -> Tensor:
    """Stack equal-shaped 1-D tensors into a matrix [n, d]."""
    tensors = tuple(tensors)
    data = np.stack([t.data for t in tensors], axis=0)

    def vjp(g, n=len(tensors)):
        return tuple(g[i] for i in range(n))

    return _node(data, tensors, vjp)


# ---------------------------------------------------------------------------
# lookups


def embedding_lookup(table: Tensor, ids: Sequence[int]) -> Tensor:
    """Rows of ``table`` selected by integer ids -> [len(ids), dim]."""
    idx = np.asarray(ids, dtype=np.intp)
    if idx.ndim != 1:
        raise ContractError(f"embedding_lookup: ids must be 1-D, got shape {idx.shape}")
    if table.ndim != 2:
        raise ShapeError(f"embedding_lookup: table must be 2-D, got {table.shape}")
    data = table.data[idx]

    def vjp(g, shape=table.shape, idx=idx):
        out = np.zeros(shape)
        np.add.at(out, idx, g)
        return (out,)

    return _node(data, (table,), vjp)


def gather(x: Tensor, indices: Sequence[int]) -> Tensor:
    """x[i, indices[i]] for each row i of a 2-D tensor -> [rows]."""
    idx = np.asarray(indices, dtype=np.intp)
    if x.ndim != 2 or idx.shape != (x.shape[0],):
        raise ShapeError(f"gather: need x [n, m] and n indices, got {x.shape} and {idx.shape}")
    rows = np.arange(x.shape[0])
    data = x.data[rows, idx]

    def vjp(g, shape=x.shape, rows=rows, idx=idx):
        out = np.zeros(shape)
        out[rows, idx] = g
        return (out,)

    return _node(data, (x,), vjp)


# ---------------------------------------------------------------------------
# normalization and attention building blocks


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def vjp(g, y=y, axis=axis):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _node(y, (x,), vjp)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    y = shifted - lse

    def vjp(g, y=y, axis=axis):
        return (g - np.exp(y) * g.sum(axis=axis, keepdims=True),)

    return _node(y, (x,), vjp)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then scale-shift.

    A constant input row yields exactly zero before gain/bias (eps guards the
    zero-variance case).
    """
    mu = mean(x, axis=-1, keepdims=True)
    centered = sub(x, mu)
    var = mean(mul(centered, centered), axis=-1, keepdims=True)
    normed = div(centered, sqrt(add(var, _as_tensor(eps))))
    return add(mul(normed, gain), bias)


def scaled_dot_product(q: Tensor, k: Tensor, v: Tensor, mask: Tensor | None = None) -> Tensor:
    """softmax(q k^T / sqrt(d) + mask) v over the last two axes."""
    d = q.shape[-1]
    scores = mul(matmul(q, transpose(k, tuple(range(k.ndim - 2)) + (k.ndim - 1, k.ndim - 2))),
                 _as_tensor(1.0 / math.sqrt(d)))
    if mask is not None:
        scores = add(scores, mask)
    return matmul(softmax(scores, axis=-1), v)


def dropout(x: Tensor, p: float, train: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout; identity when not training or p == 0."""
    if not train or p <= 0.0:
        return x
    if rng is None:
        raise ContractError("dropout: rng is required in training mode")
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    return _node(x.data * mask, (x,), lambda g, mask=mask: (g * mask,))


# ---------------------------------------------------------------------------
# fused recurrent cell


def lstm_cell(x: Tensor, h: Tensor, c: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """One LSTM step, fused: returns concat([h', c']) as a [2H] vector.

    ``w`` is [4H, Dx+H] with gate order (input, forget, cell, output);
    fusing the whole cell into one node keeps per-step graphs small.
    """
    hsize = h.shape[0]
    if w.shape != (4 * hsize, x.shape[0] + hsize):
        raise ShapeError(
            f"lstm_cell: weight {w.shape} does not match input {x.shape} + hidden {h.shape}"
        )
    xh = np.concatenate([x.data, h.data])
    z = w.data @ xh + b.data
    zi, zf, zg, zo = np.split(z, 4)
    gi = 0.5 * (1.0 + np.tanh(0.5 * zi))
    gf = 0.5 * (1.0 + np.tanh(0.5 * zf))
    gg = np.tanh(zg)
    go = 0.5 * (1.0 + np.tanh(0.5 * zo))
    c2 = gf * c.data + gi * gg
    t = np.tanh(c2)
    h2 = go * t
    data = np.concatenate([h2, c2])

    def vjp(g, xh=xh, gi=gi, gf=gf, gg=gg, go=go, t=t,
            cdata=c.data, wdata=w.data, hsize=hsize, dx=x.shape[0]):
        gh2 = g[:hsize]
        gc2 = g[hsize:] + gh2 * go * (1.0 - t * t)
        dzi = (gc2 * gg) * gi * (1.0 - gi)
        dzf = (gc2 * cdata) * gf * (1.0 - gf)
        dzg = (gc2 * gi) * (1.0 - gg * gg)
        dzo = (gh2 * t) * go * (1.0 - go)
        dz = np.concatenate([dzi, dzf, dzg, dzo])
        gxh = wdata.T @ dz
        return (gxh[:dx], gxh[dx:], gc2 * gf, np.outer(dz, xh), dz)

    return _node(data, (x, h, c, w, b), vjp)
