"""Dense float32 tensors with reverse-mode differentiation.

Values are stored float32; every reduction (sums, means, normalization
statistics, matmul/conv inner products) accumulates in float64 before the
result is cast back. The graph is a tape: each non-leaf remembers its
parents and a backward rule, and ``backward()`` replays the tape in reverse
topological order. Gradients are retained only on requires_grad leaves and
accumulate across calls until ``zero_grad``.

Forward passes are deterministic for fixed inputs: reduction order is fixed
by the kernel implementations, never by dict or set iteration.
"""

from __future__ import annotations

import contextlib

import numpy as np

from . import kernels
from .errors import ConfigError, ContractError, NumericError, ShapeError

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (sampling, evaluation)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def _f32(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float32)
    return a


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a gradient back to ``shape`` after numpy broadcasting."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)), dtype=np.float64)
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True, dtype=np.float64)
    return g.astype(np.float32)


class Tensor:
    """N-dimensional float32 array, optionally recorded on the tape."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _f32(data)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    # -- construction ------------------------------------------------------

    @staticmethod
    def _result(data: np.ndarray, parents, backward) -> "Tensor":
        out = Tensor.__new__(Tensor)
        out.data = data
        out.grad = None
        out._parents = ()
        out._backward = None
        out.requires_grad = False
        if _grad_enabled and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- autodiff driver ---------------------------------------------------

    def backward(self):
        """Accumulate d(self)/d(leaf) into every requires_grad leaf.

        ``self`` must be scalar. Repeated calls keep adding; call
        ``zero_grad`` on the parameters between steps.
        """
        if self.data.size != 1:
            raise ContractError(
                f"backward() needs a scalar loss, got shape {self.data.shape}")
        order = self._toposort()
        flows: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        nodes = {id(self): self}
        for node in order:
            g = flows.pop(id(node), None)
            nodes.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                if node.requires_grad:
                    if node.grad is None:
                        node.grad = g.copy()
                    else:
                        node.grad += g
                continue
            for parent, pg in node._backward(g):
                if not parent.requires_grad:
                    continue
                key = id(parent)
                if key in flows:
                    flows[key] = flows[key] + pg
                else:
                    flows[key] = pg
                    nodes[key] = parent

    def _toposort(self):
        order, visited, stack = [], set(), [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        order.reverse()
        return order

    # -- elementwise -------------------------------------------------------

    @staticmethod
    def _coerce(other) -> "Tensor":
        return other if isinstance(other, Tensor) else Tensor(other)

    def __add__(self, other):
        other = self._coerce(other)
        a, b = self, other
        data = a.data + b.data
        return Tensor._result(data, (a, b), lambda g: (
            (a, _unbroadcast(g, a.data.shape)),
            (b, _unbroadcast(g, b.data.shape))))

    __radd__ = __add__

    def __neg__(self):
        a = self
        return Tensor._result(-a.data, (a,), lambda g: ((a, -g),))

    def __sub__(self, other):
        other = self._coerce(other)
        a, b = self, other
        data = a.data - b.data
        return Tensor._result(data, (a, b), lambda g: (
            (a, _unbroadcast(g, a.data.shape)),
            (b, _unbroadcast(-g, b.data.shape))))

    def __rsub__(self, other):
        return self._coerce(other).__sub__(self)

    def __mul__(self, other):
        other = self._coerce(other)
        a, b = self, other
        data = a.data * b.data
        return Tensor._result(data, (a, b), lambda g: (
            (a, _unbroadcast(g * b.data, a.data.shape)),
            (b, _unbroadcast(g * a.data, b.data.shape))))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        a, b = self, other
        data = a.data / b.data
        return Tensor._result(data, (a, b), lambda g: (
            (a, _unbroadcast(g / b.data, a.data.shape)),
            (b, _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))))

    def __pow__(self, p):
        if not isinstance(p, (int, float)):
            raise ContractError("only scalar exponents are supported")
        a = self
        data = a.data ** np.float32(p)
        return Tensor._result(data, (a,), lambda g: (
            (a, (g * p * a.data ** np.float32(p - 1)).astype(np.float32)),))

    def exp(self):
        a = self
        data = np.exp(a.data)
        return Tensor._result(data, (a,), lambda g: ((a, g * data),))

    def log(self):
        a = self
        data = np.log(a.data)
        return Tensor._result(data, (a,), lambda g: ((a, g / a.data),))

    def silu(self):
        a = self
        s = 1.0 / (1.0 + np.exp(-a.data))
        data = a.data * s
        return Tensor._result(data, (a,), lambda g: (
            (a, g * (s * (1.0 + a.data * (1.0 - s)))),))

    # -- shape manipulation ------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        a = self
        old = a.data.shape
        data = a.data.reshape(shape)
        return Tensor._result(data, (a,), lambda g: ((a, g.reshape(old)),))

    def transpose(self, *axes):
        a = self
        if not axes:
            axes = tuple(reversed(range(a.data.ndim)))
        inv = np.argsort(axes)
        data = np.ascontiguousarray(a.data.transpose(axes))
        return Tensor._result(data, (a,), lambda g: (
            (a, np.ascontiguousarray(g.transpose(tuple(inv)))),))

    @property
    def T(self):
        return self.transpose()

    # -- reductions --------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False):
        a = self
        data = a.data.sum(axis=axis, keepdims=keepdims, dtype=np.float64).astype(np.float32)
        data = np.asarray(data, dtype=np.float32)

        def back(g):
            gg = g
            if axis is not None and not keepdims:
                gg = np.expand_dims(gg, axis)
            return ((a, np.broadcast_to(gg, a.data.shape).astype(np.float32)),)

        return Tensor._result(data, (a,), back)

    def mean(self, axis=None, keepdims: bool = False):
        n = self.data.size if axis is None else (
            np.prod([self.data.shape[i] for i in np.atleast_1d(axis)]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / float(n))

    # -- linear algebra ----------------------------------------------------

    def __matmul__(self, other):
        return matmul(self, other)

    # -- convenience -------------------------------------------------------

    def zero_grad(self):
        self.grad = None


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product with float64 accumulation.

    Supports 2-D x 2-D, 3-D x 2-D (shared weights over a batch) and
    3-D x 3-D with matching batch dimensions.
    """
    a, b = Tensor._coerce(a), Tensor._coerce(b)
    if a.data.ndim < 2 or b.data.ndim < 2 or a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {a.data.shape} x {b.data.shape}")
    if a.data.ndim == 3 and b.data.ndim == 3 and a.data.shape[0] != b.data.shape[0]:
        raise ShapeError(f"matmul: batch mismatch {a.data.shape} x {b.data.shape}")
    if a.data.ndim > 3 or b.data.ndim > 3 or (a.data.ndim == 2 and b.data.ndim == 3):
        raise ShapeError(f"matmul: unsupported ranks {a.data.shape} x {b.data.shape}")
    a64 = a.data.astype(np.float64)
    b64 = b.data.astype(np.float64)
    data = np.matmul(a64, b64).astype(np.float32)

    def back(g):
        g64 = g.astype(np.float64)
        ga = np.matmul(g64, b64.swapaxes(-1, -2))
        if a.data.ndim == 3 and b.data.ndim == 2:
            gb = np.einsum("bik,bij->kj", a64, g64)
        else:
            gb = np.matmul(a64.swapaxes(-1, -2), g64)
        return ((a, ga.astype(np.float32)), (b, gb.astype(np.float32)))

    return Tensor._result(data, (a, b), back)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [Tensor._coerce(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def back(g):
        parts = np.split(g, splits, axis=axis)
        return tuple((t, np.ascontiguousarray(p)) for t, p in zip(tensors, parts))

    return Tensor._result(data, tuple(tensors), back)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Row-stable softmax; denominators accumulate in float64."""
    a = x
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted.astype(np.float64))
    y = (e / e.sum(axis=axis, keepdims=True)).astype(np.float32)

    def back(g):
        dot = (g.astype(np.float64) * y).sum(axis=axis, keepdims=True)
        return ((a, ((g - dot) * y).astype(np.float32)),)

    return Tensor._result(y, (a,), back)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    a = x
    shifted = a.data.astype(np.float64) - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = (shifted - lse).astype(np.float32)
    sm = np.exp(shifted - lse)

    def back(g):
        s = g.sum(axis=axis, keepdims=True, dtype=np.float64)
        return ((a, (g - sm * s).astype(np.float32)),)

    return Tensor._result(out, (a,), back)


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row gather; backward scatter-adds into the table gradient."""
    ids = np.asarray(ids)
    t = table
    data = t.data[ids]

    def back(g):
        gt = np.zeros_like(t.data, dtype=np.float64)
        np.add.at(gt, ids, g.astype(np.float64))
        return ((t, gt.astype(np.float32)),)

    return Tensor._result(data, (t,), back)


def conv2d(x: Tensor, w: Tensor, bias: Tensor | None = None,
           stride: int = 1, padding: int = 0) -> Tensor:
    """2-D cross-correlation, NCHW layout, weight [out, in, kh, kw]."""
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ShapeError(f"conv2d: need 4-D input/weight, got {x.data.shape} and {w.data.shape}")
    if x.data.shape[1] != w.data.shape[1]:
        raise ShapeError(f"conv2d: channel mismatch {x.data.shape} vs {w.data.shape}")
    a, ww = x, w
    data = kernels.conv2d_fwd(np.ascontiguousarray(a.data), np.ascontiguousarray(ww.data),
                              stride, padding)

    def back(g):
        gx, gw = kernels.conv2d_bwd(a.data, ww.data, np.ascontiguousarray(g),
                                    stride, padding)
        return ((a, gx), (ww, gw))

    out = Tensor._result(data, (a, ww), back)
    if bias is not None:
        out = out + bias.reshape(1, -1, 1, 1)
    return out


def avg_pool2(x: Tensor) -> Tensor:
    """2x2 average pooling with stride 2."""
    if x.data.ndim != 4 or x.data.shape[2] % 2 or x.data.shape[3] % 2:
        raise ShapeError(f"avg_pool2: need 4-D input with even H,W, got {x.data.shape}")
    a = x
    data = kernels.avgpool2_fwd(np.ascontiguousarray(a.data))

    def back(g):
        return ((a, kernels.avgpool2_bwd(np.ascontiguousarray(g), a.data.shape)),)

    return Tensor._result(data, (a,), back)


def upsample2(x: Tensor) -> Tensor:
    """Nearest-neighbour 2x upsampling."""
    if x.data.ndim != 4:
        raise ShapeError(f"upsample2: need 4-D input, got {x.data.shape}")
    a = x
    data = kernels.upsample2_fwd(np.ascontiguousarray(a.data))

    def back(g):
        return ((a, kernels.upsample2_bwd(np.ascontiguousarray(g))),)

    return Tensor._result(data, (a,), back)


def mse(a: Tensor, b: Tensor) -> Tensor:
    """Mean squared error over all elements."""
    a, b = Tensor._coerce(a), Tensor._coerce(b)
    if a.data.shape != b.data.shape:
        raise ShapeError(f"mse: shape mismatch {a.data.shape} vs {b.data.shape}")
    d = a - b
    return (d * d).mean()


def group_norm(x: Tensor, num_groups: int, gamma: Tensor, beta: Tensor,
               eps: float = 1e-5) -> Tensor:
    """Per-group normalization over (C/G, H, W), then per-channel affine."""
    if x.data.ndim != 4:
        raise ShapeError(f"group_norm: need 4-D input, got {x.data.shape}")
    b, c, h, w = x.data.shape
    if c % num_groups:
        raise ConfigError(f"group_norm: {num_groups} groups do not divide {c} channels")
    xg = x.reshape(b, num_groups, (c // num_groups) * h * w)
    mu = xg.mean(axis=2, keepdims=True)
    xc = xg - mu
    var = (xc * xc).mean(axis=2, keepdims=True)
    xn = xc * ((var + eps) ** -0.5)
    xn = xn.reshape(b, c, h, w)
    return xn * gamma.reshape(1, c, 1, 1) + beta.reshape(1, c, 1, 1)


def cross_attention(q_in: Tensor, kv_in: Tensor, wq: Tensor, wk: Tensor,
                    wv: Tensor, wo: Tensor, name: str = "cross_attention") -> Tensor:
    """Single-head attention of query tokens over a context sequence.

    ``q_in`` is [L, Dq] or [B, L, Dq]; ``kv_in`` is [S, Dc] or [B, S, Dc].
    Projections: wq [Dq, D], wk [Dc, D], wv [Dc, D], wo [D, Do]. Attention
    rows sum to one; the scores are checked finite before the softmax.
    """
    q = matmul(q_in, wq)
    k = matmul(kv_in, wk)
    v = matmul(kv_in, wv)
    scale = 1.0 / np.sqrt(np.float32(wq.data.shape[1]))
    scores = matmul(q, k.transpose(*range(k.data.ndim - 2), k.data.ndim - 1,
                                   k.data.ndim - 2)) * scale
    if not np.isfinite(scores.data).all():
        raise NumericError(f"{name}: non-finite attention logits")
    attn = softmax(scores, axis=-1)
    return matmul(matmul(attn, v), wo)
