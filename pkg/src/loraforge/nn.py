"""Small module system on top of the tensor engine.

Modules register parameters and children in attribute order, so state dicts
have a stable layout, which the checkpoint format relies on. Construction
takes an explicit numpy Generator; there is no global RNG anywhere.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .errors import ConfigError
from .tensor import Tensor


class Module:
    def __init__(self):
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_modules", {})

    def __setattr__(self, name, value):
        if isinstance(value, Tensor):
            self._params[name] = value
        elif isinstance(value, Module):
            self._modules[name] = value
        object.__setattr__(self, name, value)

    def named_parameters(self, prefix: str = ""):
        for name, p in self._params.items():
            yield (prefix + name, p)
        for name, m in self._modules.items():
            yield from m.named_parameters(prefix + name + ".")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, sd: dict[str, np.ndarray]):
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(sd))
        extra = sorted(set(sd) - set(own))
        if missing or extra:
            raise ConfigError(f"state dict mismatch: missing={missing} extra={extra}")
        for name, p in own.items():
            arr = np.asarray(sd[name], dtype=np.float32)
            if arr.shape != p.data.shape:
                raise ConfigError(f"state dict shape mismatch for {name}: "
                                  f"{arr.shape} vs {p.data.shape}")
            p.data = arr.copy()

    def requires_grad_(self, flag: bool):
        for _, p in self.named_parameters():
            p.requires_grad = flag
        return self

    def zero_grad(self):
        for _, p in self.named_parameters():
            p.grad = None


class ModuleList(Module):
    def __init__(self, mods=()):
        super().__init__()
        self._list = []
        for m in mods:
            self.append(m)

    def append(self, mod: Module):
        self._modules[str(len(self._list))] = mod
        self._list.append(mod)

    def __iter__(self):
        return iter(self._list)

    def __len__(self):
        return len(self._list)

    def __getitem__(self, idx):
        return self._list[idx]


class Linear(Module):
    """y = x @ w (+ b), weight stored [in, out]."""

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator,
                 bias: bool = True):
        super().__init__()
        self.n_in, self.n_out = n_in, n_out
        scale = 1.0 / np.sqrt(n_in)
        self.w = Tensor(rng.normal(0.0, scale, (n_in, n_out)), requires_grad=True)
        self.b = Tensor(np.zeros(n_out), requires_grad=True) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        y = T.matmul(x, self.w)
        if self.b is not None:
            y = y + self.b
        return y

    __call__ = forward


class Conv2d(Module):
    def __init__(self, c_in: int, c_out: int, rng: np.random.Generator,
                 kernel: int = 3, stride: int = 1, padding: int = 1,
                 bias: bool = True):
        super().__init__()
        self.stride, self.padding = stride, padding
        scale = np.sqrt(2.0 / (c_in * kernel * kernel))
        self.w = Tensor(rng.normal(0.0, scale, (c_out, c_in, kernel, kernel)),
                        requires_grad=True)
        self.b = Tensor(np.zeros(c_out), requires_grad=True) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return T.conv2d(x, self.w, self.b, stride=self.stride, padding=self.padding)

    __call__ = forward


class GroupNorm(Module):
    def __init__(self, num_groups: int, channels: int):
        super().__init__()
        if channels % num_groups:
            raise ConfigError(f"{num_groups} groups do not divide {channels} channels")
        self.num_groups = num_groups
        self.gamma = Tensor(np.ones(channels), requires_grad=True)
        self.beta = Tensor(np.zeros(channels), requires_grad=True)

    def forward(self, x: Tensor) -> Tensor:
        return T.group_norm(x, self.num_groups, self.gamma, self.beta)

    __call__ = forward


class Embedding(Module):
    def __init__(self, n: int, dim: int, rng: np.random.Generator):
        super().__init__()
        self.weight = Tensor(rng.normal(0.0, 1.0 / np.sqrt(dim), (n, dim)),
                             requires_grad=True)

    def forward(self, ids: np.ndarray) -> Tensor:
        return T.embedding(self.weight, ids)

    __call__ = forward


def linear_with_lora(x: Tensor, w: Tensor, terms) -> Tensor:
    """x @ w plus the low-rank deltas: sum_i w_i * (x @ A_i^T) @ B_i^T.

    ``terms`` is a list of (A, B, strength) with A [r, in], B [out, r];
    Tensors or ndarrays are both accepted.
    """
    y = T.matmul(x, w)
    if terms:
        for a, b, s in terms:
            a = a if isinstance(a, Tensor) else Tensor(a)
            b = b if isinstance(b, Tensor) else Tensor(b)
            delta = T.matmul(T.matmul(x, a.transpose()), b.transpose())
            y = y + delta * float(s)
    return y


class CrossAttention(Module):
    """Single-head cross-attention with low-rank-adaptable projections.

    ``layer_id`` names this layer for adapter targeting; ``lora_terms`` at
    call time maps projection key ("q"/"k"/"v") to a list of (A, B, w).
    """

    def __init__(self, query_dim: int, context_dim: int, layer_id: str,
                 rng: np.random.Generator):
        super().__init__()
        self.layer_id = layer_id
        self.query_dim, self.context_dim = query_dim, context_dim
        sq = 1.0 / np.sqrt(query_dim)
        sc = 1.0 / np.sqrt(context_dim)
        self.wq = Tensor(rng.normal(0.0, sq, (query_dim, query_dim)), requires_grad=True)
        self.wk = Tensor(rng.normal(0.0, sc, (context_dim, query_dim)), requires_grad=True)
        self.wv = Tensor(rng.normal(0.0, sc, (context_dim, query_dim)), requires_grad=True)
        self.wo = Tensor(rng.normal(0.0, sq, (query_dim, query_dim)), requires_grad=True)

    def projection_shapes(self) -> dict[str, tuple[int, int]]:
        """(out, in) dims of each adaptable projection, in x@W orientation."""
        return {"q": (self.query_dim, self.query_dim),
                "k": (self.query_dim, self.context_dim),
                "v": (self.query_dim, self.context_dim)}

    def forward(self, x: Tensor, ctx: Tensor, lora_terms=None) -> Tensor:
        lt = lora_terms or {}
        q = linear_with_lora(x, self.wq, lt.get("q"))
        k = linear_with_lora(ctx, self.wk, lt.get("k"))
        v = linear_with_lora(ctx, self.wv, lt.get("v"))
        scale = 1.0 / np.sqrt(np.float32(self.query_dim))
        kt = k.transpose(*range(k.ndim - 2), k.ndim - 1, k.ndim - 2)
        scores = T.matmul(q, kt) * scale
        if not np.isfinite(scores.data).all():
            from .errors import NumericError
            raise NumericError(f"{self.layer_id}: non-finite attention logits")
        attn = T.softmax(scores, axis=-1)
        return T.matmul(T.matmul(attn, v), self.wo)

    __call__ = forward
