"""Optimizers and learning-rate schedules.

Both optimizers keep per-parameter moment buffers keyed by parameter name,
refuse to step on non-finite gradients, and never modify the gradient
buffers themselves.
"""

import math

import numpy as np

from .errors import NumericError, RangeError, ShapeError
from .tensor import Tensor


def cosine_anneal_lr(step: int, total: int, lr_max: float) -> float:
    """Half-cosine decay from lr_max at step 0 to 0 at step == total."""
    if total <= 0:
        raise RangeError(f"total must be positive, got {total}")
    if step < 0 or step > total:
        raise RangeError(f"step {step} outside [0, {total}]")
    return 0.5 * lr_max * (1.0 + math.cos(math.pi * step / total))


def warmup_cosine_lr(step: int, total: int, warmup: int, lr_max: float) -> float:
    """Linear ramp over ``warmup`` steps, then cosine decay to 0 at ``total``."""
    if warmup < 0 or warmup >= total:
        raise RangeError(f"warmup {warmup} must lie in [0, total={total})")
    if step < warmup:
        return lr_max * (step + 1) / warmup
    return cosine_anneal_lr(step - warmup, total - warmup, lr_max)


class _OptimizerBase:
    kind = ""

    def __init__(self, params, lr: float, weight_decay: float = 0.0):
        # params: iterable of (name, Tensor); order fixes update order
        self.params = list(params)
        self.lr = float(lr)
        self.weight_decay = float(weight_decay)
        self.step_count = 0

    def zero_grad(self):
        for _, p in self.params:
            p.grad = None

    def _check_grads(self):
        for name, p in self.params:
            if p.grad is None:
                continue
            if p.grad.shape != p.data.shape:
                raise ShapeError(f"gradient shape {p.grad.shape} != parameter "
                                 f"shape {p.data.shape} for {name}")
            if not np.isfinite(p.grad).all():
                raise NumericError(f"non-finite gradient for {name}; step refused")

    def step(self, lr: float | None = None):
        self._check_grads()
        self.step_count += 1
        eff_lr = self.lr if lr is None else float(lr)
        for name, p in self.params:
            if p.grad is None:
                continue
            self._update(name, p, eff_lr)

    def _update(self, name: str, p: Tensor, lr: float):
        raise NotImplementedError


class SGD(_OptimizerBase):
    """SGD with classical momentum and decoupled-from-grad L2 weight decay."""

    kind = "sgd_momentum"

    def __init__(self, params, lr: float, momentum: float = 0.0,
                 weight_decay: float = 0.0):
        super().__init__(params, lr, weight_decay)
        self.momentum = float(momentum)
        self._velocity: dict[str, np.ndarray] = {}

    def _update(self, name, p, lr):
        g = p.grad
        if self.weight_decay:
            g = g + self.weight_decay * p.data
        if self.momentum:
            v = self._velocity.get(name)
            if v is None:
                v = np.zeros_like(p.data)
                self._velocity[name] = v
            v *= self.momentum
            v += g
            g = v
        p.data -= (lr * g).astype(np.float32)


class Adam(_OptimizerBase):
    """Adam with bias correction."""

    kind = "adam"

    def __init__(self, params, lr: float = 1e-3, betas=(0.9, 0.999),
                 eps: float = 1e-8, weight_decay: float = 0.0):
        super().__init__(params, lr, weight_decay)
        self.betas = (float(betas[0]), float(betas[1]))
        self.eps = float(eps)
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def _update(self, name, p, lr):
        b1, b2 = self.betas
        g = p.grad.astype(np.float32)
        if self.weight_decay:
            g = g + self.weight_decay * p.data
        m = self._m.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
            self._m[name], self._v[name] = m, v
        else:
            v = self._v[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * (g * g)
        t = self.step_count
        mh = m / (1 - b1 ** t)
        vh = v / (1 - b2 ** t)
        p.data -= (lr * mh / (np.sqrt(vh) + self.eps)).astype(np.float32)
