"""Array kernels behind the tensor ops.

Inputs and outputs are float32; inner products run as float64 GEMMs (im2col
patches are upcast once per call, and the backward pass reuses a single
patch buffer for both weight and input gradients).
"""

import numpy as np


def _im2col(x64, kh, kw, stride, pad):
    b, c, h, w = x64.shape
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    if pad:
        x64 = np.pad(x64, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    s0, s1, s2, s3 = x64.strides
    windows = np.lib.stride_tricks.as_strided(
        x64,
        shape=(b, c, kh, kw, oh, ow),
        strides=(s0, s1, s2, s3, s2 * stride, s3 * stride),
        writeable=False,
    )
    # [b, oh, ow, c, kh, kw] -> rows of the patch matrix
    return windows.transpose(0, 4, 5, 1, 2, 3).reshape(b * oh * ow, c * kh * kw), oh, ow


def conv2d_fwd(x, w, stride, pad):
    b = x.shape[0]
    co = w.shape[0]
    cols, oh, ow = _im2col(x.astype(np.float64), w.shape[2], w.shape[3], stride, pad)
    y = cols @ w.astype(np.float64).reshape(co, -1).T
    return y.reshape(b, oh, ow, co).transpose(0, 3, 1, 2).astype(np.float32)


def conv2d_bwd(x, w, gy, stride, pad):
    """Gradients (gx, gw) for conv2d_fwd, sharing one im2col buffer."""
    b, ci, h, w_in = x.shape
    co, _, kh, kw = w.shape
    _, _, oh, ow = gy.shape
    cols, _, _ = _im2col(x.astype(np.float64), kh, kw, stride, pad)
    g = gy.astype(np.float64).transpose(0, 2, 3, 1).reshape(-1, co)
    gw = (g.T @ cols).reshape(w.shape).astype(np.float32)

    gcols = (g @ w.astype(np.float64).reshape(co, -1)).reshape(b, oh, ow, ci, kh, kw)
    gx = np.zeros((b, ci, h + 2 * pad, w_in + 2 * pad), dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            gx[:, :, i:i + oh * stride:stride, j:j + ow * stride:stride] += \
                gcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    if pad:
        gx = gx[:, :, pad:-pad, pad:-pad]
    return gx.astype(np.float32), gw


def avgpool2_fwd(x):
    b, c, h, w = x.shape
    v = x.astype(np.float64).reshape(b, c, h // 2, 2, w // 2, 2)
    return v.mean(axis=(3, 5)).astype(np.float32)


def avgpool2_bwd(gy, x_shape):
    g = gy.astype(np.float64) * 0.25
    return np.repeat(np.repeat(g, 2, axis=2), 2, axis=3).astype(np.float32)


def upsample2_fwd(x):
    return np.repeat(np.repeat(x, 2, axis=2), 2, axis=3)


def upsample2_bwd(gy):
    b, c, h, w = gy.shape
    v = gy.astype(np.float64).reshape(b, c, h // 2, 2, w // 2, 2)
    return v.sum(axis=(3, 5)).astype(np.float32)
