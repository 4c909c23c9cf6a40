"""Binary PPM (P6) / PGM (P5) image files, maxval 255.

Images in memory are float32 arrays in [0, 1], shape [H, W, 3] for color
and [H, W] for grayscale; quantization rounds to nearest.
"""

from __future__ import annotations

import numpy as np

from ..errors import FormatError


def _quantize(img: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(np.asarray(img, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def write_ppm(img: np.ndarray, path) -> None:
    if img.ndim != 3 or img.shape[2] != 3:
        raise FormatError(f"PPM needs [H, W, 3], got {img.shape}")
    q = _quantize(img)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{img.shape[1]} {img.shape[0]}\n255\n".encode())
        fh.write(q.tobytes())


def write_pgm(img: np.ndarray, path) -> None:
    if img.ndim == 3:
        img = img[:, :, 0]
    if img.ndim != 2:
        raise FormatError(f"PGM needs [H, W], got {img.shape}")
    q = _quantize(img)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode())
        fh.write(q.tobytes())


def _read_header(buf: bytes, path):
    # magic, then whitespace/comment-separated width, height, maxval
    if buf[:2] not in (b"P5", b"P6"):
        raise FormatError(f"{path}: not a P5/P6 file", offset=0)
    fields, pos = [], 2
    while len(fields) < 3:
        while pos < len(buf) and buf[pos:pos + 1].isspace():
            pos += 1
        if pos < len(buf) and buf[pos:pos + 1] == b"#":
            while pos < len(buf) and buf[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated header", offset=pos)
        try:
            fields.append(int(buf[start:pos]))
        except ValueError:
            raise FormatError(f"{path}: non-numeric header field", offset=start)
    if pos >= len(buf) or not buf[pos:pos + 1].isspace():
        raise FormatError(f"{path}: missing header terminator", offset=pos)
    pos += 1
    w, h, maxval = fields
    if w <= 0 or h <= 0:
        raise FormatError(f"{path}: bad dimensions {w}x{h}", offset=2)
    if maxval != 255:
        raise FormatError(f"{path}: unsupported maxval {maxval}", offset=2)
    return buf[:2], w, h, pos


def read_image(path) -> np.ndarray:
    """Read P5 or P6; grayscale is replicated to [H, W, 3] float32 in [0,1]."""
    with open(path, "rb") as fh:
        buf = fh.read()
    magic, w, h, pos = _read_header(buf, path)
    channels = 3 if magic == b"P6" else 1
    need = w * h * channels
    if len(buf) - pos < need:
        raise FormatError(f"{path}: payload short by {need - (len(buf) - pos)} bytes",
                          offset=pos)
    if len(buf) - pos > need:
        raise FormatError(f"{path}: {len(buf) - pos - need} trailing bytes", offset=pos + need)
    arr = np.frombuffer(buf, dtype=np.uint8, count=need, offset=pos)
    if channels == 3:
        img = arr.reshape(h, w, 3)
    else:
        img = np.repeat(arr.reshape(h, w, 1), 3, axis=2)
    return (img.astype(np.float32) / 255.0)
