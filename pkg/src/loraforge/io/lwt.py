"""LWT tensor container.

Layout (all integers little-endian):

    magic   4 bytes  "LWT1"
    version u16      == 1
    count   u32      number of tensors
    per tensor:
        name_len u16, name UTF-8
        dtype    u8   (0 = float32)
        ndim     u8
        dims     ndim x u64
        payload  prod(dims) * 4 bytes of little-endian float32

Names must be unique, every length field is validated before any
allocation, and trailing bytes after the last tensor are rejected.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import FormatError

MAGIC = b"LWT1"
VERSION = 1
DTYPE_F32 = 0
_MAX_NDIM = 8
_MAX_ELEMS = 1 << 32  # sanity cap per tensor


def lwt_write(tensors: dict[str, np.ndarray], path) -> None:
    """Write named float32 arrays; insertion order is preserved."""
    names = list(tensors)
    if len(set(names)) != len(names):
        raise FormatError("duplicate tensor names")
    chunks = [MAGIC, struct.pack("<HI", VERSION, len(names))]
    for name in names:
        # asarray, not ascontiguousarray: the latter promotes 0-d to 1-d
        arr = np.asarray(tensors[name], dtype="<f4")
        nb = name.encode("utf-8")
        if len(nb) > 0xFFFF:
            raise FormatError(f"tensor name too long: {name[:32]}...")
        if arr.ndim > _MAX_NDIM:
            raise FormatError(f"tensor {name}: ndim {arr.ndim} exceeds {_MAX_NDIM}")
        chunks.append(struct.pack("<H", len(nb)))
        chunks.append(nb)
        chunks.append(struct.pack("<BB", DTYPE_F32, arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        chunks.append(arr.tobytes())
    data = b"".join(chunks)
    with open(path, "wb") as fh:
        fh.write(data)


def lwt_read(path) -> dict[str, np.ndarray]:
    """Read a container back into {name: float32 ndarray}."""
    with open(path, "rb") as fh:
        buf = fh.read()
    n = len(buf)
    if n < 10:
        raise FormatError("file too short for LWT header", offset=0)
    if buf[:4] != MAGIC:
        raise FormatError(f"bad magic {buf[:4]!r}", offset=0)
    version, count = struct.unpack_from("<HI", buf, 4)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)
    pos = 10
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        if pos + 2 > n:
            raise FormatError("truncated at name length", offset=pos)
        (name_len,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        if pos + name_len > n:
            raise FormatError("truncated inside name", offset=pos)
        try:
            name = buf[pos:pos + name_len].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"name is not UTF-8: {exc}", offset=pos) from exc
        pos += name_len
        if name in out:
            raise FormatError(f"duplicate tensor name {name!r}", offset=pos)
        if pos + 2 > n:
            raise FormatError(f"truncated at dtype/ndim of {name!r}", offset=pos)
        dtype, ndim = struct.unpack_from("<BB", buf, pos)
        pos += 2
        if dtype != DTYPE_F32:
            raise FormatError(f"unknown dtype {dtype} for {name!r}", offset=pos - 2)
        if ndim > _MAX_NDIM:
            raise FormatError(f"ndim {ndim} exceeds {_MAX_NDIM} for {name!r}",
                              offset=pos - 1)
        if pos + 8 * ndim > n:
            raise FormatError(f"truncated in dims of {name!r}", offset=pos)
        dims = struct.unpack_from(f"<{ndim}Q", buf, pos)
        pos += 8 * ndim
        elems = 1
        for d in dims:
            elems *= d
        if elems > _MAX_ELEMS:
            raise FormatError(f"tensor {name!r} declares {elems} elements", offset=pos)
        nbytes = elems * 4
        if pos + nbytes > n:
            raise FormatError(f"payload of {name!r} overruns file "
                              f"(need {nbytes} bytes)", offset=pos)
        arr = np.frombuffer(buf, dtype="<f4", count=elems, offset=pos).reshape(dims)
        out[name] = arr.astype(np.float32)  # writable copy, native order
        pos += nbytes
    if pos != n:
        raise FormatError(f"{n - pos} trailing bytes after last tensor", offset=pos)
    return out
