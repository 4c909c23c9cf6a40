import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loraforge.errors import FormatError
from loraforge.io import lwt_read, lwt_write, read_image, write_pgm, write_ppm


def _random_tensors(rng, n):
    out = {}
    for i in range(n):
        ndim = int(rng.integers(0, 4))
        shape = tuple(int(rng.integers(1, 5)) for _ in range(ndim))
        out[f"t{i}/x"] = rng.normal(size=shape).astype(np.float32)
    return out


def test_lwt_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    tensors = _random_tensors(rng, 100)
    path = tmp_path / "t.lwt"
    lwt_write(tensors, path)
    back = lwt_read(path)
    assert list(back) == list(tensors)
    for k in tensors:
        assert back[k].shape == tensors[k].shape
        assert back[k].tobytes() == tensors[k].tobytes()


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(1, 6), min_size=0, max_size=3), st.integers(0, 2 ** 31))
def test_lwt_roundtrip_property(tmp_path_factory, shape, seed):
    rng = np.random.default_rng(seed)
    arr = rng.normal(size=tuple(shape)).astype(np.float32)
    path = tmp_path_factory.mktemp("lwt") / "t.lwt"
    lwt_write({"a": arr}, path)
    back = lwt_read(path)["a"]
    assert back.tobytes() == arr.tobytes() and back.shape == arr.shape


def test_lwt_truncated_payload(tmp_path):
    path = tmp_path / "t.lwt"
    lwt_write({"a": np.ones((4, 4), dtype=np.float32)}, path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-5])
    with pytest.raises(FormatError, match="offset"):
        lwt_read(path)


def test_lwt_bad_magic(tmp_path):
    path = tmp_path / "t.lwt"
    lwt_write({"a": np.ones(2, dtype=np.float32)}, path)
    raw = bytearray(path.read_bytes())
    raw[:4] = b"NOPE"
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError, match="magic"):
        lwt_read(path)


def test_lwt_future_version(tmp_path):
    path = tmp_path / "t.lwt"
    lwt_write({"a": np.ones(2, dtype=np.float32)}, path)
    raw = bytearray(path.read_bytes())
    raw[4] = 9
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError, match="version"):
        lwt_read(path)


def test_lwt_trailing_bytes(tmp_path):
    path = tmp_path / "t.lwt"
    lwt_write({"a": np.ones(2, dtype=np.float32)}, path)
    path.write_bytes(path.read_bytes() + b"xx")
    with pytest.raises(FormatError, match="trailing"):
        lwt_read(path)


def test_lwt_dims_payload_mismatch(tmp_path):
    # claim 3 elements but provide 2: payload overrun detected before allocation
    path = tmp_path / "t.lwt"
    lwt_write({"a": np.ones(2, dtype=np.float32)}, path)
    raw = bytearray(path.read_bytes())
    # dims field of the single 1-D tensor sits right before the 8-byte payload
    dims_off = len(raw) - 8 - 8
    raw[dims_off:dims_off + 8] = (3).to_bytes(8, "little")
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError, match="overruns"):
        lwt_read(path)


def test_lwt_duplicate_names_rejected_on_read(tmp_path):
    import struct
    path = tmp_path / "t.lwt"
    body = b""
    for _ in range(2):
        body += struct.pack("<H", 1) + b"a" + struct.pack("<BB", 0, 0)
        body += np.float32(1.0).tobytes()
    path.write_bytes(b"LWT1" + struct.pack("<HI", 1, 2) + body)
    with pytest.raises(FormatError, match="duplicate"):
        lwt_read(path)


def test_lwt_scalar_and_empty_names_order(tmp_path):
    path = tmp_path / "t.lwt"
    tensors = {"scalar": np.float32(3.5).reshape(()), "vec": np.arange(3, dtype=np.float32)}
    lwt_write(tensors, path)
    back = lwt_read(path)
    assert float(back["scalar"]) == 3.5
    assert list(back) == ["scalar", "vec"]


# ------------------------------------------------------------------ images

def test_ppm_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    img = (rng.integers(0, 256, size=(8, 6, 3)) / 255.0).astype(np.float32)
    path = tmp_path / "x.ppm"
    write_ppm(img, path)
    back = read_image(path)
    np.testing.assert_allclose(back, img, atol=1 / 255.0 / 2 + 1e-7)


def test_pgm_roundtrip_replicates_channels(tmp_path):
    rng = np.random.default_rng(2)
    img = (rng.integers(0, 256, size=(5, 7)) / 255.0).astype(np.float32)
    path = tmp_path / "x.pgm"
    write_pgm(img, path)
    back = read_image(path)
    assert back.shape == (5, 7, 3)
    np.testing.assert_array_equal(back[:, :, 0], back[:, :, 1])
    np.testing.assert_allclose(back[:, :, 0], img, atol=1 / 255.0 / 2 + 1e-7)


def test_image_truncated_payload(tmp_path):
    path = tmp_path / "x.pgm"
    write_pgm(np.zeros((4, 4), dtype=np.float32), path)
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(FormatError, match="short"):
        read_image(path)


def test_image_bad_magic(tmp_path):
    path = tmp_path / "x.pgm"
    path.write_bytes(b"P9\n2 2\n255\n" + b"\x00" * 4)
    with pytest.raises(FormatError):
        read_image(path)


def test_image_bad_maxval(tmp_path):
    path = tmp_path / "x.pgm"
    path.write_bytes(b"P5\n2 2\n65535\n" + b"\x00" * 8)
    with pytest.raises(FormatError, match="maxval"):
        read_image(path)
