import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from lfmda import arch, nn, tensorio as tio
from lfmda.errors import FormatError


def test_pgm_single_white_pixel():
    assert np.array_equal(tio.decode_pgm(b"P5\n1 1\n255\n\xff"), [[1.0]])


def test_pgm_128_mapping():
    img = tio.decode_pgm(b"P5 1 1 255 \x80")
    assert img[0, 0] == pytest.approx(0.50196, abs=1e-5)
    assert tio.to_bytes_u8([[0.50196]])[0, 0] == 128


def test_round_half_up():
    # exactly halfway between 0 and 1 in byte units rounds up
    assert tio.to_bytes_u8([0.5 / 255])[0] == 1
    assert tio.to_bytes_u8([-0.3, 1.7]).tolist() == [0, 255]


def test_pgm_header_layout(rng):
    img = rng.random((3, 5))
    buf = tio.encode_pgm(img)
    assert buf.startswith(b"P5\n5 3\n255\n") and len(buf) == 11 + 15


def test_pgm_comments_accepted():
    img = tio.decode_pgm(b"P5\n# made by hand\n2 1\n255\n\x00\xff")
    assert img.tolist() == [[0.0, 1.0]]


@pytest.mark.parametrize("buf,offset", [
    (b"P6\n1 1\n255\n\x00", 0),
    (b"P5\nx 1\n255\n\x00", 3),
    (b"P5\n1 1\n65535\n\x00\x00", 7),
    (b"P5\n2 2\n255\n\x00", 12),
])
def test_pgm_errors_carry_offsets(buf, offset):
    with pytest.raises(FormatError) as exc:
        tio.decode_pgm(buf)
    assert exc.value.offset == offset
    assert f"offset {offset}" in str(exc.value)


@settings(max_examples=30, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(1, 9), st.integers(1, 9))))
def test_pgm_bytes_round_trip(data):
    buf = b"P5\n%d %d\n255\n" % (data.shape[1], data.shape[0]) + data.tobytes()
    assert tio.encode_pgm(tio.decode_pgm(buf)) == buf


def test_pgm_file_round_trip(tmp_path, rng):
    img = np.floor(rng.random((4, 6)) * 256).clip(0, 255) / 255
    tio.write_pgm(tmp_path / "a.pgm", img)
    assert np.array_equal(tio.read_pgm(tmp_path / "a.pgm"), img)
    assert [p.name for p in tmp_path.iterdir()] == ["a.pgm"]


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
@pytest.mark.parametrize("shape", [(), (0,), (7,), (2, 3, 4, 5), (1, 1, 1, 1, 1, 2)])
def test_tensor_round_trip(tmp_path, rng, dtype, shape):
    t = rng.standard_normal(shape).astype(dtype)
    tio.write_tensor(tmp_path / "t.lfmt", t)
    back = tio.read_tensor(tmp_path / "t.lfmt")
    assert back.dtype == dtype and back.shape == t.shape
    assert back.tobytes() == t.tobytes()


def test_tensor_special_values_bit_exact():
    t = np.array([np.nan, -0.0, np.inf, -np.inf, 5e-324, np.finfo(np.float64).max])
    back, end = tio.decode_tensor(tio.encode_tensor(t))
    assert back.tobytes() == t.tobytes()


def test_tensor_layout():
    buf = tio.encode_tensor(np.arange(6, dtype="<f8").reshape(2, 3))
    assert buf[:4] == b"LFMT"
    assert struct.unpack_from("<HBB", buf, 4) == (1, 2, 2)
    assert struct.unpack_from("<2Q", buf, 8) == (2, 3)
    assert buf[24:] == np.arange(6, dtype="<f8").tobytes()


def test_tensor_errors(tmp_path):
    good = tio.encode_tensor(np.zeros((2, 2)))
    with pytest.raises(FormatError, match="offset 0"):
        tio.decode_tensor(b"XXXX" + good[4:])
    with pytest.raises(FormatError, match="offset 4"):
        tio.decode_tensor(good[:4] + struct.pack("<H", 9) + good[6:])
    with pytest.raises(FormatError, match="offset 6"):
        tio.decode_tensor(good[:6] + b"\x07" + good[7:])
    overflow = b"LFMT" + struct.pack("<HBB", 1, 2, 2) + struct.pack("<2Q", 2**62, 2**62)
    with pytest.raises(FormatError, match="offset 24"):
        tio.decode_tensor(overflow)
    with pytest.raises(FormatError):
        tio.decode_tensor(good[:-1])
    (tmp_path / "x").write_bytes(good + b"\x00")
    with pytest.raises(FormatError, match="trailing"):
        tio.read_tensor(tmp_path / "x")
    with pytest.raises(ValueError):
        tio.encode_tensor(np.zeros(3, dtype=np.int32))


@pytest.mark.parametrize("variant", ["baseline", "ie", "rsl"])
def test_checkpoint_round_trip(tmp_path, variant):
    model = nn.build_model(arch.toy_spec(variant), seed=11).with_input_norm(0.3, 0.2)
    tio.write_checkpoint(tmp_path / "m.lfmc", model)
    back = tio.read_checkpoint(tmp_path / "m.lfmc")
    assert back.spec == model.spec and back.rng_seed == 11
    assert list(back.params) == list(model.params)
    assert all(back.params[k].tobytes() == model.params[k].tobytes() for k in model.params)
    assert tio.encode_checkpoint(back) == (tmp_path / "m.lfmc").read_bytes()


def test_checkpoint_same_seed_identical_bytes():
    a = tio.encode_checkpoint(nn.build_model(arch.toy_spec("rsl"), seed=2))
    b = tio.encode_checkpoint(nn.build_model(arch.toy_spec("rsl"), seed=2))
    assert a == b


def test_checkpoint_errors():
    buf = tio.encode_checkpoint(nn.build_model(arch.toy_spec("baseline"), seed=0))
    with pytest.raises(FormatError, match="offset 0"):
        tio.decode_checkpoint(b"NOPE" + buf[4:])
    with pytest.raises(FormatError, match="offset 4"):
        tio.decode_checkpoint(buf[:4] + struct.pack("<H", 2) + buf[6:])
    with pytest.raises(FormatError):
        tio.decode_checkpoint(buf[:-3])
    with pytest.raises(FormatError, match="trailing"):
        tio.decode_checkpoint(buf + b"\x00")
    with pytest.raises(FormatError, match="spec"):
        tio.decode_checkpoint(buf[:18] + b"X" + buf[19:])


def test_atomic_write_leaves_no_temp_on_failure(tmp_path, monkeypatch):
    target = tmp_path / "keep.bin"
    target.write_bytes(b"old")

    def boom(*a, **k):
        raise OSError("disk full")

    monkeypatch.setattr(tio.os, "replace", boom)
    with pytest.raises(OSError):
        tio.atomic_write(target, b"new")
    assert target.read_bytes() == b"old"
    assert [p.name for p in tmp_path.iterdir()] == ["keep.bin"]
