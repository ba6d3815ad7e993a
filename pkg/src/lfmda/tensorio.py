"""Binary PGM images, LFMT tensors and LFMC checkpoints.

LFMT layout (little-endian)::

    0   4 bytes  magic b"LFMT"
    4   u16      version (1)
    6   u8       element type: 1 = f32, 2 = f64
    7   u8       rank
    8   u64*rank dims
    ..  payload  row-major elements

LFMC layout::

    magic b"LFMC", u16 version, i64 rng_seed, u32 spec length, spec JSON (UTF-8),
    u32 parameter count, then per parameter: u16 name length, name (UTF-8), LFMT blob.

All writers go through a temporary file and an atomic rename.
"""

from __future__ import annotations

import os
import re
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import FormatError

TENSOR_MAGIC = b"LFMT"
CKPT_MAGIC = b"LFMC"
VERSION = 1
_ETYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_ETYPE_CODE = {np.dtype("float32"): 1, np.dtype("float64"): 2}


def atomic_write(path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# PGM
# ---------------------------------------------------------------------------


def to_bytes_u8(image) -> np.ndarray:
    """[0, 1] -> 0..255 with round-half-up, clamped."""
    x = np.asarray(image, dtype=np.float64)
    return np.clip(np.floor(x * 255.0 + 0.5), 0, 255).astype(np.uint8)


def encode_pgm(image) -> bytes:
    q = to_bytes_u8(image)
    if q.ndim != 2:
        raise ValueError(f"PGM images are 2D, got shape {q.shape}")
    h, w = q.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + q.tobytes()


def write_pgm(path, image) -> None:
    atomic_write(path, encode_pgm(image))


def _pgm_token(buf: bytes, pos: int) -> tuple[bytes, int, int]:
    """Next whitespace-delimited header token, skipping comments. Returns (token, start, end)."""
    n = len(buf)
    while pos < n:
        if buf[pos : pos + 1] == b"#":
            while pos < n and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif buf[pos : pos + 1] in (b" ", b"\t", b"\r", b"\n"):
            pos += 1
        else:
            break
    start = pos
    while pos < n and buf[pos : pos + 1] not in (b" ", b"\t", b"\r", b"\n", b"#"):
        pos += 1
    if start == pos:
        raise FormatError("truncated PGM header", pos)
    return buf[start:pos], start, pos


def decode_pgm(buf: bytes) -> np.ndarray:
    if buf[:2] != b"P5":
        raise FormatError(f"not a binary PGM (magic {buf[:2]!r})", 0)
    pos = 2
    vals = []
    for name in ("width", "height", "maxval"):
        tok, start, pos = _pgm_token(buf, pos)
        if not re.fullmatch(rb"[0-9]+", tok):
            raise FormatError(f"bad PGM {name} {tok!r}", start)
        vals.append(int(tok))
    w, h, maxval = vals
    if maxval != 255:
        raise FormatError(f"only maxval 255 is supported, got {maxval}", start)
    if w < 1 or h < 1:
        raise FormatError(f"PGM dimensions must be positive, got {w}x{h}", pos)
    if pos >= len(buf) or buf[pos : pos + 1] not in (b" ", b"\t", b"\r", b"\n"):
        raise FormatError("missing whitespace after PGM header", pos)
    pos += 1
    need = w * h
    if len(buf) - pos < need:
        raise FormatError(f"truncated PGM payload: need {need} bytes, have {len(buf) - pos}", len(buf))
    data = np.frombuffer(buf, dtype=np.uint8, count=need, offset=pos)
    return data.reshape(h, w).astype(np.float64) / 255.0


def read_pgm(path) -> np.ndarray:
    return decode_pgm(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# LFMT tensors
# ---------------------------------------------------------------------------


def encode_tensor(t) -> bytes:
    arr = np.asarray(t)
    code = _ETYPE_CODE.get(arr.dtype)
    if code is None:
        raise ValueError(f"unsupported dtype {arr.dtype}; use float32 or float64")
    if arr.ndim > 255:
        raise ValueError("rank above 255 is not representable")
    head = TENSOR_MAGIC + struct.pack("<HBB", VERSION, code, arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return head + np.ascontiguousarray(arr, dtype=_ETYPES[code]).tobytes()


def decode_tensor(buf: bytes, offset: int = 0) -> tuple[np.ndarray, int]:
    """Parse one tensor starting at ``offset``; returns (array, offset just past it)."""
    if buf[offset : offset + 4] != TENSOR_MAGIC:
        raise FormatError(f"bad tensor magic {bytes(buf[offset:offset + 4])!r}", offset)
    if len(buf) < offset + 8:
        raise FormatError("truncated tensor header", len(buf))
    version, code, rank = struct.unpack_from("<HBB", buf, offset + 4)
    if version != VERSION:
        raise FormatError(f"unsupported tensor version {version}", offset + 4)
    if code not in _ETYPES:
        raise FormatError(f"unknown element type {code}", offset + 6)
    pos = offset + 8
    if len(buf) < pos + 8 * rank:
        raise FormatError("truncated tensor dims", len(buf))
    dims = struct.unpack_from(f"<{rank}Q", buf, pos)
    pos += 8 * rank
    count = 1
    for d in dims:
        count *= d
    nbytes = count * _ETYPES[code].itemsize
    if nbytes > len(buf) - pos:
        raise FormatError(f"dims {dims} need {nbytes} payload bytes, only {len(buf) - pos} remain", pos)
    arr = np.frombuffer(buf, dtype=_ETYPES[code], count=count, offset=pos).reshape(dims)
    return arr.astype(arr.dtype.newbyteorder("=")), pos + nbytes


def write_tensor(path, t) -> None:
    atomic_write(path, encode_tensor(t))


def read_tensor(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    arr, end = decode_tensor(buf)
    if end != len(buf):
        raise FormatError(f"{len(buf) - end} trailing bytes after tensor", end)
    return arr


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def encode_checkpoint(model) -> bytes:
    spec = model.spec.to_json().encode("utf-8")
    out = [CKPT_MAGIC, struct.pack("<Hq", VERSION, model.rng_seed), struct.pack("<I", len(spec)), spec,
           struct.pack("<I", len(model.params))]
    for name, arr in model.params.items():
        b = name.encode("utf-8")
        out += [struct.pack("<H", len(b)), b, encode_tensor(arr)]
    return b"".join(out)


def decode_checkpoint(buf: bytes):
    from .arch import ModelSpec
    from .nn import Model

    if buf[:4] != CKPT_MAGIC:
        raise FormatError(f"bad checkpoint magic {bytes(buf[:4])!r}", 0)
    if len(buf) < 18:
        raise FormatError("truncated checkpoint header", len(buf))
    version, seed = struct.unpack_from("<Hq", buf, 4)
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", 4)
    (spec_len,) = struct.unpack_from("<I", buf, 14)
    pos = 18
    if len(buf) < pos + spec_len + 4:
        raise FormatError("truncated checkpoint spec", len(buf))
    try:
        spec = ModelSpec.from_json(buf[pos : pos + spec_len].decode("utf-8"))
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"invalid model spec: {exc}", pos) from exc
    pos += spec_len
    (n,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    params = {}
    for _ in range(n):
        if len(buf) < pos + 2:
            raise FormatError("truncated parameter name", len(buf))
        (ln,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        if len(buf) < pos + ln:
            raise FormatError("truncated parameter name", len(buf))
        name = buf[pos : pos + ln].decode("utf-8")
        pos += ln
        params[name], pos = decode_tensor(buf, pos)
    if pos != len(buf):
        raise FormatError(f"{len(buf) - pos} trailing bytes after checkpoint", pos)
    try:
        return Model(spec, params, seed)
    except (ValueError, KeyError) as exc:
        raise FormatError(f"parameters do not match spec: {exc}", pos) from exc


def write_checkpoint(path, model) -> None:
    atomic_write(path, encode_checkpoint(model))


def read_checkpoint(path):
    return decode_checkpoint(Path(path).read_bytes())
