"""The low-frequency module: a fixed depthwise Gaussian blur for (N, C, H, W) feature tensors.

Also holds the two ways of wiring it into a network: IE (blur right before
global average pooling) and RSL (strided 3x3 convs swapped for a 1x1 conv
followed by a stride-2 blur).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .errors import DimensionError, StructureError
from .filters import (
    Normalization,
    PaddingMode,
    correlate_planes,
    correlate_planes_adjoint,
    gaussian_kernel,
    output_size,
)


@dataclass(frozen=True)
class LfmConfig:
    m: int = 3
    padding: PaddingMode = PaddingMode.REFLECT
    stride: int = 1
    normalization: Normalization = Normalization.UNIT_SUM

    def __post_init__(self):
        object.__setattr__(self, "padding", PaddingMode(self.padding))
        object.__setattr__(self, "normalization", Normalization(self.normalization))
        if not isinstance(self.m, (int, np.integer)) or self.m < 3 or self.m % 2 == 0:
            raise ValueError(f"LFM kernel size must be odd and >= 3, got {self.m!r}")
        if self.stride not in (1, 2):
            raise ValueError(f"LFM stride must be 1 or 2, got {self.stride!r}")

    def with_stride(self, stride: int) -> "LfmConfig":
        return replace(self, stride=stride)

    def to_dict(self) -> dict:
        return {"m": int(self.m), "padding": self.padding.value, "stride": int(self.stride),
                "normalization": self.normalization.value}


@lru_cache(maxsize=None)
def _taps(m: int, normalization: Normalization, dtype: str) -> np.ndarray:
    taps = gaussian_kernel(m, normalization).taps.astype(dtype)
    taps.setflags(write=False)
    return taps


def lfm_taps(cfg: LfmConfig, dtype=np.float64) -> np.ndarray:
    """The fixed kernel used by ``cfg``, in the tensor's precision. Read-only."""
    return _taps(int(cfg.m), cfg.normalization, np.dtype(dtype).name)


def _check_tensor(x: np.ndarray) -> None:
    if x.ndim != 4:
        raise DimensionError(f"expected an (N, C, H, W) tensor, got shape {x.shape}")


def lfm_forward(x: np.ndarray, cfg: LfmConfig) -> np.ndarray:
    _check_tensor(x)
    return correlate_planes(x, lfm_taps(cfg, x.dtype), cfg.padding, cfg.stride)


def lfm_output_shape(input_shape, cfg: LfmConfig) -> tuple:
    n, c, h, w = input_shape
    return (n, c, output_size(h, cfg.stride), output_size(w, cfg.stride))


def lfm_backward(grad_out: np.ndarray, cfg: LfmConfig, input_shape) -> np.ndarray:
    """Exact adjoint of :func:`lfm_forward` for an input of ``input_shape``."""
    _check_tensor(grad_out)
    expected = lfm_output_shape(tuple(input_shape), cfg)
    if grad_out.shape != expected:
        raise DimensionError(f"grad_out shape {grad_out.shape} does not match forward output {expected}")
    h, w = input_shape[2], input_shape[3]
    return correlate_planes_adjoint(grad_out, lfm_taps(cfg, grad_out.dtype), cfg.padding, cfg.stride, h, w)


# ---------------------------------------------------------------------------
# RSL block: 1x1 conv (channel mixing) then stride-2 Gaussian blur
# ---------------------------------------------------------------------------


def _w2d(w_1x1: np.ndarray) -> np.ndarray:
    w = np.asarray(w_1x1)
    if w.ndim == 4:
        if w.shape[2:] != (1, 1):
            raise DimensionError(f"expected 1x1 weights, got {w.shape}")
        w = w[:, :, 0, 0]
    if w.ndim != 2:
        raise DimensionError(f"expected (C_out, C_in) weights, got {w.shape}")
    return w


def pointwise_forward(x, w_1x1, bias=None):
    w = _w2d(w_1x1)
    _check_tensor(x)
    if x.shape[1] != w.shape[1]:
        raise DimensionError(f"input has {x.shape[1]} channels, 1x1 weights expect {w.shape[1]}")
    y = np.tensordot(w, x, axes=([1], [1])).transpose(1, 0, 2, 3)
    if bias is not None:
        y = y + np.asarray(bias, dtype=x.dtype)[None, :, None, None]
    return np.ascontiguousarray(y)


def pointwise_backward(grad_out, x, w_1x1):
    w = _w2d(w_1x1)
    dx = np.ascontiguousarray(np.tensordot(w, grad_out, axes=([0], [1])).transpose(1, 0, 2, 3))
    dw = np.tensordot(grad_out, x, axes=([0, 2, 3], [0, 2, 3]))
    db = grad_out.sum(axis=(0, 2, 3))
    return dx, dw.reshape(np.shape(w_1x1)), db


def rsl_block_forward(x: np.ndarray, w_1x1: np.ndarray, cfg: LfmConfig, bias=None) -> np.ndarray:
    if cfg.stride != 2:
        raise ValueError("an RSL block downsamples; cfg.stride must be 2")
    return lfm_forward(pointwise_forward(x, w_1x1, bias), cfg)


def rsl_block_backward(grad_out: np.ndarray, x: np.ndarray, w_1x1: np.ndarray, cfg: LfmConfig):
    """Returns (dx, dw, db)."""
    mid_shape = (x.shape[0], _w2d(w_1x1).shape[0], x.shape[2], x.shape[3])
    g_mid = lfm_backward(grad_out, cfg, mid_shape)
    return pointwise_backward(g_mid, x, w_1x1)


# ---------------------------------------------------------------------------
# architecture rewiring
# ---------------------------------------------------------------------------


def ie_attach(spec):
    """Insert an LFM (stride 1) right before global average pooling.

    Already-attached specs come back unchanged.
    """
    from .arch import Layer

    kinds = [s.kind for s in spec.stages]
    if "gap" not in kinds:
        raise StructureError("IE needs a global_avg_pool stage to attach to")
    g = kinds.index("gap")
    if g > 0 and kinds[g - 1] == "lfm":
        return replace(spec, variant="ie")
    stages = spec.stages[:g] + (Layer("lfm", stride=1),) + spec.stages[g:]
    out = replace(spec, variant="ie", stages=stages)
    out.validate()
    return out


def rsl_replace(spec):
    """Swap every stride-2 3x3 conv for an RSL block with the same channel mapping."""
    from .arch import Layer

    stages = tuple(
        Layer("rsl_block", s.c_in, s.c_out, stride=2) if s.kind == "conv3x3" and s.stride == 2 else s
        for s in spec.stages
    )
    if stages == spec.stages:
        raise StructureError("RSL found no stride-2 convolution to replace")
    out = replace(spec, variant="rsl", stages=stages)
    out.validate()
    return out
