"""Digital Gaussian low-pass kernel, its high-pass complement, and padded strided 2D correlation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels
from .errors import DimensionError


class Normalization(str, Enum):
    UNNORMALIZED_EQ2 = "unnormalized_eq2"
    UNIT_SUM = "unit_sum"


class PaddingMode(str, Enum):
    ZERO = "zero"
    REFLECT = "reflect"
    CIRCULAR = "circular"


@dataclass(frozen=True)
class Kernel:
    m: int
    taps: np.ndarray
    normalization: Normalization | None = None
    sigma: float | None = None

    @classmethod
    def from_taps(cls, taps) -> "Kernel":
        taps = np.asarray(taps, dtype=np.float64)
        if taps.ndim != 2 or taps.shape[0] != taps.shape[1] or taps.shape[0] % 2 == 0:
            raise DimensionError(f"kernel taps must be odd square, got {taps.shape}")
        return cls(m=taps.shape[0], taps=taps)

    @property
    def dc_gain(self) -> float:
        return float(self.taps.sum())

    def marginal(self) -> np.ndarray:
        """1D taps whose outer product reproduces ``taps`` (Gaussian kernels only)."""
        if self.sigma is None:
            raise ValueError("marginal() is defined for Gaussian kernels only")
        c = self.m // 2
        g = np.exp(-((np.arange(self.m) - c) ** 2) / (2.0 * self.sigma**2))
        if self.normalization is Normalization.UNIT_SUM:
            return g / g.sum()
        return g / math.sqrt(2.0 * math.pi * self.sigma**2)


def gaussian_kernel(m: int = 3, normalization: Normalization | str = Normalization.UNIT_SUM) -> Kernel:
    """m x m Gaussian with sigma = floor(m/2), sampled at integer offsets from the centre.

    ``unnormalized_eq2`` keeps the 1/(2 pi sigma^2) prefactor as-is (the taps then
    sum to about 0.78 for m=3); ``unit_sum`` rescales to unit DC gain.
    """
    normalization = Normalization(normalization)
    if not isinstance(m, (int, np.integer)) or m < 3 or m % 2 == 0:
        raise ValueError(f"kernel size m must be an odd integer >= 3, got {m!r}")
    m = int(m)
    s = m // 2
    taps = np.array([[math.exp(-(x * x + y * y) / (2 * s * s)) / (2 * math.pi * s * s)
                      for x in range(-s, s + 1)] for y in range(-s, s + 1)])
    if normalization is Normalization.UNIT_SUM:
        taps = taps / taps.sum()
    return Kernel(m=m, taps=taps, normalization=normalization, sigma=float(s))


# ---------------------------------------------------------------------------
# padding as an index gather, so its adjoint is an exact scatter
# ---------------------------------------------------------------------------


def pad_index(n: int, p: int, mode: PaddingMode) -> np.ndarray:
    """Source index for each padded position; -1 marks a zero tap."""
    i = np.arange(-p, n + p)
    if mode is PaddingMode.ZERO:
        return np.where((i >= 0) & (i < n), i, -1)
    if mode is PaddingMode.CIRCULAR:
        if p > n:
            raise DimensionError(f"circular padding {p} exceeds size {n}")
        return i % n
    if mode is PaddingMode.REFLECT:
        if p > n - 1:
            raise DimensionError(f"reflect padding {p} needs size > {p}, got {n}")
        i = np.abs(i)
        return np.where(i > n - 1, 2 * (n - 1) - i, i)
    raise ValueError(f"unknown padding {mode!r}")


def _pad_matrix(n: int, p: int, mode: PaddingMode, dtype) -> np.ndarray:
    idx = pad_index(n, p, mode)
    mat = np.zeros((n + 2 * p, n), dtype=dtype)
    valid = idx >= 0
    mat[np.nonzero(valid)[0], idx[valid]] = 1.0
    return mat


def pad_planes(x: np.ndarray, p: int, mode: PaddingMode) -> np.ndarray:
    """Pad the last two axes of ``x`` by ``p`` on every side."""
    if p == 0:
        return x.copy()
    h, w = x.shape[-2:]
    ri, ci = pad_index(h, p, mode), pad_index(w, p, mode)
    if mode is PaddingMode.ZERO:
        z = np.zeros(x.shape[:-2] + (h + 1, w + 1), dtype=x.dtype)
        z[..., :h, :w] = x
        ri, ci = np.where(ri < 0, h, ri), np.where(ci < 0, w, ci)
        return z[..., ri[:, None], ci[None, :]]
    return x[..., ri[:, None], ci[None, :]]


def pad_planes_adjoint(g: np.ndarray, p: int, mode: PaddingMode, h: int, w: int) -> np.ndarray:
    """Adjoint of :func:`pad_planes`: fold a padded-size gradient back onto the (h, w) input."""
    if p == 0:
        return g.copy()
    pr = _pad_matrix(h, p, mode, g.dtype)
    pc = _pad_matrix(w, p, mode, g.dtype)
    return np.matmul(np.matmul(pr.T, g), pc)


def _check_geometry(h: int, w: int, m: int, padding: PaddingMode, stride: int) -> None:
    if not isinstance(stride, (int, np.integer)) or stride < 1:
        raise ValueError(f"stride must be a positive integer, got {stride!r}")
    if padding is not PaddingMode.ZERO and m > min(h, w):
        raise DimensionError(f"kernel size {m} exceeds image size {h}x{w} under {padding.value} padding")


def output_size(n: int, stride: int) -> int:
    return -(-n // stride)


def correlate_planes(x: np.ndarray, taps: np.ndarray, padding: PaddingMode | str, stride: int = 1) -> np.ndarray:
    """Same-size correlation of every plane in ``x`` (..., H, W), sampled at multiples of ``stride``."""
    padding = PaddingMode(padding)
    h, w = x.shape[-2:]
    m = taps.shape[0]
    _check_geometry(h, w, m, padding, stride)
    lead = x.shape[:-2]
    xp = pad_planes(x.reshape((-1, h, w)), m // 2, padding)
    ho, wo = output_size(h, stride), output_size(w, stride)
    out = _kernels.plane_correlate(xp, taps.astype(x.dtype), stride, ho, wo)
    return out.reshape(lead + (ho, wo))


def correlate_planes_adjoint(g: np.ndarray, taps: np.ndarray, padding: PaddingMode | str, stride: int,
                             h: int, w: int) -> np.ndarray:
    padding = PaddingMode(padding)
    m = taps.shape[0]
    _check_geometry(h, w, m, padding, stride)
    ho, wo = output_size(h, stride), output_size(w, stride)
    if g.shape[-2:] != (ho, wo):
        raise DimensionError(f"gradient spatial shape {g.shape[-2:]} != expected {(ho, wo)}")
    lead = g.shape[:-2]
    p = m // 2
    gp = _kernels.plane_correlate_T(g.reshape((-1, ho, wo)), taps.astype(g.dtype), stride, h + 2 * p, w + 2 * p)
    return pad_planes_adjoint(gp, p, padding, h, w).reshape(lead + (h, w))


def _as_image(image) -> np.ndarray:
    x = np.asarray(image, dtype=np.float64)
    if x.ndim != 2 or x.size == 0:
        raise DimensionError(f"expected a non-empty 2D image, got shape {x.shape}")
    return x


def convolve2d(image, kernel: Kernel, padding: PaddingMode | str = PaddingMode.REFLECT, stride: int = 1) -> np.ndarray:
    """Filter-then-subsample: output (i, j) is the kernel response at input (i*stride, j*stride)."""
    x = _as_image(image)
    return correlate_planes(x, kernel.taps, padding, stride)


def convolve2d_separable(image, kernel: Kernel, padding: PaddingMode | str = PaddingMode.REFLECT,
                         stride: int = 1) -> np.ndarray:
    """Row pass then column pass with the kernel's 1D marginal."""
    padding = PaddingMode(padding)
    x = _as_image(image)
    h, w = x.shape
    _check_geometry(h, w, kernel.m, padding, stride)
    g = kernel.marginal()
    p = kernel.m // 2
    xp = pad_planes(x, p, padding)
    ho, wo = output_size(h, stride), output_size(w, stride)
    rows = np.zeros((h + 2 * p, wo))
    for b in range(kernel.m):
        rows += g[b] * xp[:, b : b + stride * (wo - 1) + 1 : stride]
    out = np.zeros((ho, wo))
    for a in range(kernel.m):
        out += g[a] * rows[a : a + stride * (ho - 1) + 1 : stride, :]
    return out


def lowpass(image, m: int = 3, padding: PaddingMode | str = PaddingMode.REFLECT,
            normalization: Normalization | str = Normalization.UNIT_SUM) -> np.ndarray:
    return convolve2d(image, gaussian_kernel(m, normalization), padding, 1)


def highpass(image, m: int = 3, padding: PaddingMode | str = PaddingMode.REFLECT,
             normalization: Normalization | str = Normalization.UNIT_SUM) -> np.ndarray:
    """Identity minus low-pass."""
    x = _as_image(image)
    return x - lowpass(x, m, padding, normalization)


def total_variation(image) -> float:
    """Sum of absolute horizontal and vertical neighbour differences, with wrap-around."""
    x = np.asarray(image, dtype=np.float64)
    return float(np.abs(x - np.roll(x, 1, 0)).sum() + np.abs(x - np.roll(x, 1, 1)).sum())
