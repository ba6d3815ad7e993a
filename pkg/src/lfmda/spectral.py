"""2D DFT / IDFT, circular spectral filtering and radial band statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DimensionError


@dataclass(frozen=True)
class ComplexField:
    """Frequency-domain array of shape (height, width), DC at index (0, 0)."""

    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 2:
            raise DimensionError(f"ComplexField must be 2D, got shape {self.data.shape}")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def conj_symmetry_error(self) -> float:
        """max |F(u,v) - conj(F(-u,-v))|; zero for transforms of real arrays."""
        mirrored = np.roll(self.data[::-1, ::-1], 1, axis=(0, 1))
        return float(np.max(np.abs(self.data - np.conj(mirrored))))


@dataclass(frozen=True)
class SpectrumStats:
    total_energy: float
    band_energies: list  # [((r_lo, r_hi), energy), ...]
    dc_value: float

    def energies(self) -> np.ndarray:
        return np.array([e for _, e in self.band_energies])


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _twiddle(n: int, sign: float) -> np.ndarray:
    # reduce u*a mod n before the exponential to keep phases small and exact
    idx = np.outer(np.arange(n), np.arange(n)) % n
    return np.exp(sign * 2j * np.pi * idx / n)


def _direct(x: np.ndarray, sign: float) -> np.ndarray:
    h, w = x.shape
    return _twiddle(h, sign) @ x @ _twiddle(w, sign).T


def _radix2(x: np.ndarray, inverse: bool) -> np.ndarray:
    y = _kernels.fft_rows(x, inverse)
    return _kernels.fft_rows(np.ascontiguousarray(y.T), inverse).T


def _check_image(image) -> np.ndarray:
    x = np.asarray(image, dtype=np.float64)
    if x.ndim != 2 or x.size == 0:
        raise DimensionError(f"expected a non-empty 2D array, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("image contains non-finite values")
    return x


def dft2(image, method: str = "auto") -> ComplexField:
    """Unnormalized forward 2D DFT.

    ``method`` is ``"direct"`` (summation against twiddle matrices, any size),
    ``"radix2"`` (power-of-two sizes only) or ``"auto"``.
    """
    x = _check_image(image)
    h, w = x.shape
    if method == "auto":
        method = "radix2" if _is_pow2(h) and _is_pow2(w) else "direct"
    if method == "radix2":
        if not (_is_pow2(h) and _is_pow2(w)):
            raise DimensionError(f"radix-2 path needs power-of-two sizes, got {h}x{w}")
        return ComplexField(_radix2(x.astype(np.complex128), inverse=False))
    if method == "direct":
        return ComplexField(_direct(x.astype(np.complex128), -1.0))
    raise ValueError(f"unknown method {method!r}")


def idft2(field: ComplexField | np.ndarray, method: str = "auto", return_residual: bool = False):
    """Inverse 2D DFT, returning the real part.

    With ``return_residual`` the max absolute imaginary part is returned too.
    """
    data = field.data if isinstance(field, ComplexField) else np.asarray(field, dtype=np.complex128)
    if data.ndim != 2 or data.size == 0:
        raise DimensionError(f"malformed field of shape {data.shape}")
    h, w = data.shape
    if method == "auto":
        method = "radix2" if _is_pow2(h) and _is_pow2(w) else "direct"
    if method == "radix2":
        z = _radix2(data.astype(np.complex128), inverse=True)
    elif method == "direct":
        z = _direct(data.astype(np.complex128), 1.0)
    else:
        raise ValueError(f"unknown method {method!r}")
    z = z / (h * w)
    if return_residual:
        return z.real.copy(), float(np.max(np.abs(z.imag)))
    return z.real.copy()


def embed_kernel(taps: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Place an odd m x m kernel into a zero array with its centre tap at (0, 0), wrapping the rest."""
    m = taps.shape[0]
    h, w = shape
    if m > min(h, w):
        raise DimensionError(f"kernel size {m} exceeds image size {h}x{w}")
    c = m // 2
    out = np.zeros(shape, dtype=np.float64)
    offs = np.arange(m) - c
    out[np.ix_(offs % h, offs % w)] = taps
    return out


def filter_spectral(image, kernel, method: str = "auto") -> np.ndarray:
    """Circular convolution of ``image`` with ``kernel`` via the convolution theorem."""
    x = _check_image(image)
    taps = np.asarray(getattr(kernel, "taps", kernel), dtype=np.float64)
    k = embed_kernel(taps, x.shape)
    # the kernel is symmetric, so correlation and convolution coincide
    prod = dft2(x, method).data * dft2(k, method).data
    return idft2(ComplexField(prod), method)


def radial_radius(h: int, w: int) -> np.ndarray:
    """Normalized radial frequency of every (u, v) after centering; 1.0 at the (Nyquist, Nyquist) corner."""
    fu = ((np.arange(h) + h // 2) % h - h // 2) / (h / 2)
    fv = ((np.arange(w) + w // 2) % w - w // 2) / (w / 2)
    return np.sqrt(fu[:, None] ** 2 + fv[None, :] ** 2) / math.sqrt(2.0)


def band_index(h: int, w: int, n_bands: int) -> tuple[np.ndarray, float]:
    r = radial_radius(h, w)
    r_max = float(r.max())
    if r_max == 0.0:
        return np.zeros((h, w), dtype=np.int64), 1.0
    idx = np.minimum((r / r_max * n_bands).astype(np.int64), n_bands - 1)
    return idx, r_max


def spectrum_stats(field: ComplexField | np.ndarray, n_bands: int) -> SpectrumStats:
    """Split |F|^2 into ``n_bands`` equal-width radial annuli around DC."""
    if n_bands < 1:
        raise ValueError("n_bands must be >= 1")
    data = field.data if isinstance(field, ComplexField) else np.asarray(field)
    h, w = data.shape
    power = np.abs(data) ** 2
    idx, r_max = band_index(h, w, n_bands)
    energies = np.bincount(idx.ravel(), weights=power.ravel(), minlength=n_bands)
    width = r_max / n_bands
    bands = [((b * width, (b + 1) * width), float(energies[b])) for b in range(n_bands)]
    return SpectrumStats(total_energy=float(power.sum()), band_energies=bands, dc_value=float(data[0, 0].real))


def low_band_share(image, n_bands: int = 3, low: int = 1) -> float:
    """Fraction of AC energy falling in the lowest ``low`` of ``n_bands`` radial bands."""
    f = dft2(image).data.copy()
    f[0, 0] = 0.0
    e = spectrum_stats(ComplexField(f), n_bands).energies()
    total = e.sum()
    return float(e[:low].sum() / total) if total > 0 else 1.0
