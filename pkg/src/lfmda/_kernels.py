"""Hot numeric loops, jitted with numba when available.

Every kernel has a pure-numpy twin. The numba path is used unless numba is
missing or ``LFM_DISABLE_NUMBA=1`` is set in the environment before import.
Both paths are deterministic (fixed reduction order); they are not required
to agree bit-for-bit with each other, only to within rounding.
"""

import os

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    _HAVE_NUMBA = False

USE_NUMBA = _HAVE_NUMBA and os.environ.get("LFM_DISABLE_NUMBA", "0") not in ("1", "true", "yes")


def _njit(fn):
    if not _HAVE_NUMBA:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


# ---------------------------------------------------------------------------
# depthwise (single-kernel) strided correlation on padded planes
# ---------------------------------------------------------------------------


@_njit
def _plane_corr_nb(xp, k, stride, ho, wo):
    p = xp.shape[0]
    m = k.shape[0]
    out = np.zeros((p, ho, wo), dtype=xp.dtype)
    for n in range(p):
        for i in range(ho):
            r0 = i * stride
            for j in range(wo):
                c0 = j * stride
                acc = 0.0
                for a in range(m):
                    for b in range(m):
                        acc += k[a, b] * xp[n, r0 + a, c0 + b]
                out[n, i, j] = acc
    return out


@_njit
def _plane_corr_T_nb(g, k, stride, hp, wp):
    p, ho, wo = g.shape
    m = k.shape[0]
    out = np.zeros((p, hp, wp), dtype=g.dtype)
    for n in range(p):
        for i in range(ho):
            r0 = i * stride
            for j in range(wo):
                c0 = j * stride
                gv = g[n, i, j]
                for a in range(m):
                    for b in range(m):
                        out[n, r0 + a, c0 + b] += k[a, b] * gv
    return out


def _plane_corr_np(xp, k, stride, ho, wo):
    m = k.shape[0]
    win = sliding_window_view(xp, (m, m), axis=(1, 2))[:, ::stride, ::stride][:, :ho, :wo]
    return np.einsum("pijab,ab->pij", win, k)


def _plane_corr_T_np(g, k, stride, hp, wp):
    p, ho, wo = g.shape
    m = k.shape[0]
    out = np.zeros((p, hp, wp), dtype=g.dtype)
    for a in range(m):
        for b in range(m):
            out[:, a : a + stride * (ho - 1) + 1 : stride, b : b + stride * (wo - 1) + 1 : stride] += k[a, b] * g
    return out


def plane_correlate(xp, k, stride, ho, wo):
    """Valid correlation of each padded plane in ``xp`` (P, Hp, Wp) with ``k``, sampled every ``stride``."""
    xp = np.ascontiguousarray(xp)
    k = np.ascontiguousarray(k, dtype=xp.dtype)
    if USE_NUMBA:
        return _plane_corr_nb(xp, k, stride, ho, wo)
    return _plane_corr_np(xp, k, stride, ho, wo)


def plane_correlate_T(g, k, stride, hp, wp):
    """Adjoint of :func:`plane_correlate` with respect to the padded input."""
    g = np.ascontiguousarray(g)
    k = np.ascontiguousarray(k, dtype=g.dtype)
    if USE_NUMBA:
        return _plane_corr_T_nb(g, k, stride, hp, wp)
    return _plane_corr_T_np(g, k, stride, hp, wp)


# ---------------------------------------------------------------------------
# dense multi-channel convolution (cross-correlation) on padded input
# ---------------------------------------------------------------------------


@_njit
def _im2col_nb(xp, kh, kw, stride, ho, wo):
    n_b, c_in = xp.shape[0], xp.shape[1]
    cols = np.empty((n_b * ho * wo, c_in * kh * kw), dtype=xp.dtype)
    for n in range(n_b):
        for i in range(ho):
            for j in range(wo):
                row = (n * ho + i) * wo + j
                col = 0
                for ci in range(c_in):
                    for a in range(kh):
                        for c in range(kw):
                            cols[row, col] = xp[n, ci, i * stride + a, j * stride + c]
                            col += 1
    return cols


@_njit
def _col2im_nb(dcols, shape, kh, kw, stride, ho, wo):
    n_b, c_in = shape[0], shape[1]
    dxp = np.zeros(shape, dtype=dcols.dtype)
    for n in range(n_b):
        for i in range(ho):
            for j in range(wo):
                row = (n * ho + i) * wo + j
                col = 0
                for ci in range(c_in):
                    for a in range(kh):
                        for c in range(kw):
                            dxp[n, ci, i * stride + a, j * stride + c] += dcols[row, col]
                            col += 1
    return dxp


@_njit
def _conv_fwd_nb(xp, w, b, stride, ho, wo):
    n_b = xp.shape[0]
    c_out, kh, kw = w.shape[0], w.shape[2], w.shape[3]
    cols = _im2col_nb(xp, kh, kw, stride, ho, wo)
    out = np.dot(cols, np.ascontiguousarray(w.reshape(c_out, -1).T))
    res = np.empty((n_b, c_out, ho, wo), dtype=xp.dtype)
    for n in range(n_b):
        for i in range(ho):
            for j in range(wo):
                row = (n * ho + i) * wo + j
                for co in range(c_out):
                    res[n, co, i, j] = out[row, co] + b[co]
    return res


@_njit
def _conv_bwd_nb(xp, w, gout, stride):
    n_b = xp.shape[0]
    c_out, kh, kw = w.shape[0], w.shape[2], w.shape[3]
    ho, wo = gout.shape[2], gout.shape[3]
    cols = _im2col_nb(xp, kh, kw, stride, ho, wo)
    g2 = np.empty((n_b * ho * wo, c_out), dtype=gout.dtype)
    db = np.zeros(c_out, dtype=gout.dtype)
    for n in range(n_b):
        for i in range(ho):
            for j in range(wo):
                row = (n * ho + i) * wo + j
                for co in range(c_out):
                    g2[row, co] = gout[n, co, i, j]
                    db[co] += gout[n, co, i, j]
    dw = np.dot(np.ascontiguousarray(g2.T), cols).reshape(w.shape)
    dcols = np.dot(g2, np.ascontiguousarray(w.reshape(c_out, -1)))
    dxp = _col2im_nb(dcols, xp.shape, kh, kw, stride, ho, wo)
    return dxp, dw, db


def _conv_fwd_np(xp, w, b, stride, ho, wo):
    kh, kw = w.shape[2], w.shape[3]
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :ho, :wo]
    out = np.tensordot(win, w, axes=([1, 4, 5], [1, 2, 3]))  # (N, ho, wo, Cout)
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2)) + b[None, :, None, None]


def _conv_bwd_np(xp, w, gout, stride):
    kh, kw = w.shape[2], w.shape[3]
    ho, wo = gout.shape[2], gout.shape[3]
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :ho, :wo]
    dw = np.tensordot(gout, win, axes=([0, 2, 3], [0, 2, 3]))
    db = gout.sum(axis=(0, 2, 3))
    dxp = np.zeros_like(xp)
    for a in range(kh):
        for c in range(kw):
            contrib = np.tensordot(gout, w[:, :, a, c], axes=([1], [0]))  # (N, ho, wo, Cin)
            dxp[:, :, a : a + stride * (ho - 1) + 1 : stride, c : c + stride * (wo - 1) + 1 : stride] += (
                contrib.transpose(0, 3, 1, 2)
            )
    return dxp, dw, db


def conv_forward(xp, w, b, stride, ho, wo):
    """Cross-correlate padded batch ``xp`` (N, Cin, Hp, Wp) with ``w`` (Cout, Cin, kh, kw) plus bias."""
    xp = np.ascontiguousarray(xp)
    w = np.ascontiguousarray(w, dtype=xp.dtype)
    b = np.ascontiguousarray(b, dtype=xp.dtype)
    if USE_NUMBA:
        return _conv_fwd_nb(xp, w, b, stride, ho, wo)
    return _conv_fwd_np(xp, w, b, stride, ho, wo)


def conv_backward(xp, w, gout, stride):
    """Gradients of :func:`conv_forward` w.r.t. the padded input, weights and bias."""
    xp = np.ascontiguousarray(xp)
    w = np.ascontiguousarray(w, dtype=xp.dtype)
    gout = np.ascontiguousarray(gout, dtype=xp.dtype)
    if USE_NUMBA:
        return _conv_bwd_nb(xp, w, gout, stride)
    return _conv_bwd_np(xp, w, gout, stride)


# ---------------------------------------------------------------------------
# radix-2 FFT along the last axis
# ---------------------------------------------------------------------------


@_njit
def _fft_rows_nb(x, inverse):
    rows, n = x.shape
    out = x.copy()
    # bit-reversal permutation
    j = 0
    for i in range(1, n):
        bit = n >> 1
        while j & bit:
            j ^= bit
            bit >>= 1
        j |= bit
        if i < j:
            for r in range(rows):
                t = out[r, i]
                out[r, i] = out[r, j]
                out[r, j] = t
    sign = 1.0 if inverse else -1.0
    length = 2
    while length <= n:
        half = length // 2
        for k in range(half):
            ang = sign * 2.0 * np.pi * k / length
            wr = np.cos(ang)
            wi = np.sin(ang)
            w = complex(wr, wi)
            for start in range(0, n, length):
                for r in range(rows):
                    u = out[r, start + k]
                    v = out[r, start + k + half] * w
                    out[r, start + k] = u + v
                    out[r, start + k + half] = u - v
        length *= 2
    return out


def _bitrev(n):
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def _fft_rows_np(x, inverse):
    rows, n = x.shape
    out = x[:, _bitrev(n)].copy()
    sign = 1.0 if inverse else -1.0
    length = 2
    while length <= n:
        half = length // 2
        k = np.arange(half)
        w = np.exp(sign * 2j * np.pi * k / length)
        blocks = out.reshape(rows, n // length, length)
        u = blocks[:, :, :half].copy()
        v = blocks[:, :, half:] * w
        blocks[:, :, :half] = u + v
        blocks[:, :, half:] = u - v
        length *= 2
    return out


def fft_rows(x, inverse=False):
    """Unnormalized radix-2 DFT of every row of a 2D complex array (row length a power of two)."""
    x = np.ascontiguousarray(x, dtype=np.complex128)
    if USE_NUMBA:
        return _fft_rows_nb(x, inverse)
    return _fft_rows_np(x, inverse)
