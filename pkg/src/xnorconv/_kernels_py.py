"""Numpy fallback kernels.

Mirrors the compiled extension's interface: every function fills a caller
provided output array and returns None.  Multi-threading splits work into
disjoint row bands; each output element is computed in a fixed order that
does not depend on the banding, so results are bit-identical for any
thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)


def _popcount_swar(x: np.ndarray) -> np.ndarray:
    x = x - ((x >> np.uint64(1)) & _M1)
    x = (x & _M2) + ((x >> np.uint64(2)) & _M2)
    x = (x + (x >> np.uint64(4))) & _M4
    return (x * _H01) >> np.uint64(56)


_popcount = getattr(np, "bitwise_count", _popcount_swar)


def _run_banded(fn, n_rows: int, threads: int) -> None:
    parts = max(1, min(threads, n_rows))
    if parts == 1:
        fn(0, n_rows)
        return
    step = -(-n_rows // parts)
    bands = [(i, min(i + step, n_rows)) for i in range(0, n_rows, step)]
    with ThreadPoolExecutor(max_workers=len(bands)) as pool:
        for f in [pool.submit(fn, b0, b1) for b0, b1 in bands]:
            f.result()


def pack_plane(plane, tiles_y, tiles_x, tile_h, tile_w,
               stride_y, stride_x, out_words, threads) -> None:
    """Pack sign bits (value >= 0) of a 2-D plane into overlapping tiles."""
    h, w = plane.shape
    cov_h = (tiles_y - 1) * stride_y + tile_h
    cov_w = (tiles_x - 1) * stride_x + tile_w
    bits = np.zeros((cov_h, cov_w), dtype=np.uint8)
    bits[: min(h, cov_h), : min(w, cov_w)] = plane[:cov_h, :cov_w] >= 0
    windows = sliding_window_view(bits, (tile_h, tile_w))[::stride_y, ::stride_x]
    word_bits = tile_h * tile_w

    def band(t0, t1):
        flat = windows[t0:t1].reshape(t1 - t0, tiles_x, word_bits)
        packed = np.packbits(flat, axis=-1, bitorder="little")
        if word_bits == 64:
            out_words[t0:t1] = packed.view("<u8").reshape(t1 - t0, tiles_x)
        else:
            out_words[t0:t1] = packed.view("<u4").reshape(t1 - t0, tiles_x)

    _run_banded(band, tiles_y, threads)


def xnor_accumulate(words, weight_words, mask, tile_w, stride_y, stride_x,
                    k_area, out, threads) -> None:
    """Channel-summed XNOR decode of packed tiles into a signed int plane."""
    channels, tiles_y, tiles_x = words.shape
    out_h, out_w = out.shape
    mask_w = np.uint64(mask)
    ww = weight_words.reshape(channels, 1, 1)

    def band(t0, t1):
        wb = words[:, t0:t1]
        ob = out[t0 * stride_y : min(t1 * stride_y, out_h)]
        for dy in range(stride_y):
            for dx in range(stride_x):
                shift = np.uint64(dy * tile_w + dx)
                diff = ((wb >> shift) ^ ww) & mask_w
                disagreements = _popcount(diff).astype(np.int64)
                vals = (k_area - 2 * disagreements).sum(axis=0)
                target = ob[dy::stride_y, dx::stride_x]
                target[:] = vals[: target.shape[0], : target.shape[1]]

    _run_banded(band, tiles_y, threads)


def vanilla_conv(padded, weights, out, threads) -> None:
    """Direct convolution of a pre-padded tensor with one filter.

    Plain shifted multiply-adds in fixed (channel, ky, kx) order; no im2col
    and no FFT.  Arithmetic follows the array dtype.
    """
    channels, kh, kw = weights.shape
    out_h, out_w = out.shape

    def band(y0, y1):
        ob = out[y0:y1]
        ob.fill(0.0)
        for ch in range(channels):
            for ky in range(kh):
                for kx in range(kw):
                    ob += padded[ch, y0 + ky : y1 + ky, kx : kx + out_w] \
                        * weights[ch, ky, kx]

    _run_banded(band, out_h, threads)


def box_mean(a, kh, kw, scale, tmp, out, threads) -> None:
    """Valid-mode box filter times `scale`, separable two-pass sums.

    Each output is an independent fixed-order sum (no running windows), so
    the result does not depend on the banding.
    """
    tmp_w = tmp.shape[1]

    def rows(y0, y1):
        tb = tmp[y0:y1]
        tb[:] = a[y0:y1, 0:tmp_w]
        for d in range(1, kw):
            tb += a[y0:y1, d : d + tmp_w]

    _run_banded(rows, tmp.shape[0], threads)

    def cols(y0, y1):
        ob = out[y0:y1]
        ob[:] = tmp[y0:y1]
        for d in range(1, kh):
            ob += tmp[y0 + d : y1 + d]
        ob *= scale

    _run_banded(cols, out.shape[0], threads)


def scale_rows(padded, kw, tmp, threads) -> None:
    """Fused channel abs-mean + row window sums:
    tmp[y, x] = sum_{d<kw} mean_ch |padded[ch, y, x+d]|."""
    channels = padded.shape[0]
    tmp_w = tmp.shape[1]
    inv = 1.0 / channels

    def band(y0, y1):
        mean = np.abs(padded[0, y0:y1])
        for ch in range(1, channels):
            mean += np.abs(padded[ch, y0:y1])
        mean *= inv
        tb = tmp[y0:y1]
        tb[:] = mean[:, 0:tmp_w]
        for d in range(1, kw):
            tb += mean[:, d : d + tmp_w]

    _run_banded(band, tmp.shape[0], threads)


def scale_join(tmp, ints, kh, scale, weight_scale, out, threads) -> None:
    """Fused column window sums + elementwise reconstruction:
    out[y, x] = ints[y, x] * (sum_{d<kh} tmp[y+d, x] * scale) * weight_scale."""
    def band(y0, y1):
        ob = out[y0:y1]
        ob[:] = tmp[y0:y1]
        for d in range(1, kh):
            ob += tmp[y0 + d : y1 + d]
        ob *= scale
        np.multiply(ints[y0:y1], ob, out=ob, casting="unsafe")
        ob *= weight_scale

    _run_banded(band, out.shape[0], threads)


def xnor_reconstruct(weight_words, mask, tile_h, tile_w, stride_y, stride_x,
                     k_area, padded, kh, kw, scale, weight_scale, out,
                     threads) -> None:
    """Fused pack + XNOR decode + scale reconstruction.

    The compiled version runs this as one streaming pass; here it is the
    plain composition of the split kernels, which produces identical bits.
    """
    channels = padded.shape[0]
    out_h, out_w = out.shape
    tiles_y = -(-out_h // stride_y)
    tiles_x = -(-out_w // stride_x)
    words = np.empty((channels, tiles_y, tiles_x), dtype=np.uint64)
    for ch in range(channels):
        pack_plane(padded[ch], tiles_y, tiles_x, tile_h, tile_w,
                   stride_y, stride_x, words[ch], threads)
    tmp = np.empty((padded.shape[1], out_w), dtype=padded.dtype)
    scale_rows(padded, kw, tmp, threads)
    ints = np.empty(out.shape, dtype=np.int32)
    xnor_accumulate(words, weight_words, mask, tile_w, stride_y, stride_x,
                    k_area, ints, threads)
    scale_join(tmp, ints, kh, scale, weight_scale, out, threads)
