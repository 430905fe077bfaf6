"""Slow, obviously-correct reference convolutions.

These are deliberately unoptimized scalar loops with fixed accumulation
order: no blocking, no reassociation, no vectorization.  They are the
source of truth the packed engine is checked against, and the honest
"vanilla" semantics the benchmark baseline kernels must reproduce.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .binarize import BinaryWeightApprox, SignPlane
from .engine import IntOutputPlane
from .tensor import Tensor2, Tensor3


def _out_dims(h: int, w: int, kh: int, kw: int, pad: int) -> tuple[int, int]:
    if pad < 0:
        raise ValueError("pad must be >= 0")
    out_h = h + 2 * pad - kh + 1
    out_w = w + 2 * pad - kw + 1
    if out_h < 1 or out_w < 1:
        raise ValueError(f"kernel {kh}x{kw} larger than padded {h}x{w} input")
    return out_h, out_w


def conv2d_float(input: Tensor3, weights: Tensor3, pad: int = 0) -> Tensor2:
    """Full-precision cross-correlation, zero padding, unit stride."""
    if input.channels != weights.channels:
        raise ValueError(
            f"{input.channels} input channels vs {weights.channels} weight channels"
        )
    c, h, w = input.channels, input.height, input.width
    kh, kw = weights.height, weights.width
    out_h, out_w = _out_dims(h, w, kh, kw, pad)
    data = input.data.tolist()
    wdata = weights.data.tolist()
    out = np.empty((out_h, out_w))
    for y in range(out_h):
        for x in range(out_w):
            acc = 0.0
            for ch in range(c):
                for ky in range(kh):
                    iy = y + ky - pad
                    if not 0 <= iy < h:
                        continue
                    for kx in range(kw):
                        ix = x + kx - pad
                        if 0 <= ix < w:
                            acc += data[ch][iy][ix] * wdata[ch][ky][kx]
            out[y, x] = acc
    return Tensor2(out)


def sign_conv2d_int(
    input_signs: Sequence[SignPlane],
    weight_signs: Sequence[SignPlane],
    pad: int = 0,
) -> IntOutputPlane:
    """Integer cross-correlation of +-1 planes summed over channels.

    Padding pixels count as +1, matching the package convention that the
    real tensor is zero padded before sign extraction and sign(0) = +1.
    """
    if len(input_signs) != len(weight_signs):
        raise ValueError(
            f"{len(input_signs)} input channels vs {len(weight_signs)} weight channels"
        )
    h, w = input_signs[0].height, input_signs[0].width
    kh, kw = weight_signs[0].height, weight_signs[0].width
    out_h, out_w = _out_dims(h, w, kh, kw, pad)
    planes = [p.signs.tolist() for p in input_signs]
    wplanes = [p.signs.tolist() for p in weight_signs]
    out = np.empty((out_h, out_w), dtype=np.int32)
    for y in range(out_h):
        for x in range(out_w):
            acc = 0
            for ch in range(len(planes)):
                for ky in range(kh):
                    iy = y + ky - pad
                    row = planes[ch][iy] if 0 <= iy < h else None
                    for kx in range(kw):
                        ix = x + kx - pad
                        s = row[ix] if row is not None and 0 <= ix < w else 1
                        acc += s * wplanes[ch][ky][kx]
            out[y, x] = acc
    return IntOutputPlane(out)


def bwn_conv(input: Tensor3, w_approx: BinaryWeightApprox, pad: int = 0) -> Tensor2:
    """Convolution against +-1 weights (adds/subtracts only), times the scale."""
    if input.channels != len(w_approx.signs):
        raise ValueError(
            f"{input.channels} input channels vs {len(w_approx.signs)} weight channels"
        )
    c, h, w = input.channels, input.height, input.width
    kh, kw = w_approx.signs[0].height, w_approx.signs[0].width
    out_h, out_w = _out_dims(h, w, kh, kw, pad)
    data = input.data.tolist()
    wplanes = [p.signs.tolist() for p in w_approx.signs]
    out = np.empty((out_h, out_w))
    for y in range(out_h):
        for x in range(out_w):
            acc = 0.0
            for ch in range(c):
                for ky in range(kh):
                    iy = y + ky - pad
                    if not 0 <= iy < h:
                        continue
                    for kx in range(kw):
                        ix = x + kx - pad
                        if 0 <= ix < w:
                            if wplanes[ch][ky][kx] > 0:
                                acc += data[ch][iy][ix]
                            else:
                                acc -= data[ch][iy][ix]
            out[y, x] = acc * w_approx.scale
    return Tensor2(out)
