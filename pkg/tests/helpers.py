"""Shared test utilities: independent oracles and data builders.

The oracles here are deliberately written with different loop structures
than the library code they check.
"""

from __future__ import annotations

import numpy as np

from xnorconv._backend import HAVE_COMPILED

BACKENDS = ["python"] + (["compiled"] if HAVE_COMPILED else [])


def f32_tensor(rng, shape, lo=-1.0, hi=1.0):
    """Random float64 array whose values are exactly float32-representable."""
    return rng.uniform(lo, hi, shape).astype(np.float32).astype(np.float64)


def rel_err(got, want):
    got = np.asarray(got, dtype=np.float64)
    want = np.asarray(want, dtype=np.float64)
    denom = max(float(np.abs(want).max()), 1e-30)
    return float(np.abs(got - want).max()) / denom


def conv_padded_loop(data, weights, pad):
    """Second, independently coded direct convolution: materializes the
    zero-padded array first, accumulates in (ch, ky, kx, y, x) order."""
    c, h, w = data.shape
    _, kh, kw = weights.shape
    padded = np.zeros((c, h + 2 * pad, w + 2 * pad))
    padded[:, pad : pad + h, pad : pad + w] = data
    out_h = h + 2 * pad - kh + 1
    out_w = w + 2 * pad - kw + 1
    out = np.zeros((out_h, out_w))
    for ch in range(c):
        for ky in range(kh):
            for kx in range(kw):
                for y in range(out_h):
                    for x in range(out_w):
                        out[y, x] += padded[ch, y + ky, x + kx] * weights[ch, ky, kx]
    return out


def window_sign_dot(plane_signs, weight_signs, y, x):
    """Signed agreement sum of one kernel window at (y, x)."""
    kh, kw = weight_signs.shape
    total = 0
    for r in range(kh):
        for c in range(kw):
            total += int(plane_signs[y + r, x + c]) * int(weight_signs[r, c])
    return total


def placement_count(out: int, stride: int) -> int:
    """Brute-force number of stride-spaced tile placements covering `out`
    output positions (each placement owns the next `stride` positions)."""
    count = 0
    origin = 0
    while origin < out:
        count += 1
        origin += stride
    return count


def assert_parity_bounds(values, channels, k_area):
    """Every XNOR output has the parity of channels*k_area and magnitude
    at most channels*k_area."""
    vals = np.asarray(values)
    bound = channels * k_area
    assert (np.abs(vals) <= bound).all(), "magnitude bound violated"
    assert (vals % 2 == (bound % 2)).all(), "parity violated"
