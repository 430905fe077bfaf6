"""Masked XNOR + popcount convolution over packed tiles.

The kernel window at output offset (dy, dx) inside a tile is aligned to
the top-left-anchored weight word with a single right shift by
``dy * tile_w + dx``; XOR then counts disagreements d inside the mask and
the signed window sum is ``k_area - 2 * d`` (equivalently, the popcount of
the masked XNOR p decoded as ``2 * p - k_area``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._backend import get_kernels
from .binarize import sign_binarize
from .pack import PackedTileGrid, TileGeometry, tile_grid_shape
from .tensor import Tensor3


class GeometryMismatchError(ValueError):
    """Grid, filter, and output dimensions are not mutually consistent."""


@dataclass(frozen=True)
class BinaryFilter:
    """Packed filter: one weight word per input channel, shared mask and scale.

    The kernel's sign bits sit at the tile's top-left placement; base_mask
    has 1-bits exactly there.
    """

    kernel_h: int
    kernel_w: int
    weight_words: np.ndarray
    base_mask: int
    scale: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "base_mask", int(self.base_mask))
        words = np.ascontiguousarray(self.weight_words, dtype=np.uint64)
        if words.ndim != 1 or words.size < 1:
            raise ValueError("weight_words must be a 1-d array, one per channel")
        if self.base_mask.bit_count() != self.kernel_h * self.kernel_w:
            raise ValueError("base_mask popcount must equal the kernel area")
        if any(int(wd) & ~self.base_mask for wd in words):
            raise ValueError("weight word has bits outside base_mask")
        if self.scale < 0:
            raise ValueError("scale must be >= 0")
        words.flags.writeable = False
        object.__setattr__(self, "weight_words", words)

    @property
    def channels(self) -> int:
        return int(self.weight_words.size)

    @property
    def k_area(self) -> int:
        return self.kernel_h * self.kernel_w


@dataclass(frozen=True)
class IntOutputPlane:
    """Signed integer window sums, range [-channels*k_area, +channels*k_area]."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.values, dtype=np.int32)
        if arr.ndim != 2:
            raise ValueError(f"expected 2-d values, got shape {arr.shape}")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def popcount_to_signed(p: int, k_area: int) -> int:
    """Signed sum of k_area agreement bits where 0-bits count as -1."""
    if not 0 <= p <= k_area:
        raise ValueError(f"popcount {p} outside [0, {k_area}]")
    return 2 * p - k_area


def placement_mask(geom: TileGeometry) -> int:
    """1-bits on the kernel's top-left placement within a tile."""
    mask = 0
    for r in range(geom.kernel_h):
        for c in range(geom.kernel_w):
            mask |= 1 << (r * geom.tile_w + c)
    return mask


def build_filter(weights: Tensor3, geom: TileGeometry) -> BinaryFilter:
    """Binarize one filter and pack its signs into per-channel weight words."""
    if (weights.height, weights.width) != (geom.kernel_h, geom.kernel_w):
        raise GeometryMismatchError(
            f"filter is {weights.height}x{weights.width}, geometry expects "
            f"{geom.kernel_h}x{geom.kernel_w}"
        )
    approx = sign_binarize(weights)
    words = np.zeros(weights.channels, dtype=np.uint64)
    for ch, plane in enumerate(approx.signs):
        word = 0
        for r in range(geom.kernel_h):
            for c in range(geom.kernel_w):
                if plane.signs[r, c] > 0:
                    word |= 1 << (r * geom.tile_w + c)
        words[ch] = word
    return BinaryFilter(
        geom.kernel_h, geom.kernel_w, words, placement_mask(geom), approx.scale
    )


def xnor_tile(
    image_word: int,
    filt: BinaryFilter,
    geom: TileGeometry,
    channel: int = 0,
) -> np.ndarray:
    """Signed window sums for one tile, shape (stride_y, stride_x).

    Plain-int reference path; the batched kernels below produce identical
    values for whole grids.
    """
    weight_word = int(filt.weight_words[channel])
    out = np.empty((geom.stride_y, geom.stride_x), dtype=np.int32)
    for dy in range(geom.stride_y):
        for dx in range(geom.stride_x):
            shifted = int(image_word) >> (dy * geom.tile_w + dx)
            disagreements = ((shifted ^ weight_word) & filt.base_mask).bit_count()
            out[dy, dx] = filt.k_area - 2 * disagreements
    return out


def _check_grid(grid: PackedTileGrid, filt: BinaryFilter, out_h: int, out_w: int) -> None:
    geom = grid.geometry
    if (geom.kernel_h, geom.kernel_w) != (filt.kernel_h, filt.kernel_w):
        raise GeometryMismatchError(
            f"grid geometry kernel {geom.kernel_h}x{geom.kernel_w} != filter "
            f"kernel {filt.kernel_h}x{filt.kernel_w}"
        )
    if tile_grid_shape(geom, out_h, out_w) != (grid.tiles_y, grid.tiles_x):
        raise GeometryMismatchError(
            f"{grid.tiles_y}x{grid.tiles_x} tiles inconsistent with "
            f"{out_h}x{out_w} outputs"
        )


def xnor_conv2d(
    grid: PackedTileGrid,
    filt: BinaryFilter,
    out_h: int,
    out_w: int,
    channel: int = 0,
    backend: str | None = None,
    threads: int = 1,
) -> IntOutputPlane:
    """Single-channel XNOR convolution of a packed grid."""
    _check_grid(grid, filt, out_h, out_w)
    geom = grid.geometry
    out = np.empty((out_h, out_w), dtype=np.int32)
    get_kernels(backend).xnor_accumulate(
        grid.words[np.newaxis],
        filt.weight_words[channel : channel + 1],
        filt.base_mask,
        geom.tile_w, geom.stride_y, geom.stride_x, filt.k_area, out, threads,
    )
    return IntOutputPlane(out)


def xnor_conv_multichannel(
    grids: Sequence[PackedTileGrid],
    filt: BinaryFilter,
    out_h: int,
    out_w: int,
    backend: str | None = None,
    threads: int = 1,
) -> IntOutputPlane:
    """XNOR convolution summed over input channels, fixed channel order."""
    if len(grids) != filt.channels:
        raise GeometryMismatchError(
            f"{len(grids)} input grids for a {filt.channels}-channel filter"
        )
    first = grids[0]
    for g in grids[1:]:
        if g.geometry != first.geometry or g.words.shape != first.words.shape:
            raise GeometryMismatchError("input grids disagree on geometry")
    _check_grid(first, filt, out_h, out_w)
    geom = first.geometry
    words = np.ascontiguousarray(np.stack([g.words for g in grids]))
    out = np.empty((out_h, out_w), dtype=np.int32)
    get_kernels(backend).xnor_accumulate(
        words, filt.weight_words, filt.base_mask,
        geom.tile_w, geom.stride_y, geom.stride_x, filt.k_area, out, threads,
    )
    return IntOutputPlane(out)
