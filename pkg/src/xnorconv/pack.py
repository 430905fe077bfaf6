"""Tiling of sign planes into overlapping machine words.

Tile layout
-----------
A tile is ``tile_h`` rows by ``tile_w`` columns of sign bits held in one
unsigned word: bit ``r * tile_w + c`` (bit 0 = least significant) is the
pixel at tile-relative (row r, col c), 1 for +1 and 0 for -1.  Tile
origins step by ``stride = tile - kernel + 1`` per axis, so neighboring
tiles overlap by ``kernel - 1`` pixels and every kernel-sized window of
the convolution output lies entirely inside one tile.  Each tile is
responsible for the ``stride_y x stride_x`` block of output positions at
its origin; tail tiles past the plane edge are zero-filled (-1 bits) and
their out-of-range outputs are discarded by the decode stage.

64-bit words hold 8x8 tiles, 32-bit words hold 8 rows x 4 columns.
Words are stored in uint64 arrays for both sizes; in 32-bit mode the
upper 32 bits are always zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import get_kernels
from .binarize import SignPlane

# word_bits -> (tile_h, tile_w)
TILE_SHAPES = {64: (8, 8), 32: (8, 4)}


class OverlapMismatchError(ValueError):
    """Two tiles disagree on a shared pixel (packer bug or corrupt grid)."""


@dataclass(frozen=True)
class TileGeometry:
    """Word size plus kernel extent; fixes tile shape and output strides."""

    word_bits: int
    kernel_h: int
    kernel_w: int

    def __post_init__(self) -> None:
        if self.word_bits not in TILE_SHAPES:
            raise ValueError(f"word_bits must be one of {sorted(TILE_SHAPES)}")
        th, tw = TILE_SHAPES[self.word_bits]
        if not (1 <= self.kernel_h <= th and 1 <= self.kernel_w <= tw):
            raise ValueError(
                f"kernel {self.kernel_h}x{self.kernel_w} does not fit a "
                f"{th}x{tw} tile"
            )

    @property
    def tile_h(self) -> int:
        return TILE_SHAPES[self.word_bits][0]

    @property
    def tile_w(self) -> int:
        return TILE_SHAPES[self.word_bits][1]

    @property
    def stride_y(self) -> int:
        return self.tile_h - self.kernel_h + 1

    @property
    def stride_x(self) -> int:
        return self.tile_w - self.kernel_w + 1


@dataclass(frozen=True)
class PackedTileGrid:
    """One word per tile, (tiles_y, tiles_x) row-major."""

    geometry: TileGeometry
    words: np.ndarray

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.words, dtype=np.uint64)
        if arr.ndim != 2:
            raise ValueError(f"expected 2-d words, got shape {arr.shape}")
        arr.flags.writeable = False
        object.__setattr__(self, "words", arr)

    @property
    def tiles_y(self) -> int:
        return self.words.shape[0]

    @property
    def tiles_x(self) -> int:
        return self.words.shape[1]


def tile_grid_shape(geom: TileGeometry, out_h: int, out_w: int) -> tuple[int, int]:
    """Number of tiles (tiles_y, tiles_x) covering an out_h x out_w output."""
    if out_h < 1 or out_w < 1:
        raise ValueError("output dimensions must be >= 1")
    return (
        -(-out_h // geom.stride_y),
        -(-out_w // geom.stride_x),
    )


def pack(signs: SignPlane, geom: TileGeometry, backend: str | None = None) -> PackedTileGrid:
    """Pack an (already padded) sign plane into overlapping tiles."""
    out_h = signs.height - geom.kernel_h + 1
    out_w = signs.width - geom.kernel_w + 1
    if out_h < 1 or out_w < 1:
        raise ValueError(
            f"plane {signs.height}x{signs.width} smaller than kernel "
            f"{geom.kernel_h}x{geom.kernel_w}"
        )
    tiles_y, tiles_x = tile_grid_shape(geom, out_h, out_w)
    words = np.empty((tiles_y, tiles_x), dtype=np.uint64)
    get_kernels(backend).pack_plane(
        signs.signs, tiles_y, tiles_x, geom.tile_h, geom.tile_w,
        geom.stride_y, geom.stride_x, words, 1,
    )
    return PackedTileGrid(geom, words)


def unpack(grid: PackedTileGrid, height: int, width: int) -> SignPlane:
    """Invert pack on the in-image region, checking overlap consistency.

    Raises OverlapMismatchError if two tiles disagree on a shared pixel.
    """
    geom = grid.geometry
    cov_h = (grid.tiles_y - 1) * geom.stride_y + geom.tile_h
    cov_w = (grid.tiles_x - 1) * geom.stride_x + geom.tile_w
    if height > cov_h or width > cov_w:
        raise ValueError(f"grid covers only {cov_h}x{cov_w}, asked {height}x{width}")

    word_bits = geom.word_bits
    as_bytes = grid.words.astype("<u8").reshape(-1, 1).view(np.uint8)[:, : word_bits // 8]
    bits = np.unpackbits(as_bytes, axis=1, bitorder="little")
    tiles = bits.reshape(grid.tiles_y, grid.tiles_x, geom.tile_h, geom.tile_w)

    seen = np.zeros((cov_h, cov_w), dtype=bool)
    plane = np.zeros((cov_h, cov_w), dtype=np.uint8)
    for ty in range(grid.tiles_y):
        oy = ty * geom.stride_y
        for tx in range(grid.tiles_x):
            ox = tx * geom.stride_x
            region = (slice(oy, oy + geom.tile_h), slice(ox, ox + geom.tile_w))
            tile = tiles[ty, tx]
            overlap = seen[region]
            if (plane[region][overlap] != tile[overlap]).any():
                raise OverlapMismatchError(
                    f"tile ({ty}, {tx}) disagrees with a neighbor on shared pixels"
                )
            plane[region] = tile
            seen[region] = True
    return SignPlane(np.where(plane[:height, :width] == 1, 1, -1).astype(np.int8))
