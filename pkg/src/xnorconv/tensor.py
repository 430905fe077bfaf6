"""Dense tensor containers, padding, channel reductions, and fixture file I/O.

Tensors are stored channel-major then row-major, so a single channel image
is a contiguous 2-D slice.  Values live in float64 in memory; fixture files
store them as little-endian float32.

Fixture file layout: magic bytes ``BTSR``, three unsigned 32-bit
little-endian dims (channels, height, width), then channels*height*width
IEEE-754 binary32 little-endian values in channel-major row-major order.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"BTSR"

# Upper bound on element count accepted from a fixture header.
MAX_ELEMENTS = 1 << 31


class TensorFileError(ValueError):
    """Malformed fixture tensor file."""


class BadMagicError(TensorFileError):
    """File does not start with the fixture magic bytes."""


class DimensionOverflowError(TensorFileError):
    """Header dimensions exceed the supported element count."""


class TruncatedPayloadError(TensorFileError):
    """File ends before the declared payload is complete."""


def _validated(data: np.ndarray, ndim: int) -> np.ndarray:
    arr = np.ascontiguousarray(data, dtype=np.float64)
    if arr.ndim != ndim:
        raise ValueError(f"expected {ndim}-d data, got shape {arr.shape}")
    if any(s < 1 for s in arr.shape):
        raise ValueError(f"all dimensions must be >= 1, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("tensor values must be finite (no NaN/Inf)")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Tensor3:
    """Immutable (channels, height, width) tensor of finite reals."""

    data: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "data", _validated(self.data, 3))

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class Tensor2:
    """Immutable (height, width) matrix of finite reals."""

    data: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "data", _validated(self.data, 2))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


def zero_pad(t: Tensor3, pad: int) -> Tensor3:
    """Pad every channel with a `pad`-wide ring of zeros."""
    if pad < 0:
        raise ValueError("pad must be >= 0")
    if pad == 0:
        return t
    return Tensor3(np.pad(t.data, ((0, 0), (pad, pad), (pad, pad))))


def channel_abs_mean(t: Tensor3) -> Tensor2:
    """Per-pixel mean of absolute values across channels."""
    return Tensor2(np.abs(t.data).mean(axis=0))


def save_tensor(t: Tensor3, path: os.PathLike | str) -> None:
    """Write `t` to a fixture file (float32 payload)."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", t.channels, t.height, t.width))
        fh.write(np.ascontiguousarray(t.data, dtype="<f4").tobytes())


def load_tensor(path: os.PathLike | str) -> Tensor3:
    """Read a fixture file back into a Tensor3.

    Raises BadMagicError, DimensionOverflowError or TruncatedPayloadError
    for the corresponding kinds of malformed files.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < len(MAGIC):
        raise TruncatedPayloadError("file shorter than magic")
    if raw[: len(MAGIC)] != MAGIC:
        raise BadMagicError(f"bad magic {raw[:len(MAGIC)]!r}, expected {MAGIC!r}")
    header_end = len(MAGIC) + 12
    if len(raw) < header_end:
        raise TruncatedPayloadError("file shorter than header")
    channels, height, width = struct.unpack("<III", raw[len(MAGIC) : header_end])
    count = channels * height * width
    if count > MAX_ELEMENTS:
        raise DimensionOverflowError(
            f"{channels}x{height}x{width} exceeds {MAX_ELEMENTS} elements"
        )
    payload = raw[header_end:]
    if len(payload) < 4 * count:
        raise TruncatedPayloadError(
            f"payload holds {len(payload)} bytes, need {4 * count}"
        )
    values = np.frombuffer(payload[: 4 * count], dtype="<f4")
    return Tensor3(values.astype(np.float64).reshape(channels, height, width))
