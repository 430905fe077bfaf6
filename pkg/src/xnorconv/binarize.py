"""Sign binarization with closed-form scale factors.

A real tensor is approximated by elementwise signs times a scalar scale;
the optimal scale for a fixed sign pattern is the mean absolute value.
sign(0) is defined as +1 throughout the package so that the packed bit
mapping (1 bit for +1, 0 bit for -1) has no special case.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor2, Tensor3


@dataclass(frozen=True)
class SignPlane:
    """A (height, width) plane whose entries are exactly +1 or -1."""

    signs: np.ndarray

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.signs, dtype=np.int8)
        if arr.ndim != 2:
            raise ValueError(f"expected 2-d signs, got shape {arr.shape}")
        if not np.isin(arr, (-1, 1)).all():
            raise ValueError("sign plane entries must be +1 or -1")
        arr.flags.writeable = False
        object.__setattr__(self, "signs", arr)

    @property
    def height(self) -> int:
        return self.signs.shape[0]

    @property
    def width(self) -> int:
        return self.signs.shape[1]


@dataclass(frozen=True)
class BinaryWeightApprox:
    """Per-channel sign planes plus one non-negative scale for the filter."""

    signs: tuple[SignPlane, ...]
    scale: float

    def __post_init__(self) -> None:
        if not self.signs:
            raise ValueError("at least one channel required")
        if self.scale < 0:
            raise ValueError("scale must be >= 0")


def _signs_of(arr: np.ndarray) -> np.ndarray:
    return np.where(arr >= 0, 1, -1).astype(np.int8)


def sign_plane(x: Tensor2) -> SignPlane:
    """Elementwise sign with sign(0) = +1."""
    return SignPlane(_signs_of(x.data))


def sign_binarize(w: Tensor3) -> BinaryWeightApprox:
    """Binarize a filter: per-channel signs and the mean-absolute-value scale.

    The scale is accumulated sequentially in index order so the result is
    bit-identical regardless of thread count or backend.
    """
    planes = tuple(SignPlane(_signs_of(ch)) for ch in w.data)
    total = 0.0
    for v in w.data.ravel().tolist():
        total += abs(v)
    return BinaryWeightApprox(planes, total / w.data.size)


def combined_scale(weight_scale: float, input_scale: float) -> float:
    """Product of the two independent scale factors (weights x inputs)."""
    if weight_scale < 0 or input_scale < 0:
        raise ValueError("scale factors must be >= 0")
    return weight_scale * input_scale
