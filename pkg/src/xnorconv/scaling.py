"""Real-valued reconstruction: per-pixel input scale map and final multiply.

The scale map is the channel-wise absolute mean convolved with a uniform
box kernel (zero padding, "same" extent as the convolution output); the
integer XNOR output is multiplied elementwise by the map and by the
filter's scale.  This path runs in full precision end to end and is
independent of the bit path until the final multiply.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import get_kernels
from .engine import IntOutputPlane
from .tensor import Tensor2, Tensor3, channel_abs_mean

# Box sums are evaluated as two separable fixed-order passes (row windows,
# then column windows), never as running sums, so results are identical
# for any thread count.


def box_kernel(k_h: int, k_w: int) -> Tensor2:
    """Uniform averaging kernel: every entry 1/(k_h*k_w)."""
    if k_h < 1 or k_w < 1:
        raise ValueError("kernel dimensions must be >= 1")
    return Tensor2(np.full((k_h, k_w), 1.0 / (k_h * k_w)))


def input_scale_map(
    mean_abs: Tensor2,
    kernel_h: int,
    kernel_w: int,
    pad: int,
    backend: str | None = None,
    threads: int = 1,
) -> Tensor2:
    """Box-filter the absolute-mean plane with zero padding.

    Output dims are (h + 2*pad - kernel_h + 1, w + 2*pad - kernel_w + 1),
    matching the convolution output when called with the same pad.
    """
    if pad < 0:
        raise ValueError("pad must be >= 0")
    out_h = mean_abs.height + 2 * pad - kernel_h + 1
    out_w = mean_abs.width + 2 * pad - kernel_w + 1
    if out_h < 1 or out_w < 1:
        raise ValueError("kernel larger than the padded plane")
    padded = np.pad(mean_abs.data, pad)
    tmp = np.empty((padded.shape[0], out_w))
    out = np.empty((out_h, out_w))
    get_kernels(backend).box_mean(
        padded, kernel_h, kernel_w, 1.0 / (kernel_h * kernel_w), tmp, out, threads
    )
    return Tensor2(out)


@dataclass(frozen=True)
class ScalingField:
    """Per-pixel input scale map plus the per-filter weight scale."""

    scale_map: Tensor2
    weight_scale: float

    def __post_init__(self) -> None:
        if (self.scale_map.data < 0).any():
            raise ValueError("scale map must be non-negative")
        if self.weight_scale < 0:
            raise ValueError("weight scale must be >= 0")


def input_scaling_field(
    t: Tensor3,
    kernel_h: int,
    kernel_w: int,
    pad: int,
    weight_scale: float,
    backend: str | None = None,
    threads: int = 1,
) -> ScalingField:
    """Scale field for an unpadded input tensor: abs mean, box filter."""
    mean_abs = channel_abs_mean(t)
    return ScalingField(
        input_scale_map(mean_abs, kernel_h, kernel_w, pad, backend, threads),
        weight_scale,
    )


def apply_scaling(ints: IntOutputPlane, field: ScalingField) -> Tensor2:
    """Elementwise integer-output * scale_map * weight_scale."""
    if (ints.height, ints.width) != (field.scale_map.height, field.scale_map.width):
        raise ValueError(
            f"output {ints.height}x{ints.width} vs scale map "
            f"{field.scale_map.height}x{field.scale_map.width}"
        )
    return Tensor2(ints.values * field.scale_map.data * field.weight_scale)
