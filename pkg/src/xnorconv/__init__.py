"""Bit-packed XNOR convolution engine.

Sign binarization, word-tiled XNOR + popcount convolution, and
scale-factor reconstruction, next to a deliberately naive full-precision
reference and a benchmark CLI.  Hot kernels run in a compiled extension
when it is available and fall back to numpy otherwise; see
`compiled_available()`.
"""

from ._backend import DEFAULT_BACKEND, HAVE_COMPILED
from .binarize import (
    BinaryWeightApprox,
    SignPlane,
    combined_scale,
    sign_binarize,
    sign_plane,
)
from .engine import (
    BinaryFilter,
    GeometryMismatchError,
    IntOutputPlane,
    build_filter,
    popcount_to_signed,
    xnor_conv2d,
    xnor_conv_multichannel,
    xnor_tile,
)
from .pack import (
    OverlapMismatchError,
    PackedTileGrid,
    TileGeometry,
    pack,
    tile_grid_shape,
    unpack,
)
from .pipeline import ConvWorkspace, xnor_conv
from .scaling import (
    ScalingField,
    apply_scaling,
    box_kernel,
    input_scale_map,
    input_scaling_field,
)
from .tensor import (
    BadMagicError,
    DimensionOverflowError,
    Tensor2,
    Tensor3,
    TensorFileError,
    TruncatedPayloadError,
    channel_abs_mean,
    load_tensor,
    save_tensor,
    zero_pad,
)

__version__ = "0.1.0"


def compiled_available() -> bool:
    """True when the compiled kernel extension imported successfully."""
    return HAVE_COMPILED
