"""Randomized equivalence checks between the packed engine and the naive
reference, plus full-pipeline decomposition checks.

Used by the `verify` CLI subcommand and by the acceptance suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .binarize import sign_binarize, sign_plane
from .engine import build_filter, xnor_conv_multichannel
from .pack import TileGeometry, pack
from .pipeline import ConvWorkspace
from .reference import conv2d_float, sign_conv2d_int
from .scaling import box_kernel
from .tensor import Tensor2, Tensor3, channel_abs_mean, zero_pad


@dataclass
class VerifyResult:
    engine_checked: int = 0
    pipeline_checked: int = 0
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def _random_instance(rng, word_bits: int):
    kernel = int(rng.choice([1, 3]))
    geom = TileGeometry(word_bits, kernel, kernel)
    channels = int(rng.integers(1, 5))
    h = int(rng.integers(8, 65))
    w = int(rng.integers(8, 65))
    return geom, channels, h, w


def check_engine_instances(
    count: int,
    seed: int = 0,
    word_bits: tuple[int, ...] = (64, 32),
    backend: str | None = None,
    result: VerifyResult | None = None,
) -> VerifyResult:
    """Packed XNOR output must equal the scalar sign convolution, exactly."""
    res = result if result is not None else VerifyResult()
    rng = np.random.default_rng(seed)
    for i in range(count):
        geom, channels, h, w = _random_instance(rng, word_bits[i % len(word_bits)])
        signs = [
            sign_plane(Tensor2(rng.uniform(-1, 1, (h, w))))
            for _ in range(channels)
        ]
        weights = Tensor3(rng.uniform(-1, 1, (channels, geom.kernel_h, geom.kernel_w)))
        filt = build_filter(weights, geom)
        out_h, out_w = h - geom.kernel_h + 1, w - geom.kernel_w + 1

        grids = [pack(s, geom, backend) for s in signs]
        got = xnor_conv_multichannel(grids, filt, out_h, out_w, backend)
        approx = sign_binarize(weights)
        want = sign_conv2d_int(signs, approx.signs, pad=0)
        res.engine_checked += 1
        if not np.array_equal(got.values, want.values):
            res.failures.append(
                f"engine instance {i}: word_bits={geom.word_bits} "
                f"c={channels} {h}x{w} k={geom.kernel_h} mismatch"
            )
        # Each channel term has the parity of k_area, so the c-channel sum
        # has the parity of c * k_area.
        k_area = geom.kernel_h * geom.kernel_w
        bound = channels * k_area
        vals = got.values
        if (vals % 2 != (channels * k_area) % 2).any() or (np.abs(vals) > bound).any():
            res.failures.append(f"engine instance {i}: parity/bound violation")
    return res


def check_pipeline_instances(
    count: int,
    seed: int = 1,
    word_bits: tuple[int, ...] = (64,),
    backend: str | None = None,
    rel_tol: float = 1e-5,
    result: VerifyResult | None = None,
) -> VerifyResult:
    """Pipeline output must match the all-naive decomposition:
    sign convolution x box-filtered abs mean x weight scale."""
    res = result if result is not None else VerifyResult()
    rng = np.random.default_rng(seed)
    for i in range(count):
        wb = word_bits[i % len(word_bits)]
        kernel = 3 if wb == 64 and rng.integers(0, 2) else 1
        pad = (kernel - 1) // 2
        channels = int(rng.integers(1, 4))
        h = int(rng.integers(8, 33))
        w = int(rng.integers(8, 33))
        inp = Tensor3(rng.uniform(-1, 1, (channels, h, w)))
        wts = Tensor3(rng.uniform(-1, 1, (channels, kernel, kernel)))

        ws = ConvWorkspace(channels, h, w, kernel, kernel, pad, wb, backend)
        ws.set_weights(wts)
        ws.load_input(inp)
        got = ws.run(threads=1).copy()
        ws.close()

        padded = zero_pad(inp, pad)
        in_signs = [sign_plane(Tensor2(ch)) for ch in padded.data]
        approx = sign_binarize(wts)
        ints = sign_conv2d_int(in_signs, approx.signs, pad=0)
        mean_abs = channel_abs_mean(inp)
        scale_map = conv2d_float(
            Tensor3(mean_abs.data[np.newaxis]),
            Tensor3(box_kernel(kernel, kernel).data[np.newaxis]),
            pad,
        )
        want = ints.values * scale_map.data * approx.scale

        res.pipeline_checked += 1
        denom = max(float(np.abs(want).max()), 1e-30)
        err = float(np.abs(got - want).max()) / denom
        if err > rel_tol:
            res.failures.append(
                f"pipeline instance {i}: c={channels} {h}x{w} k={kernel} "
                f"rel err {err:.3e} > {rel_tol:.0e}"
            )
    return res


def run_verification(
    engine_instances: int = 200,
    pipeline_instances: int = 25,
    seed: int = 0,
    backend: str | None = None,
) -> VerifyResult:
    res = VerifyResult()
    check_engine_instances(engine_instances, seed=seed, backend=backend, result=res)
    check_pipeline_instances(
        pipeline_instances, seed=seed + 1, word_bits=(64, 32), backend=backend,
        result=res,
    )
    return res
