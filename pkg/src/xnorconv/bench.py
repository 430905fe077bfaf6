"""Benchmark harness: vanilla vs bit-packed XNOR convolution.

Protocol: deterministic inputs from a seed, buffers allocated and the
input padded outside the timed region (memory operations are excluded),
`warmup` untimed runs, then `repeats` timed runs per implementation.
Binarization and packing ARE timed as part of the XNOR convolution since
they are steps of it.  Before any timing, an equality gate cross-checks
the implementations against the naive references and aborts on mismatch.

Implementations: vanilla-1t, vanilla-mt (naive direct convolution, single
and multi threaded) and xnor-1t, xnor-mt (full bit-packed pipeline; the
mt variant also overlaps the scale path with the bit path).
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

import numpy as np

from ._backend import get_kernels
from .binarize import sign_binarize, sign_plane
from .pipeline import ConvWorkspace
from .reference import bwn_conv, sign_conv2d_int
from .scaling import input_scale_map
from .tensor import Tensor2, Tensor3, channel_abs_mean, zero_pad

IMPLEMENTATIONS = ("vanilla-1t", "vanilla-mt", "xnor-1t", "xnor-mt")
BASELINE_OF = {"xnor-1t": "vanilla-1t", "xnor-mt": "vanilla-mt"}

DEFAULT_SIZES = (256, 512, 1024, 2048)

# Fixed probe size for the pre-timing oracle gate (small enough for the
# scalar reference loops).
GATE_PROBE_SIZE = 48


class BenchGateError(RuntimeError):
    """Pre-timing equality gate failed; results would be meaningless."""


@dataclass
class BenchConfig:
    sizes: tuple[int, ...] = DEFAULT_SIZES
    kernel: int = 3
    channels: int = 1
    repeats: int = 100
    warmup: int = 10
    threads: int | str = "all"
    word_bits: int = 64
    seed: int = 0
    fmt: str = "table"
    backend: str | None = None

    def __post_init__(self) -> None:
        self.sizes = tuple(int(s) for s in self.sizes)
        if not self.sizes:
            raise ValueError("sizes must be non-empty")
        if any(s < self.kernel for s in self.sizes):
            raise ValueError("every size must be >= the kernel size")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ValueError("kernel must be odd and >= 1")
        if self.channels < 1:
            raise ValueError("channels must be >= 1")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.warmup < 0:
            raise ValueError("warmup must be >= 0")
        if self.word_bits not in (32, 64):
            raise ValueError("word_bits must be 32 or 64")
        if self.fmt not in ("table", "csv"):
            raise ValueError("format must be 'table' or 'csv'")
        if self.threads != "all":
            self.threads = int(self.threads)
            if self.threads < 1:
                raise ValueError("threads must be >= 1 or 'all'")

    @property
    def thread_count(self) -> int:
        if self.threads == "all":
            return os.cpu_count() or 1
        return self.threads


@dataclass(frozen=True)
class BenchRow:
    impl: str
    size: int
    mean_ms: float
    std_ms: float
    speedup: float


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)


def _bench_data(cfg: BenchConfig, size: int) -> tuple[Tensor3, Tensor3]:
    """Deterministic input and weights for one size (float32-exact values)."""
    rng = np.random.default_rng((cfg.seed, size))
    shape = (cfg.channels, size, size)
    data = rng.uniform(-1.0, 1.0, shape).astype(np.float32).astype(np.float64)
    wshape = (cfg.channels, cfg.kernel, cfg.kernel)
    wdata = rng.uniform(-1.0, 1.0, wshape).astype(np.float32).astype(np.float64)
    return Tensor3(data), Tensor3(wdata)


def _sign_dominated(cfg: BenchConfig, size: int, magnitude: float,
                    w_magnitude: float) -> tuple[Tensor3, Tensor3]:
    """Constant-magnitude random-sign data, where the approximation is exact."""
    rng = np.random.default_rng((cfg.seed, size, 1))
    signs = rng.integers(0, 2, (cfg.channels, size, size)) * 2 - 1
    wsigns = rng.integers(0, 2, (cfg.channels, cfg.kernel, cfg.kernel)) * 2 - 1
    return Tensor3(signs * magnitude), Tensor3(wsigns * w_magnitude)


def _interior(arr: np.ndarray, border: int) -> np.ndarray:
    if border == 0:
        return arr
    return arr[border:-border, border:-border]


def _rel_err(got: np.ndarray, want: np.ndarray) -> float:
    scale = max(float(np.abs(want).max()), 1e-30)
    return float(np.abs(got - want).max()) / scale


def _gate_small_probe(cfg: BenchConfig) -> None:
    """Exact and approximate agreement against the scalar references."""
    size = max(GATE_PROBE_SIZE, cfg.kernel)
    pad = (cfg.kernel - 1) // 2
    inp, wts = _bench_data(cfg, size)

    ws = ConvWorkspace(cfg.channels, size, size, cfg.kernel, cfg.kernel,
                       pad, cfg.word_bits, cfg.backend)
    ws.set_weights(wts)
    ws.load_input(inp)
    got = ws.run(threads=1).copy()
    ints = ws.int_plane()
    ws.close()

    padded = zero_pad(inp, pad)
    in_signs = [sign_plane(Tensor2(ch)) for ch in padded.data]
    approx = sign_binarize(wts)
    oracle_ints = sign_conv2d_int(in_signs, approx.signs, pad=0)
    if not np.array_equal(ints.values, oracle_ints.values):
        raise BenchGateError("XNOR integer output disagrees with the naive reference")

    scale_map = input_scale_map(channel_abs_mean(inp), cfg.kernel, cfg.kernel, pad)
    want = oracle_ints.values * scale_map.data * approx.scale
    if _rel_err(got, want) > 1e-5:
        raise BenchGateError("pipeline output disagrees with its decomposition")

    # Constant |input| makes the reconstruction exact against the
    # sign-weight convolution away from the padding border.
    probe_in, probe_w = _sign_dominated(cfg, size, 0.75, 0.5)
    got_probe = _run_pipeline_once(cfg, probe_in, probe_w, pad)
    want_bwn = bwn_conv(probe_in, sign_binarize(probe_w), pad)
    err = _rel_err(_interior(got_probe, pad), _interior(want_bwn.data, pad))
    if err > 1e-4:
        raise BenchGateError(
            f"XNOR vs binary-weight reference interior mismatch ({err:.2e})"
        )


def _run_pipeline_once(cfg: BenchConfig, inp: Tensor3, wts: Tensor3,
                       pad: int) -> np.ndarray:
    ws = ConvWorkspace(cfg.channels, inp.height, inp.width, cfg.kernel,
                       cfg.kernel, pad, cfg.word_bits, cfg.backend)
    ws.set_weights(wts)
    ws.load_input(inp)
    try:
        return ws.run(threads=1).copy()
    finally:
        ws.close()


def _gate_size(cfg: BenchConfig, size: int, runners: dict) -> None:
    """Per-size gate: thread-count invariance plus vanilla-vs-xnor agreement
    on sign-dominated data of the same size."""
    v1 = runners["vanilla-1t"]().copy()
    vm = runners["vanilla-mt"]()
    if not np.array_equal(v1, vm):
        raise BenchGateError(f"vanilla outputs differ across thread counts at {size}")
    x1 = runners["xnor-1t"]().copy()
    xm = runners["xnor-mt"]()
    if not np.array_equal(x1, xm):
        raise BenchGateError(f"XNOR outputs differ across thread counts at {size}")

    pad = (cfg.kernel - 1) // 2
    probe_in, probe_w = _sign_dominated(cfg, size, 0.75, 0.5)
    got = _run_pipeline_once(cfg, probe_in, probe_w, pad)

    kern = get_kernels(cfg.backend)
    padded = zero_pad(probe_in, pad)
    want = np.empty(got.shape, dtype=np.float32)
    kern.vanilla_conv(
        padded.data.astype(np.float32), probe_w.data.astype(np.float32), want, 1
    )
    err = _rel_err(_interior(got, pad), _interior(want, pad))
    if err > 1e-4:
        raise BenchGateError(
            f"XNOR vs vanilla interior mismatch at size {size} ({err:.2e})"
        )


def _timed(fn, warmup: int, repeats: int) -> tuple[float, float]:
    for _ in range(warmup):
        fn()
    samples = np.empty(repeats)
    for i in range(repeats):
        t0 = time.perf_counter()
        fn()
        samples[i] = time.perf_counter() - t0
    mean = float(samples.mean()) * 1e3
    std = float(samples.std(ddof=1)) * 1e3 if repeats > 1 else 0.0
    return mean, std


def run_bench(cfg: BenchConfig) -> BenchReport:
    """Time every implementation at every size and derive speed-ups."""
    threads = cfg.thread_count
    kern = get_kernels(cfg.backend)
    _gate_small_probe(cfg)

    report = BenchReport()
    pad = (cfg.kernel - 1) // 2
    for size in cfg.sizes:
        inp, wts = _bench_data(cfg, size)

        ws = ConvWorkspace(cfg.channels, size, size, cfg.kernel, cfg.kernel,
                           pad, cfg.word_bits, cfg.backend)
        ws.set_weights(wts)
        ws.load_input(inp)
        # The vanilla baseline shares the padded float32 input with the
        # XNOR workspace: identical data, identical precision.
        vanilla_out = np.empty((ws.out_h, ws.out_w), dtype=np.float32)
        wdata = wts.data.astype(np.float32)

        runners = {
            "vanilla-1t": lambda: kern.vanilla_conv(ws.padded, wdata, vanilla_out, 1)
                or vanilla_out,
            "vanilla-mt": lambda: kern.vanilla_conv(ws.padded, wdata, vanilla_out, threads)
                or vanilla_out,
            "xnor-1t": lambda: ws.run(threads=1),
            "xnor-mt": lambda: ws.run(threads=threads),
        }
        _gate_size(cfg, size, runners)

        means: dict[str, float] = {}
        stats: dict[str, tuple[float, float]] = {}
        for impl in IMPLEMENTATIONS:
            mean, std = _timed(runners[impl], cfg.warmup, cfg.repeats)
            means[impl] = mean
            stats[impl] = (mean, std)
        ws.close()

        for impl in IMPLEMENTATIONS:
            mean, std = stats[impl]
            baseline = means.get(BASELINE_OF.get(impl, impl), mean)
            report.rows.append(BenchRow(impl, size, mean, std, baseline / mean))
    return report


def emit_report(report: BenchReport, fmt: str = "table") -> str:
    """Render a report as an aligned table or an exact-round-trip CSV."""
    if fmt == "csv":
        lines = ["impl,size,mean_ms,std_ms,speedup"]
        for r in report.rows:
            lines.append(f"{r.impl},{r.size},{r.mean_ms!r},{r.std_ms!r},{r.speedup!r}")
        return "\n".join(lines) + "\n"
    if fmt != "table":
        raise ValueError(f"unknown format {fmt!r}")
    header = f"{'impl':<12} {'size':>6} {'mean_ms':>12} {'std_ms':>10} {'speed-up':>9}"
    lines = [header, "-" * len(header)]
    for r in report.rows:
        lines.append(
            f"{r.impl:<12} {r.size:>6} {r.mean_ms:>12.4f} {r.std_ms:>10.4f} "
            f"{r.speedup:>8.2f}x"
        )
    return "\n".join(lines) + "\n"


def parse_csv(text: str) -> BenchReport:
    """Inverse of emit_report(fmt='csv')."""
    lines = [ln for ln in text.strip().splitlines() if ln]
    if not lines or lines[0] != "impl,size,mean_ms,std_ms,speedup":
        raise ValueError("missing or unexpected CSV header")
    report = BenchReport()
    for ln in lines[1:]:
        impl, size, mean_ms, std_ms, speedup = ln.split(",")
        report.rows.append(
            BenchRow(impl, int(size), float(mean_ms), float(std_ms), float(speedup))
        )
    return report
