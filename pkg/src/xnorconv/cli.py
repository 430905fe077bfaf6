"""Command line interface: bench, conv, and verify subcommands."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from ._backend import DEFAULT_BACKEND, HAVE_COMPILED
from .bench import BenchConfig, BenchGateError, emit_report, run_bench
from .pipeline import default_pad, xnor_conv
from .tensor import load_tensor, save_tensor, Tensor3


def _parse_sizes(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(s) for s in text.split(",") if s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}")


def _add_backend_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--backend", choices=["auto", "compiled", "python"], default="auto",
        help="kernel backend (default: compiled when built, else python)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xnorconv",
        description="Bit-packed XNOR convolution: benchmark, convolve, verify.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="time vanilla vs XNOR convolution")
    b.add_argument("--sizes", type=_parse_sizes, default=(256, 512, 1024, 2048),
                   help="comma-separated square input sizes")
    b.add_argument("--kernel", type=int, default=3)
    b.add_argument("--channels", type=int, default=1)
    b.add_argument("--repeats", type=int, default=100)
    b.add_argument("--warmup", type=int, default=10)
    b.add_argument("--threads", default="all", help="worker count or 'all'")
    b.add_argument("--word-bits", type=int, choices=[32, 64], default=64)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--format", choices=["table", "csv"], default="table")
    _add_backend_arg(b)

    c = sub.add_parser("conv", help="apply one XNOR convolution to a tensor file")
    c.add_argument("--input", required=True, help="input tensor fixture")
    c.add_argument("--weights", required=True, help="filter tensor fixture")
    c.add_argument("--output", required=True, help="output tensor fixture")
    c.add_argument("--pad", type=int, default=None,
                   help="zero padding (default: same-size for odd kernels)")
    c.add_argument("--word-bits", type=int, choices=[32, 64], default=64)
    c.add_argument("--threads", type=int, default=1)
    _add_backend_arg(c)

    v = sub.add_parser("verify", help="run randomized oracle equivalence checks")
    v.add_argument("--engine-instances", type=int, default=200)
    v.add_argument("--pipeline-instances", type=int, default=25)
    v.add_argument("--seed", type=int, default=0)
    _add_backend_arg(v)

    return parser


def _backend_of(args) -> str | None:
    return None if args.backend == "auto" else args.backend


def _cmd_bench(args) -> int:
    try:
        cfg = BenchConfig(
            sizes=args.sizes, kernel=args.kernel, channels=args.channels,
            repeats=args.repeats, warmup=args.warmup, threads=args.threads,
            word_bits=args.word_bits, seed=args.seed, fmt=args.format,
            backend=_backend_of(args),
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        report = run_bench(cfg)
    except BenchGateError as exc:
        print(f"equality gate failed: {exc}", file=sys.stderr)
        return 1
    sys.stdout.write(emit_report(report, cfg.fmt))
    return 0


def _cmd_conv(args) -> int:
    inp = load_tensor(args.input)
    wts = load_tensor(args.weights)
    pad = args.pad if args.pad is not None else default_pad(wts.height, wts.width)
    out = xnor_conv(
        inp, wts, pad=pad, word_bits=args.word_bits, threads=args.threads,
        backend=_backend_of(args),
    )
    save_tensor(Tensor3(out.data[np.newaxis]), args.output)
    print(f"wrote {out.height}x{out.width} output to {args.output}")
    return 0


def _cmd_verify(args) -> int:
    from .verify import run_verification

    res = run_verification(
        engine_instances=args.engine_instances,
        pipeline_instances=args.pipeline_instances,
        seed=args.seed,
        backend=_backend_of(args),
    )
    backend = _backend_of(args) or DEFAULT_BACKEND
    print(f"backend: {backend} (compiled available: {HAVE_COMPILED})")
    print(f"engine instances checked:   {res.engine_checked}")
    print(f"pipeline instances checked: {res.pipeline_checked}")
    if res.ok:
        print("all checks passed")
        return 0
    for f in res.failures:
        print(f"FAIL: {f}", file=sys.stderr)
    return 1


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "bench":
        return _cmd_bench(args)
    if args.command == "conv":
        return _cmd_conv(args)
    return _cmd_verify(args)


if __name__ == "__main__":
    sys.exit(main())
