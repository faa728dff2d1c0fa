"""Command line front end and CSV serialization.

Four subcommands: ``converge`` sweeps block sizes on one patch and
reports residual histories, ``smooth`` runs one configuration on a patch
set, ``bench`` times configurations and reports strong-scaling numbers,
``inverses`` reports block-inversion cost and accuracy.

Machine-readable output uses two fixed CSV schemas:

convergence rows (converge, smooth)::

    scheme,block,patch,seed,step,residual_l2,relative_error

bench rows::

    patch_spec,block,scheme,strategy,p,q,steps,wall_seconds,cells_per_second,ghost_seconds,speedup,efficiency

Floats carry 17 significant digits so a parsed-back value equals the
in-memory one bit for bit; every line ends with a single line feed.
"""

import argparse
import sys
import time
from dataclasses import dataclass

from .analysis import DEFAULT_BLOCK_SIZES, DEFAULT_WINDOW, run_convergence_study
from .bench import (
    PatchSetSpec,
    build_level,
    build_patch_set,
    run_bench,
    seed_initial_guess,
    speedup_table,
)
from .blocklinalg import InverseCache, invert_dense, multiply_back_error
from .grid import PatchDims, decompose_blocks
from .runtime import ExecutionStrategy
from .smoother import SmootherConfig, smooth
from .stencil import Stencil7, assemble_block_matrix

__all__ = ["RunSpec", "parse_args", "main"]

_SCHEME_NAMES = {"jacobi": "block_jacobi", "chaotic-gs": "chaotic_block_gs"}

_CONVERGENCE_HEADER = "scheme,block,patch,seed,step,residual_l2,relative_error"
_BENCH_HEADER = (
    "patch_spec,block,scheme,strategy,p,q,steps,"
    "wall_seconds,cells_per_second,ghost_seconds,speedup,efficiency"
)
_INVERSES_HEADER = "block,extent,order,invert_seconds,multiply_back_inf_error"


def _triple(text):
    parts = text.split("x")
    if len(parts) != 3:
        raise ValueError(f"expected AxBxC, got {text!r}")
    try:
        vals = tuple(int(p) for p in parts)
    except ValueError:
        raise ValueError(f"expected AxBxC with integers, got {text!r}") from None
    if any(v < 1 for v in vals):
        raise ValueError(f"extents must be positive, got {text!r}")
    return vals


def _window(text):
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"expected I,K, got {text!r}")
    try:
        start, length = int(parts[0]), int(parts[1])
    except ValueError:
        raise ValueError(f"expected I,K with integers, got {text!r}") from None
    if start < 0 or length < 1:
        raise ValueError(f"window needs I >= 0 and K >= 1, got {text!r}")
    return start, length


def _tag(triple):
    return "x".join(str(v) for v in triple)


@dataclass(frozen=True)
class RunSpec:
    """Fully parsed and validated invocation."""

    command: str
    patch_sizes: tuple
    num_patches: int
    mixed: bool
    block_dims: tuple  # None means the subcommand default
    scheme: str
    omega: float
    steps: int
    strategy: ExecutionStrategy
    seed: int
    window: tuple
    repeat: int
    out: str


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="patchsmooth",
        description="Block relaxation on structured patches.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("converge", "sweep block sizes on one patch and report residual histories"),
        ("smooth", "run one smoothing configuration on a patch set"),
        ("bench", "time configurations and report speedup/efficiency"),
        ("inverses", "report block inversion cost and multiply-back accuracy"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--patch-size", action="append", metavar="AxBxC", default=None)
        p.add_argument("--num-patches", type=int, default=1, metavar="N")
        p.add_argument("--mixed-table2", action="store_true")
        p.add_argument("--block-size", metavar="AxBxC", default=None)
        p.add_argument("--scheme", choices=sorted(_SCHEME_NAMES), default="jacobi")
        p.add_argument("--omega", type=float, default=None, metavar="F")
        p.add_argument("--steps", type=int, default=3, metavar="N")
        p.add_argument(
            "--strategy",
            choices=("serial", "patch", "block", "two-level"),
            default="serial",
        )
        p.add_argument("--patch-workers", type=int, default=None, metavar="P")
        p.add_argument("--block-workers", type=int, default=None, metavar="Q")
        p.add_argument("--seed", type=int, default=42, metavar="N")
        p.add_argument("--window", metavar="I,K", default=None)
        p.add_argument("--repeat", type=int, default=3, metavar="R")
        p.add_argument("--out", metavar="PATH", default=None)
    return parser


def parse_args(argv=None):
    """Parse and validate; exits with status 2 on any bad input."""
    parser = _build_parser()
    ns = parser.parse_args(argv)

    def fail(msg):
        parser.error(msg)

    try:
        patch_sizes = tuple(_triple(t) for t in ns.patch_size or ["64x64x64"])
        block_dims = _triple(ns.block_size) if ns.block_size is not None else None
        window = _window(ns.window) if ns.window is not None else DEFAULT_WINDOW
    except ValueError as e:
        fail(str(e))
    if ns.mixed_table2 and (ns.patch_size is not None or ns.num_patches != 1):
        fail("--mixed-table2 replaces --patch-size/--num-patches")
    if len(patch_sizes) > 1 and ns.num_patches != 1:
        fail("--num-patches only applies to a single --patch-size")
    if ns.num_patches < 1:
        fail(f"--num-patches must be positive, got {ns.num_patches}")
    if ns.omega is not None and not 0.0 < ns.omega <= 1.0:
        fail(f"--omega must lie in (0, 1], got {ns.omega}")
    if ns.steps < 1:
        fail(f"--steps must be positive, got {ns.steps}")
    if ns.repeat < 1:
        fail(f"--repeat must be positive, got {ns.repeat}")
    for flag, val, kinds in (
        ("--patch-workers", ns.patch_workers, ("patch", "two-level")),
        ("--block-workers", ns.block_workers, ("block", "two-level")),
    ):
        if val is not None:
            if val < 1:
                fail(f"{flag} must be positive, got {val}")
            if ns.strategy not in kinds:
                fail(f"{flag} needs --strategy {' or '.join(kinds)}")
    p = ns.patch_workers if ns.patch_workers is not None else 1
    q = ns.block_workers if ns.block_workers is not None else 1
    if ns.strategy == "serial":
        strategy = ExecutionStrategy.serial()
    elif ns.strategy == "patch":
        strategy = ExecutionStrategy.patch_parallel(p)
    elif ns.strategy == "block":
        strategy = ExecutionStrategy.block_parallel(q)
    else:
        strategy = ExecutionStrategy.two_level(p, q)
    if ns.command == "converge":
        if ns.mixed_table2 or len(patch_sizes) > 1 or ns.num_patches != 1:
            fail("converge studies a single patch")
    return RunSpec(
        command=ns.command,
        patch_sizes=patch_sizes,
        num_patches=ns.num_patches,
        mixed=ns.mixed_table2,
        block_dims=block_dims,
        scheme=_SCHEME_NAMES[ns.scheme],
        omega=ns.omega,
        steps=ns.steps,
        strategy=strategy,
        seed=ns.seed,
        window=window,
        repeat=ns.repeat,
        out=ns.out,
    )


def _fmt(x):
    return format(float(x), ".17g")


def _render(header, rows):
    lines = [header]
    lines.extend(",".join(row) for row in rows)
    return "\n".join(lines) + "\n"


def _patch_set(spec):
    """Resolve the patch flags to (label, Level)."""
    if spec.mixed:
        pss = PatchSetSpec.mixed_table2()
        return pss.label, build_patch_set(pss)
    if len(spec.patch_sizes) == 1:
        pss = PatchSetSpec.uniform(spec.patch_sizes[0], spec.num_patches)
        return pss.label, build_patch_set(pss)
    label = "+".join(_tag(s) for s in spec.patch_sizes)
    return label, build_level(spec.patch_sizes)


def _config(spec, block, strategy=None):
    return SmootherConfig(
        scheme=spec.scheme,
        block_dims=block,
        omega=spec.omega,
        steps=spec.steps,
        strategy=spec.strategy if strategy is None else strategy,
        seed=spec.seed,
    )


def _history_rows(scheme, block, patch_label, seed, history):
    rows = []
    for k, r in enumerate(history):
        rows.append(
            [
                scheme,
                _tag(block),
                patch_label,
                str(seed),
                str(k),
                _fmt(r),
                _fmt(r / history[0]),
            ]
        )
    return rows


def _run_converge(spec):
    blocks = [spec.block_dims] if spec.block_dims is not None else list(DEFAULT_BLOCK_SIZES)
    dims = PatchDims(*spec.patch_sizes[0])
    reports = run_convergence_study(
        dims,
        block_sizes=blocks,
        schemes=[spec.scheme],
        steps=spec.steps,
        seed=spec.seed,
        omega=spec.omega,
        strategy=spec.strategy,
        window=spec.window,
    )
    rows = []
    for rep in reports:
        rows.extend(
            _history_rows(
                rep.scheme, rep.block_dims, _tag(rep.patch_dims), rep.seed, rep.residual_history
            )
        )
    return _render(_CONVERGENCE_HEADER, rows)


def _run_smooth(spec):
    label, level = _patch_set(spec)
    seed_initial_guess(level, spec.seed)
    config = _config(spec, spec.block_dims or (8, 8, 8))
    _, history = smooth(level, config, InverseCache())
    return _render(
        _CONVERGENCE_HEADER,
        _history_rows(spec.scheme, config.block_dims, label, spec.seed, history),
    )


def _run_bench(spec):
    label, level = _patch_set(spec)
    seed_initial_guess(level, spec.seed)
    block = spec.block_dims or (8, 8, 8)
    configs = [_config(spec, block, strategy=ExecutionStrategy.serial())]
    if spec.strategy.kind != "serial":
        configs.append(_config(spec, block))
    records = run_bench(level, configs, repeat=spec.repeat, label=label)
    rows = []
    for rec, srow in zip(records, speedup_table(records)):
        rows.append(
            [
                rec.patch_spec,
                _tag(rec.block_dims),
                rec.scheme,
                rec.strategy,
                str(rec.p),
                str(rec.q),
                str(rec.steps),
                _fmt(rec.wall_seconds),
                _fmt(rec.cells_per_second),
                _fmt(rec.ghost_seconds),
                _fmt(srow.speedup),
                _fmt(srow.efficiency),
            ]
        )
    return _render(_BENCH_HEADER, rows)


def _run_inverses(spec):
    dims = PatchDims(*spec.patch_sizes[0])
    block = spec.block_dims or (8, 8, 8)
    stencil = Stencil7()
    rows = []
    for extent in decompose_blocks(dims, block).shapes:
        a = assemble_block_matrix(stencil, extent)
        t0 = time.perf_counter()
        inv = invert_dense(a)
        dt = time.perf_counter() - t0
        rows.append(
            [
                _tag(block),
                _tag(extent),
                str(a.shape[0]),
                _fmt(dt),
                _fmt(multiply_back_error(a, inv)),
            ]
        )
    return _render(_INVERSES_HEADER, rows)


_RUNNERS = {
    "converge": _run_converge,
    "smooth": _run_smooth,
    "bench": _run_bench,
    "inverses": _run_inverses,
}


def main(argv=None):
    spec = parse_args(argv)
    try:
        text = _RUNNERS[spec.command](spec)
        if spec.out is None:
            sys.stdout.write(text)
        else:
            # newline="" keeps the line feeds exactly as rendered.
            with open(spec.out, "w", newline="") as f:
                f.write(text)
    except (ValueError, RuntimeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
