"""Command-line front door: boundary inference on dumps, simulations, sweeps, profile export.

Every command is deterministic given its flags and seed (GEOBLOCK_SEED is the
default-seed fallback); reruns produce byte-identical files. Error classes map
to distinct exit codes:

    2 argument        3 I/O             4 dump format   5 dump truncation
    6 dump corruption 7 dump version    8 data          9 config
    10 range          11 state          1 unexpected
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .attention import AttentionTensor, FusionConfig
from .decode import DecodeConfig, DecodeReport
from .dumpio import read_dump
from .errors import (
    ArgumentError,
    ConfigError,
    DataError,
    DumpCorruptionError,
    DumpError,
    DumpFormatError,
    DumpTruncationError,
    DumpVersionError,
    GeoBlockError,
    StateError,
    WindowRangeError,
)
from .scoring import ScoreParams, score_profile, select_boundary
from .synth import make_world, parse_world_config, simulate_world

SWEEP_AXES = ("alpha", "delta", "threshold", "layers_weights", "b_max")

_EXIT_CODES = (
    (DumpVersionError, 7),
    (DumpTruncationError, 5),
    (DumpCorruptionError, 6),
    (DumpFormatError, 4),
    (DumpError, 4),
    (ArgumentError, 2),
    (DataError, 8),
    (ConfigError, 9),
    (WindowRangeError, 10),
    (StateError, 11),
)


def _fmt(v: float) -> str:
    return f"{v:.10g}"


def _default_seed() -> int:
    return int(os.environ.get("GEOBLOCK_SEED", "0"))


def _add_score_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=0.5, help="past-anchoring coefficient")
    p.add_argument("--delta", type=float, default=0.1, help="right-shift tolerance")
    p.add_argument("--min-block", type=int, default=4, help="minimum block length m")
    p.add_argument("--max-block", type=int, default=32, help="maximum block length B_max")


def _add_fusion_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--layers", default=None, help="comma-separated layer ids (default: 16,21,26 when available, else all)")
    p.add_argument("--weights", default=None, help="comma-separated fusion weights (default: uniform)")
    p.add_argument("--top-k-heads", type=int, default=8, help="salient heads per layer")


def _add_decode_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threshold", type=float, default=0.9, help="confidence commit threshold")
    p.add_argument("--scheduler", choices=("geoblock", "fixed", "oracle"), default="geoblock")
    p.add_argument("--fixed-block", type=int, default=None, help="block size for the fixed scheduler")
    p.add_argument("--probe-mode", choices=("dedicated_probe", "reuse_pass"), default="dedicated_probe")


def _score_params(args) -> ScoreParams:
    return ScoreParams(
        alpha=args.alpha,
        min_block=args.min_block,
        delta=args.delta,
        max_block=args.max_block,
    )


def _fusion_for(args, tensor: AttentionTensor | None) -> FusionConfig | None:
    if args.layers is not None:
        ids = tuple(int(v) for v in args.layers.split(","))
        if args.weights is not None:
            weights = tuple(float(v) for v in args.weights.split(","))
            return FusionConfig(ids, weights, args.top_k_heads)
        return FusionConfig.uniform(ids, args.top_k_heads)
    if args.weights is not None:
        raise ArgumentError("--weights requires --layers")
    if tensor is None:
        return None  # resolved per tensor inside the decode loop
    if tensor.layers > 26:
        return FusionConfig((16, 21, 26), (0.333, 0.333, 0.334), args.top_k_heads)
    return FusionConfig.uniform(range(tensor.layers), args.top_k_heads)


def _profile_from_dump(args):
    tensor, window = read_dump(args.dump)
    fusion = _fusion_for(args, tensor)
    from .attention import _fuse_roi

    # dumps hold the ROI already: queries = window rows, keys = history + window
    fused = _fuse_roi(tensor, window, fusion)
    history = None
    if args.history_cols is not None:
        if args.history_cols > window.history_extent:
            raise ArgumentError(
                f"--history-cols {args.history_cols} exceeds dump history {window.history_extent}"
            )
        history = range(1 - args.history_cols, 1)
    return score_profile(fused, _score_params(args), history, closed_end=args.closed_end)


def cmd_infer_boundary(args) -> int:
    profile = _profile_from_dump(args)
    decision = select_boundary(profile)
    if args.profile is not None:
        Path(args.profile).write_text(profile.to_table(), encoding="utf-8")
    print(f"split: {decision.split}")
    print(f"block_len: {decision.block_len}")
    print(f"score_at_split: {_fmt(decision.score_at_split)}")
    print(f"max_score: {_fmt(decision.max_score)}")
    print(f"threshold: {_fmt(decision.threshold)}")
    print(f"degenerate: {str(decision.degenerate).lower()}")
    return 0


def cmd_export_profile(args) -> int:
    profile = _profile_from_dump(args)
    Path(args.out).write_text(profile.to_table(), encoding="utf-8")
    print(f"wrote {args.out} ({len(profile.candidates)} candidates)")
    return 0


def _decode_config(args, max_len: int = 1) -> DecodeConfig:
    return DecodeConfig(
        score_params=_score_params(args),
        fusion=_fusion_for(args, None),
        threshold=args.threshold,
        scheduler=args.scheduler,
        fixed_block=args.fixed_block,
        probe_mode=args.probe_mode,
        max_len=max_len,
    )


def _seed_list(args) -> list[int]:
    base = args.seed if args.seed is not None else _default_seed()
    return [base + i for i in range(args.seeds)]


def _aggregate_lines(reports: list[DecodeReport]) -> list[str]:
    pooled = np.concatenate([np.asarray(r.block_lengths, dtype=np.float64) for r in reports])
    nfe = np.array([r.total_nfe for r in reports], dtype=np.float64)
    ratio = np.array([r.extra_nfe_ratio for r in reports], dtype=np.float64)
    lines = [
        f"runs: {len(reports)}",
        f"block_length_mean: {_fmt(float(pooled.mean()))}",
        f"block_length_std: {_fmt(float(pooled.std()))}",
        f"nfe_mean: {_fmt(float(nfe.mean()))}",
        f"nfe_std: {_fmt(float(nfe.std()))}",
        f"extra_nfe_ratio_mean: {_fmt(float(ratio.mean()))}",
        f"extra_nfe_ratio_std: {_fmt(float(ratio.std()))}",
    ]
    recs = [r.boundary_recovery for r in reports if r.boundary_recovery is not None]
    if recs:
        arr = np.asarray(recs, dtype=np.float64)
        lines.append(f"boundary_recovery_mean: {_fmt(float(arr.mean()))}")
        lines.append(f"boundary_recovery_std: {_fmt(float(arr.std()))}")
    return lines


def _run_seed(world_cfg: dict, cfg: DecodeConfig, seed: int, collect_trace: bool) -> DecodeReport:
    world = make_world(world_cfg, seed)
    return simulate_world(world, cfg, collect_trace=collect_trace)


def cmd_simulate(args) -> int:
    world_cfg = parse_world_config(args.world)
    cfg = _decode_config(args)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    reports = []
    for seed in _seed_list(args):
        report = _run_seed(world_cfg, cfg, seed, args.trace)
        reports.append(report)
        (outdir / f"report_seed{seed}.txt").write_text(report.to_text(), encoding="utf-8")
        if args.trace:
            (outdir / f"trace_seed{seed}.log").write_text(report.trace_lines(), encoding="utf-8")
    (outdir / "aggregate.txt").write_text(
        "\n".join(_aggregate_lines(reports)) + "\n", encoding="utf-8"
    )
    print(f"wrote {len(reports)} report(s) + aggregate to {outdir}")
    return 0


def _apply_axis(cfg: DecodeConfig, axis: str, raw: str) -> tuple[DecodeConfig, str]:
    """Returns the adjusted config and the canonical value label for output rows."""
    if axis == "alpha":
        v = float(raw)
        return replace(cfg, score_params=replace(cfg.score_params, alpha=v)), _fmt(v)
    if axis == "delta":
        v = float(raw)
        return replace(cfg, score_params=replace(cfg.score_params, delta=v)), _fmt(v)
    if axis == "threshold":
        v = float(raw)
        return replace(cfg, threshold=v), _fmt(v)
    if axis == "b_max":
        v = int(raw)
        return replace(cfg, score_params=replace(cfg.score_params, max_block=v)), str(v)
    if axis == "layers_weights":
        ids_part, _, weights_part = raw.partition(":")
        ids = tuple(int(i) for i in ids_part.split("-"))
        if weights_part:
            weights = tuple(float(w) for w in weights_part.split(","))
            fusion = FusionConfig(ids, weights)
        else:
            fusion = FusionConfig.uniform(ids)
        return replace(cfg, fusion=fusion), raw
    raise ArgumentError(f"unknown sweep axis {axis!r}; valid axes: {', '.join(SWEEP_AXES)}")


def cmd_sweep(args) -> int:
    if args.axis not in SWEEP_AXES:
        raise ArgumentError(f"unknown sweep axis {args.axis!r}; valid axes: {', '.join(SWEEP_AXES)}")
    world_cfg = parse_world_config(args.world)
    base_cfg = _decode_config(args)
    base_seed = args.seed if args.seed is not None else _default_seed()
    seeds = [base_seed + i for i in range(args.repetitions)]

    header = (
        "axis,value,seed,total_nfe,probe_nfe,extra_nfe_ratio,"
        "block_length_mean,block_length_std,boundary_recovery"
    )
    rows = [header]
    for raw in args.values:
        cfg, label = _apply_axis(base_cfg, args.axis, raw)
        reports = []
        for seed in seeds:
            r = _run_seed(world_cfg, cfg, seed, False)
            reports.append(r)
            rec = "" if r.boundary_recovery is None else _fmt(r.boundary_recovery)
            rows.append(
                f"{args.axis},{label},{seed},{r.total_nfe},{r.probe_nfe},"
                f"{_fmt(r.extra_nfe_ratio)},{_fmt(r.block_length_mean)},"
                f"{_fmt(r.block_length_std)},{rec}"
            )
        pooled = np.concatenate([np.asarray(r.block_lengths, dtype=np.float64) for r in reports])
        nfe = np.array([r.total_nfe for r in reports], dtype=np.float64)
        probe = np.array([r.probe_nfe for r in reports], dtype=np.float64)
        ratio = np.array([r.extra_nfe_ratio for r in reports], dtype=np.float64)
        recs = [r.boundary_recovery for r in reports if r.boundary_recovery is not None]
        rec = _fmt(float(np.mean(recs))) if recs else ""
        rows.append(
            f"{args.axis},{label},aggregate,{_fmt(float(nfe.mean()))},"
            f"{_fmt(float(probe.mean()))},{_fmt(float(ratio.mean()))},"
            f"{_fmt(float(pooled.mean()))},{_fmt(float(pooled.std()))},{rec}"
        )
    Path(args.out).write_text("\n".join(rows) + "\n", encoding="utf-8")
    print(f"wrote {args.out} ({len(args.values)} value(s) x {args.repetitions} repetition(s))")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geoblock",
        description="Attention-geometry block boundary inference and decoding simulations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("infer-boundary", help="run boundary inference on an attention dump")
    p.add_argument("dump", help="path to a .gba attention dump")
    p.add_argument("--profile", default=None, help="also write the score-profile table here")
    p.add_argument("--closed-end", action="store_true", help="window end is the end of the world (admit the terminal candidate)")
    p.add_argument("--history-cols", type=int, default=None, help="fold only the last N history columns into the past")
    _add_score_flags(p)
    _add_fusion_flags(p)
    p.set_defaults(func=cmd_infer_boundary)

    p = sub.add_parser("export-profile", help="write the score-profile table for a dump")
    p.add_argument("dump")
    p.add_argument("--out", required=True)
    p.add_argument("--closed-end", action="store_true")
    p.add_argument("--history-cols", type=int, default=None)
    _add_score_flags(p)
    _add_fusion_flags(p)
    p.set_defaults(func=cmd_export_profile)

    p = sub.add_parser("simulate", help="decode synthetic worlds and write reports")
    p.add_argument("--world", required=True, help="world config file (key = value lines)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds")
    p.add_argument("--seed", type=int, default=None, help="base seed (default: $GEOBLOCK_SEED or 0)")
    p.add_argument("--trace", action="store_true", help="write per-step event logs")
    _add_score_flags(p)
    _add_fusion_flags(p)
    _add_decode_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="sweep one axis over simulations")
    p.add_argument("--axis", required=True, help=f"one of: {', '.join(SWEEP_AXES)}")
    p.add_argument("--values", required=True, nargs="+", help="axis values (layers_weights: 16-21-26:0.333,0.333,0.334)")
    p.add_argument("--repetitions", type=int, default=1)
    p.add_argument("--world", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    _add_score_flags(p)
    _add_fusion_flags(p)
    _add_decode_flags(p)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GeoBlockError as exc:
        for klass, code in _EXIT_CODES:
            if isinstance(exc, klass):
                print(f"error: {exc}", file=sys.stderr)
                return code
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
