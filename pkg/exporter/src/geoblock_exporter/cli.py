"""Exporter command line: instrument a toy model and emit geoblock dumps."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import CapabilityError, ExporterError
from .session import ExportSession, run_export
from .toymodel import MODEL_REGISTRY, tokenize


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geoblock-exporter",
        description="Capture per-frontier ROI attention from an instrumented toy denoiser.",
    )
    parser.add_argument("--model", required=True, help=f"one of: {', '.join(sorted(MODEL_REGISTRY))}")
    parser.add_argument("--prompt-file", required=True, help="UTF-8 text file, byte-tokenized")
    parser.add_argument("--layers", required=True, help="comma-separated layer ids to capture")
    parser.add_argument("--window", type=int, default=8, help="frontier window length")
    parser.add_argument("--gen-len", type=int, default=24, help="generation length")
    parser.add_argument("--threshold", type=float, default=0.9)
    parser.add_argument("--out", required=True, help="output directory for dumps + manifest")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        prompt = tokenize(Path(args.prompt_file).read_text(encoding="utf-8").strip())
        session = ExportSession(
            model_id=args.model,
            layer_ids=tuple(int(v) for v in args.layers.split(",")),
            prompt=prompt,
            gen_length=args.gen_len,
            window_length=args.window,
            out_dir=Path(args.out),
            threshold=args.threshold,
        )
        paths = run_export(session)
    except CapabilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ExporterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {len(paths)} dump(s) + manifest to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
