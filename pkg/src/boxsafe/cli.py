"""Command line entry point.

Exit codes: 0 success, 1 invalid arguments, 2 I/O or annotation parse
failure, 3 when ``verify`` finds a violation of the bound.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Callable, Sequence

from . import pipeline, theory, verifier
from .annotations import AnnotationError, Kind, parse_annotations, write_annotations
from .geometry import InvalidFactorError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_VIOLATION = 3

RANGE_TOL = 1e-9


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _checked(fn: Callable[[str], object]) -> Callable[[str], object]:
    def convert(text: str):
        try:
            return fn(text)
        except (ValueError, theory.DomainError) as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None

    convert.__name__ = fn.__name__
    return convert


def _float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"not a finite number: {text!r}")
    return value


@_checked
def alpha_value(text: str) -> float:
    return theory.check_alpha(_float(text))


@_checked
def alpha_list(text: str) -> list[float]:
    """``0.1,0.5,0.9`` or an inclusive range ``start:stop:step``."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range must be start:stop:step, got {text!r}")
        start, stop, step = (_float(p) for p in parts)
        if step <= 0 or stop < start:
            raise ValueError(f"empty or backwards range {text!r}")
        n = math.floor((stop - start) / step + RANGE_TOL)
        values = [round(start + i * step, 12) for i in range(n + 1)]
    else:
        values = [_float(p) for p in text.split(",") if p.strip()]
    if not values:
        raise ValueError("no thresholds given")
    return [theory.check_alpha(v) for v in values]


@_checked
def factor(text: str) -> float:
    value = _float(text)
    if value < 1:
        raise ValueError(f"enlargement factor must be >= 1, got {value}")
    return value


@_checked
def positive(text: str) -> float:
    value = _float(text)
    if value <= 0:
        raise ValueError(f"must be positive, got {value}")
    return value


@_checked
def non_negative(text: str) -> float:
    value = _float(text)
    if value < 0:
        raise ValueError(f"must be >= 0, got {value}")
    return value


@_checked
def unit_interval(text: str) -> float:
    value = _float(text)
    if not 0 <= value <= 1:
        raise ValueError(f"must lie in [0, 1], got {value}")
    return value


@_checked
def positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise ValueError(f"must be >= 1, got {value}")
    return value


@_checked
def seed_value(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {value}")
    return value


@_checked
def class_id(text: str) -> int:
    value = int(text)
    if value < 0:
        raise ValueError(f"class id must be >= 0, got {value}")
    return value


def _csv(header: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _json(obj: object) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _f3(x: float) -> str:
    return f"{x:.3f}"


def cmd_kmath(args: argparse.Namespace) -> tuple[str, int]:
    values = [(a, theory.k_math(a)) for a in args.alpha]
    if args.format == "json":
        return _json([{"alpha": a, "k_math": k} for a, k in values]), EXIT_OK
    return _csv(["alpha", "k_math"], [[_f3(a), _f3(k)] for a, k in values]), EXIT_OK


def cmd_iou_for_k(args: argparse.Namespace) -> tuple[str, int]:
    iou_min = theory.safe_iou_for_k(args.k)
    if args.format == "json":
        return _json({"k": args.k, "iou": iou_min}), EXIT_OK
    return _csv(["k", "iou"], [[_f3(args.k), _f3(iou_min)]]), EXIT_OK


def cmd_residual(args: argparse.Namespace) -> tuple[str, int]:
    w_max = theory.max_observed_width(args.length_m, args.width_m)
    k_target = theory.k_math(args.alpha) if args.alpha is not None else args.k_target
    spec = theory.BufferSpec(args.buffer_m, w_max)
    result = {
        "alpha": args.alpha,
        "k_target": k_target,
        "buffer_m": args.buffer_m,
        "length_m": args.length_m,
        "width_m": args.width_m,
        "w_max_m": w_max,
        "buffer_threshold_m": theory.buffer_threshold(k_target, w_max),
        "k_res": theory.residual_factor(k_target, spec),
    }
    if args.format == "json":
        return _json(result), EXIT_OK
    row = ["" if v is None else _f3(v) for v in result.values()]
    return _csv(list(result), [row]), EXIT_OK


def cmd_buffer_curve(args: argparse.Namespace) -> tuple[str, int]:
    w_max = theory.max_observed_width(args.length_m, args.width_m)
    curves = []
    for alpha in args.alphas:
        k = theory.k_math(alpha)
        points = theory.buffer_curve(k, w_max, args.x_max, args.steps)
        curves.append((alpha, k, theory.buffer_threshold(k, w_max), points))
    if args.format == "json":
        return _json(
            {
                "w_max_m": w_max,
                "curves": [
                    {
                        "alpha": a,
                        "k_math": k,
                        "buffer_threshold_m": thr,
                        "points": [{"buffer_m": x, "k_res": r} for x, r in pts],
                    }
                    for a, k, thr, pts in curves
                ],
            }
        ), EXIT_OK
    rows = [
        [_f3(a), _f3(k), _f3(x), _f3(r)] for a, k, _, pts in curves for x, r in pts
    ]
    return _csv(["alpha", "k_math", "buffer_m", "k_res"], rows), EXIT_OK


def cmd_verify(args: argparse.Namespace) -> tuple[str, int]:
    if args.shards > args.samples:
        raise UsageError(f"--shards ({args.shards}) cannot exceed --samples ({args.samples})")
    reports = [
        verifier.verify_theorem(a, args.samples, args.seed, shards=args.shards) for a in args.alpha
    ]
    code = EXIT_VIOLATION if any(r.violations for r in reports) else EXIT_OK
    if args.format == "json":
        return _json([r.to_dict() for r in reports]), code
    header = ["alpha", "samples", "seed", "bound", "max_observed_k", "violations", "witness_k", "passed"]
    rows = [
        [_f3(r.alpha), r.samples, r.seed, _f3(r.bound), _f3(r.max_observed_k), r.violations,
         _f3(r.witness_k), int(r.passed)]
        for r in reports
    ]
    return _csv(header, rows), code


def _load_pair(args: argparse.Namespace):
    gt = parse_annotations(args.gt, Kind.GROUND_TRUTH)
    pred = parse_annotations(args.pred, Kind.PREDICTION, min_conf=args.min_conf)
    return gt, pred


def _warn(messages: Sequence[str]) -> None:
    for msg in messages:
        print(f"warning: {msg}", file=sys.stderr)


def cmd_measure(args: argparse.Namespace) -> tuple[str, int]:
    gt, pred = _load_pair(args)
    table = pipeline.sweep(
        gt, pred, args.alphas, class_ids=args.class_id, partial_only=args.partial_only
    )
    _warn(table.warnings)
    if args.format == "json":
        return table.to_json(), EXIT_OK
    return table.to_csv(), EXIT_OK


def cmd_hist(args: argparse.Namespace) -> tuple[str, int]:
    gt, pred = _load_pair(args)
    _warn(pipeline.unpaired_images(gt, pred))
    pairs = pipeline.collect_pairs(
        gt, pred, args.alpha, class_ids=args.class_id, partial_only=args.partial_only
    )
    ks = pipeline.measure(pairs)
    bins = pipeline.histogram(ks, args.bin_width)
    if args.format == "json":
        return _json(
            {
                "alpha": args.alpha,
                "bin_width": args.bin_width,
                "count": len(ks),
                "bins": [{"bin_lower": lo, "count": c} for lo, c in bins],
            }
        ), EXIT_OK
    return pipeline.histogram_csv(bins), EXIT_OK


def cmd_apply(args: argparse.Namespace) -> tuple[str, int]:
    pred = parse_annotations(args.pred, Kind.PREDICTION, min_conf=args.min_conf)
    out = pipeline.apply_spp(pred, args.k, clip=args.clip)
    write_annotations(out, args.out, with_clipped=args.clip)
    boxes = sum(len(v) for v in out.values())
    clipped = sum(d.clipped for v in out.values() for d in v)
    summary = {"images": len(out), "boxes": boxes, "clipped": clipped, "k": args.k, "out": str(args.out)}
    if args.format == "json":
        return _json(summary), EXIT_OK
    return _csv(list(summary), [[len(out), boxes, clipped, _f3(args.k), str(args.out)]]), EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--output", type=Path, help="write here instead of standard output")

    parser = _Parser(prog="boxsafe", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("kmath", parents=[common], help="worst-case factor for IoU thresholds")
    p.add_argument("--alpha", type=alpha_list, required=True)
    p.set_defaults(func=cmd_kmath)

    p = sub.add_parser("iou-for-k", parents=[common], help="IoU threshold a fixed factor guarantees")
    p.add_argument("--k", type=factor, required=True)
    p.set_defaults(func=cmd_iou_for_k)

    p = sub.add_parser("residual", parents=[common], help="factor left after a planner buffer")
    target = p.add_mutually_exclusive_group(required=True)
    target.add_argument("--alpha", type=alpha_value)
    target.add_argument("--k-target", type=factor, help="use a measured factor instead of the bound")
    p.add_argument("--buffer-m", type=non_negative, required=True)
    p.add_argument("--length-m", type=positive, required=True)
    p.add_argument("--width-m", type=non_negative, required=True)
    p.set_defaults(func=cmd_residual)

    p = sub.add_parser("buffer-curve", parents=[common], help="residual factor against buffer size")
    p.add_argument("--alphas", type=alpha_list, required=True)
    p.add_argument("--length-m", type=positive, required=True)
    p.add_argument("--width-m", type=non_negative, required=True)
    p.add_argument("--x-max", type=non_negative, required=True)
    p.add_argument("--steps", type=positive_int, required=True, help="number of intervals")
    p.set_defaults(func=cmd_buffer_curve)

    p = sub.add_parser("verify", parents=[common], help="Monte Carlo check of the bound")
    p.add_argument("--alpha", type=alpha_list, required=True)
    p.add_argument("--samples", type=positive_int, required=True)
    p.add_argument("--seed", type=seed_value, required=True)
    p.add_argument("--shards", type=positive_int, default=1)
    p.set_defaults(func=cmd_verify)

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--gt", type=Path, required=True)
    data.add_argument("--pred", type=Path, required=True)
    data.add_argument("--partial-only", action="store_true",
                      help="skip pairs whose prediction already covers the ground truth")
    data.add_argument("--min-conf", type=unit_interval)
    data.add_argument("--class-id", type=class_id, action="append",
                      help="restrict to this class (repeatable)")

    p = sub.add_parser("measure", parents=[common, data], help="measured factors per threshold")
    p.add_argument("--alphas", type=alpha_list, required=True)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("hist", parents=[common, data], help="histogram of measured factors")
    p.add_argument("--alpha", type=alpha_value, required=True)
    p.add_argument("--bin-width", type=positive, required=True)
    p.set_defaults(func=cmd_hist)

    p = sub.add_parser("apply", parents=[common], help="enlarge prediction files")
    p.add_argument("--pred", type=Path, required=True)
    p.add_argument("--k", type=factor, required=True)
    p.add_argument("--clip", action="store_true", help="cut enlarged boxes to the image")
    p.add_argument("--min-conf", type=unit_interval)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_apply)
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    try:
        text, code = args.func(args)
    except AnnotationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (UsageError, theory.DomainError, InvalidFactorError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        if args.output is None:
            sys.stdout.write(text)
        else:
            args.output.write_text(text, encoding="utf-8")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
