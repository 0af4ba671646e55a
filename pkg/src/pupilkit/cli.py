"""Command-line front door: detect, tune, eval, bench and synth subcommands.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 internal error.
"""
from __future__ import annotations

import argparse
import csv
import sys
import traceback
from pathlib import Path

from .errors import ConfigError, FormatError, InputError, PupilKitError
from .evaluation import LAYOUTS, evaluate, load_annotated_set, write_curve_csv, write_report_json
from .imgio import list_frames, read_image
from .pipeline import DetectionParams, detect
from .profiling import bench, write_timing_csv, write_timing_json
from .synth import SessionSpec, make_session
from .tuning import grid_search, write_loss_csv, write_loss_jsonl

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that exits 1 on usage errors, help on stderr."""

    def error(self, message):
        print(f"error: {message}", file=sys.stderr)
        self.print_help(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FormatError(f"{what} {p} does not exist")
    return p


def _require_dir(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_dir():
        raise FormatError(f"{what} {p} is not a directory")
    return p


def _require_out(path: str) -> Path:
    p = Path(path)
    if p.parent != Path("") and not p.parent.is_dir():
        raise FormatError(f"output directory {p.parent} does not exist")
    return p


def _parse_resolution(spec: str) -> tuple[int, int]:
    try:
        ws, hs = spec.lower().split("x")
        w, h = int(ws), int(hs)
        if w < 1 or h < 1:
            raise ValueError
        return w, h
    except ValueError:
        raise ConfigError(f"bad resolution {spec!r}, expected WIDTHxHEIGHT") from None


def _check_resolution(frame, expected: tuple[int, int], path: Path) -> None:
    w, h = frame.shape[1], frame.shape[0]
    if (w, h) != expected:
        raise InputError(
            f"{path}: resolution {w}x{h} does not match requested {expected[0]}x{expected[1]}"
        )


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise ConfigError(f"bad integer list {text!r}") from None
    if not values:
        raise ConfigError(f"empty value list {text!r}")
    return values


def _log(args, message: str) -> None:
    if args.verbose:
        print(message, file=sys.stderr)


def _cmd_detect(args) -> int:
    in_dir = _require_dir(args.input, "input directory")
    params = DetectionParams.load(_require_file(args.params, "params file"))
    out = _require_out(args.out)
    paths = list_frames(in_dir)
    if not paths:
        raise FormatError(f"{in_dir}: no frames found")
    expected = _parse_resolution(args.resolution) if args.resolution else None

    rows = []
    for path in paths:
        frame = read_image(path)
        if expected is not None:
            _check_resolution(frame, expected, path)
        result = detect(frame, params)
        center = result.pupil_center_full
        if center is None:
            rows.append([path.name, "false", "", "", result.n_contours])
        else:
            rows.append(
                [path.name, "true", f"{center[0]:.4f}", f"{center[1]:.4f}", result.n_contours]
            )
        _log(args, f"{path.name}: {'hit' if center else 'miss'} ({result.n_contours} contours)")
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["frame", "found", "cx", "cy", "n_contours"])
        writer.writerows(rows)
    found = sum(1 for r in rows if r[1] == "true")
    print(f"detected pupil in {found}/{len(rows)} frames -> {out}")
    return EXIT_OK


def _cmd_tune(args) -> int:
    in_dir = _require_dir(args.input, "input directory")
    params = DetectionParams.load(_require_file(args.params, "params file"))
    out = _require_out(args.out)
    detail = _require_out(args.detail) if args.detail else None
    t_values = _int_list(args.canny)
    k_values = _int_list(args.blur)

    records = grid_search(in_dir, t_values, k_values, params)
    write_loss_csv(records, out)
    if detail is not None:
        write_loss_jsonl(records, detail)
    best = records[0]
    print(
        f"best t_canny={best.t_canny:g} k_blur={best.k_blur} "
        f"mean_loss={best.mean_loss:.3f} over {len(best.frame_losses)} frames -> {out}"
    )
    return EXIT_OK


def _cmd_eval(args) -> int:
    in_dir = _require_dir(args.input, "input directory")
    params = DetectionParams.load(_require_file(args.params, "params file"))
    out = _require_out(args.out)
    curve_out = _require_out(args.curve) if args.curve else None

    annotated = load_annotated_set(in_dir, args.layout)
    if args.resolution:
        expected = _parse_resolution(args.resolution)
        if annotated.resolution != expected:
            raise InputError(
                f"{in_dir}: set resolution {annotated.resolution[0]}x{annotated.resolution[1]} "
                f"does not match requested {expected[0]}x{expected[1]}"
            )
    _log(args, f"evaluating {len(annotated.frames)} frames ({len(annotated.unlabeled)} unlabeled)")
    report = evaluate(annotated, params)
    write_report_json(report, out)
    if curve_out is not None:
        write_curve_csv(report, curve_out)
    mean = report.mean_error_over_detected
    print(
        f"rate@5px={report.rate_at_5px:.4f} rate@10px={report.rate_at_10px:.4f} "
        f"mean_error={'n/a' if mean != mean else f'{mean:.3f}px'} "
        f"({report.n_frames} frames, {report.n_unlabeled} unlabeled) -> {out}"
    )
    return EXIT_OK


def _cmd_bench(args) -> int:
    in_dir = _require_dir(args.input, "input directory")
    params = DetectionParams.load(_require_file(args.params, "params file"))
    out = _require_out(args.out)
    json_out = _require_out(args.json) if args.json else None
    if args.repeat < 1:
        raise ConfigError(f"--repeat must be >= 1, got {args.repeat}")
    if args.resolution:
        expected = _parse_resolution(args.resolution)
        paths = list_frames(in_dir)
        if paths:
            _check_resolution(read_image(paths[0]), expected, paths[0])

    report = bench(in_dir, params, repeat=args.repeat)
    write_timing_csv(report, out)
    if json_out is not None:
        write_timing_json(report, json_out)
    total = report.stat("total")
    print(
        f"median total {total.median_ms:.2f} ms over {report.n_frames} frames x "
        f"{report.repeat} sweeps at {report.resolution[0]}x{report.resolution[1]} -> {out}"
    )
    return EXIT_OK


def _cmd_synth(args) -> int:
    spec = SessionSpec.load(_require_file(args.spec, "session spec"))
    out = Path(args.out)
    if out.exists() and not out.is_dir():
        raise FormatError(f"output path {out} exists and is not a directory")
    annotated = make_session(spec, out)
    print(
        f"wrote {len(annotated.frames) + len(annotated.unlabeled)} frames "
        f"({spec.width}x{spec.height}) -> {out}"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pupilkit", description="Edge-analysis pupil detection toolchain")
    parser.add_argument("-v", "--verbose", action="store_true", help="progress output on stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("detect", help="run detection over a frame directory")
    p.add_argument("--input", required=True, help="directory of .pgm/.png frames")
    p.add_argument("--params", required=True, help="detection params JSON file")
    p.add_argument("--out", required=True, help="per-frame results CSV")
    p.add_argument("--resolution", help="expected frame resolution WIDTHxHEIGHT")
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("tune", help="grid-search canny/blur values by detection loss")
    p.add_argument("--input", required=True, help="directory of pupil-visible frames")
    p.add_argument("--params", required=True, help="base detection params JSON file")
    p.add_argument("--canny", required=True, help="comma-separated canny threshold values")
    p.add_argument("--blur", required=True, help="comma-separated odd blur kernel sizes")
    p.add_argument("--out", required=True, help="loss summary CSV")
    p.add_argument("--detail", help="optional per-frame loss detail JSONL")
    p.set_defaults(func=_cmd_tune)

    p = sub.add_parser("eval", help="score detection against annotations")
    p.add_argument("--input", required=True, help="annotated frame directory")
    p.add_argument("--layout", required=True, choices=LAYOUTS, help="annotation layout")
    p.add_argument("--params", required=True, help="detection params JSON file")
    p.add_argument("--out", required=True, help="evaluation report JSON")
    p.add_argument("--curve", help="optional cumulative curve CSV")
    p.add_argument("--resolution", help="expected frame resolution WIDTHxHEIGHT")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("bench", help="measure per-stage detection latency")
    p.add_argument("--input", required=True, help="directory of .pgm/.png frames")
    p.add_argument("--params", required=True, help="detection params JSON file")
    p.add_argument("--repeat", type=int, default=1, help="measured sweeps over the frame set")
    p.add_argument("--out", required=True, help="per-stage timing CSV")
    p.add_argument("--json", help="optional full sample dump JSON")
    p.add_argument("--resolution", help="expected frame resolution WIDTHxHEIGHT")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("synth", help="render an annotated synthetic session")
    p.add_argument("--spec", required=True, help="session spec JSON file")
    p.add_argument("--out", required=True, help="output session directory")
    p.set_defaults(func=_cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigError, FormatError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except PupilKitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
