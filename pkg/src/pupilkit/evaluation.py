"""Accuracy evaluation on annotated frame sets.

Supports plain numbered-frame directories with a sibling annotation text
file (one `x y` pair per line) and session directories carrying a
labels.csv. Errors are Euclidean distances between detected and annotated
pupil centers in full-frame coordinates; the headline output is the
cumulative detection-rate curve over 0..20 px.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, FormatError, InputError
from .imgio import list_frames, read_image
from .pipeline import DetectionParams, detect

CURVE_MAX_ERROR_PX = 20

LAYOUTS = ("lpw_frames", "marker_session", "free_movement_session")


@dataclass(frozen=True)
class AnnotatedSet:
    """Frame paths with per-frame pupil-center annotations, index-aligned.

    Frames without a usable annotation (e.g. closed eyes in free-movement
    sessions) are excluded from `frames`/`truth` and listed in `unlabeled`.
    """

    frames: list[Path]
    truth: list[tuple[float, float]]
    resolution: tuple[int, int]  # (w, h)
    unlabeled: list[Path]

    def __post_init__(self):
        if len(self.frames) != len(self.truth):
            raise FormatError(
                f"{len(self.frames)} frames but {len(self.truth)} annotations"
            )
        w, h = self.resolution
        for path, (x, y) in zip(self.frames, self.truth):
            if not (0 <= x < w and 0 <= y < h):
                raise FormatError(f"{path}: annotation ({x}, {y}) outside frame {w}x{h}")


@dataclass(frozen=True)
class FrameError:
    """Per-frame outcome; l2 is None for a miss (no pupil reported)."""

    index: int
    detected: Optional[tuple[float, float]]
    truth: tuple[float, float]
    l2: Optional[float]


@dataclass(frozen=True)
class EvalReport:
    """Detection-rate summary over one annotated set.

    curve[e] is the fraction of all annotated frames whose error is <= e px
    (misses count in the denominator only), for e = 0..20.
    """

    per_frame: list[FrameError]
    curve: np.ndarray
    rate_at_5px: float
    rate_at_10px: float
    mean_error_over_detected: float  # nan when nothing was detected
    n_frames: int
    n_unlabeled: int


def _parse_xy(sx: str, sy: str) -> tuple[float, float]:
    return float(sx), float(sy)


def _load_lpw(root: Path) -> tuple[list[Path], list[tuple[float, float]], list[Path]]:
    frames = list_frames(root)
    if not frames:
        raise FormatError(f"{root}: no frames found")
    txts = sorted(root.glob("*.txt"))
    if len(txts) != 1:
        raise FormatError(f"{root}: expected exactly one annotation .txt file, found {len(txts)}")
    truth = []
    with open(txts[0]) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise FormatError(f"{txts[0]}:{lineno}: expected 'x y', got {line!r}")
            try:
                truth.append(_parse_xy(*parts))
            except ValueError:
                raise FormatError(f"{txts[0]}:{lineno}: non-numeric annotation {line!r}") from None
    if len(truth) != len(frames):
        raise FormatError(
            f"{root}: {len(frames)} frames but {len(truth)} annotation lines"
        )
    return frames, truth, []


def _load_session(root: Path) -> tuple[list[Path], list[tuple[float, float]], list[Path]]:
    labels = root / "labels.csv"
    if not labels.is_file():
        raise FormatError(f"{root}: missing labels.csv")
    frames: list[Path] = []
    truth: list[tuple[float, float]] = []
    unlabeled: list[Path] = []
    with open(labels, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["frame", "x", "y"]:
            raise FormatError(f"{labels}: expected header frame,x,y, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise FormatError(f"{labels}:{lineno}: expected 3 fields, got {len(row)}")
            name, sx, sy = row
            path = root / name
            if not path.is_file():
                raise FormatError(f"{labels}:{lineno}: frame file {name!r} not found")
            if sx == "" and sy == "":
                unlabeled.append(path)
                continue
            try:
                truth.append(_parse_xy(sx, sy))
            except ValueError:
                raise FormatError(f"{labels}:{lineno}: non-numeric annotation {row!r}") from None
            frames.append(path)
    listed = {p.name for p in frames} | {p.name for p in unlabeled}
    on_disk = {p.name for p in list_frames(root)}
    if listed != on_disk:
        raise FormatError(
            f"{root}: labels.csv lists {len(listed)} frames but the directory "
            f"holds {len(on_disk)}"
        )
    if not frames and not unlabeled:
        raise FormatError(f"{labels}: no frame rows")
    return frames, truth, unlabeled


def load_annotated_set(root: str | Path, layout: str) -> AnnotatedSet:
    """Read an annotated frame directory in one of the supported layouts."""
    root = Path(root)
    if not root.is_dir():
        raise FormatError(f"{root}: not a directory")
    if layout == "lpw_frames":
        frames, truth, unlabeled = _load_lpw(root)
    elif layout in ("marker_session", "free_movement_session"):
        frames, truth, unlabeled = _load_session(root)
    else:
        raise InputError(f"unknown layout {layout!r}; expected one of {LAYOUTS}")
    probe = frames[0] if frames else unlabeled[0]
    first = read_image(probe)
    resolution = (first.shape[1], first.shape[0])
    return AnnotatedSet(frames=frames, truth=truth, resolution=resolution, unlabeled=unlabeled)


def assemble_report(
    detections: Sequence[Optional[tuple[float, float]]],
    truths: Sequence[tuple[float, float]],
    n_unlabeled: int = 0,
) -> EvalReport:
    """Build the report from per-frame detections and ground truth.

    This is the pure math half of evaluate(): L2 errors, the cumulative
    curve, and headline rates. Misses stay in every denominator.
    """
    if len(detections) != len(truths):
        raise InputError(f"{len(detections)} detections vs {len(truths)} truths")
    if not truths:
        raise InputError("cannot evaluate an empty set")
    per_frame = []
    errors = []
    for i, (det, tru) in enumerate(zip(detections, truths)):
        if det is None:
            per_frame.append(FrameError(index=i, detected=None, truth=tuple(tru), l2=None))
        else:
            l2 = math.hypot(det[0] - tru[0], det[1] - tru[1])
            per_frame.append(FrameError(index=i, detected=tuple(det), truth=tuple(tru), l2=l2))
            errors.append(l2)

    n = len(per_frame)
    curve = np.zeros(CURVE_MAX_ERROR_PX + 1, dtype=np.float64)
    for e in range(CURVE_MAX_ERROR_PX + 1):
        curve[e] = sum(1 for v in errors if v <= e) / n
    mean_err = float(np.mean(errors)) if errors else float("nan")
    return EvalReport(
        per_frame=per_frame,
        curve=curve,
        rate_at_5px=float(curve[5]),
        rate_at_10px=float(curve[10]),
        mean_error_over_detected=mean_err,
        n_frames=n,
        n_unlabeled=n_unlabeled,
    )


def evaluate(annotated: AnnotatedSet, params: DetectionParams) -> EvalReport:
    """Run detection over the set and score it against the annotations.

    Detected centers are mapped back to full-frame coordinates before the
    error computation, so ROI cropping does not shift the reported errors.
    """
    if not annotated.frames:
        raise InputError("annotated set has no labeled frames")
    w, h = annotated.resolution
    if params.roi is not None:
        try:
            params.roi.check_within(w, h)
        except InputError as exc:
            raise ConfigError(f"params ROI does not fit {w}x{h} frames: {exc}") from exc
    detections: list[Optional[tuple[float, float]]] = []
    for path in annotated.frames:
        frame = read_image(path)
        if (frame.shape[1], frame.shape[0]) != (w, h):
            raise InputError(
                f"{path}: resolution {frame.shape[1]}x{frame.shape[0]} differs from set {w}x{h}"
            )
        result = detect(frame, params)
        detections.append(result.pupil_center_full)
    return assemble_report(detections, annotated.truth, n_unlabeled=len(annotated.unlabeled))


def macro_average_rates(reports: Sequence[EvalReport]) -> dict:
    """Unweighted mean of per-set headline rates across several sets.

    Kept separate from the per-set reports: per-set rates weight frames,
    the macro average weights sets; both are reported rather than folded
    into a single ambiguous overall number.
    """
    if not reports:
        raise InputError("need at least one report to average")
    return {
        "n_sets": len(reports),
        "rate_at_5px": float(np.mean([r.rate_at_5px for r in reports])),
        "rate_at_10px": float(np.mean([r.rate_at_10px for r in reports])),
        "curve": np.mean([r.curve for r in reports], axis=0),
    }


def report_to_json_dict(report: EvalReport) -> dict:
    return {
        "n_frames": report.n_frames,
        "n_unlabeled": report.n_unlabeled,
        "rate_at_5px": report.rate_at_5px,
        "rate_at_10px": report.rate_at_10px,
        "mean_error_over_detected": None
        if math.isnan(report.mean_error_over_detected)
        else report.mean_error_over_detected,
        "curve": [
            {"e_px": e, "rate": float(r)} for e, r in enumerate(report.curve)
        ],
        "per_frame": [
            {
                "index": fe.index,
                "detected": None if fe.detected is None else [fe.detected[0], fe.detected[1]],
                "truth": [fe.truth[0], fe.truth[1]],
                "l2": fe.l2,
            }
            for fe in report.per_frame
        ],
    }


def write_report_json(report: EvalReport, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(report_to_json_dict(report), fh, indent=2)
        fh.write("\n")


def write_curve_csv(report: EvalReport, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["e_px", "rate"])
        for e, rate in enumerate(report.curve):
            writer.writerow([e, f"{float(rate):.6f}"])
