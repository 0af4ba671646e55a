"""Grid search over (canny threshold, blur kernel) pairs scored by a
per-frame loss: contour count, plus the hull-vs-ellipse area gap of the
best candidate, plus a fixed penalty when the frame yields no contours.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .errors import FitDegenerateError, FormatError, InputError
from .geometry import fit_ellipse
from .imgio import list_frames, read_image
from .pipeline import DetectionParams, detect, params_with
from .raster import GrayImage

# Zero-contour penalty, calibrated for 640x480 frames; scaled by pixel
# count for other resolutions.
BASE_PENALTY = 1000.0
_BASE_PIXELS = 640 * 480


def penalty_for_frame(width: int, height: int) -> float:
    return BASE_PENALTY * (width * height) / _BASE_PIXELS


@dataclass(frozen=True)
class LossBreakdown:
    """Per-frame loss terms: total = n_contours + a_min + penalty.

    The sum deliberately mixes a contour count with an area in px^2; the
    terms carry no normalization, so their relative weight is what the
    penalty constant and typical frame content make it.
    """

    n_contours: int
    a_min: float
    penalty: float
    total: float


@dataclass(frozen=True)
class LossRecord:
    """Aggregate loss of one (t_canny, k_blur) pair over a frame set."""

    t_canny: float
    k_blur: int
    mean_loss: float
    frame_losses: list[LossBreakdown]


def frame_loss(
    frame: GrayImage,
    t: float,
    k: int,
    base: DetectionParams,
    penalty: Optional[float] = None,
) -> LossBreakdown:
    """Score one frame under (t, k) overriding the base parameters.

    Zero contours scores the flat penalty. Otherwise the area term is the
    absolute gap between the selected candidate's hull area and its fitted
    ellipse area; when nothing passes the filters (or the selected fit is
    degenerate) the minimum gap over all fit-eligible contours is used, so
    bad parameter choices still land on a smooth surface.
    """
    frame = np.asarray(frame)
    if penalty is None:
        penalty = penalty_for_frame(frame.shape[1], frame.shape[0])
    params = params_with(base, t_canny=float(t), k_blur=int(k))
    result = detect(frame, params, keep_contours=True)

    n_c = result.n_contours
    if n_c == 0:
        return LossBreakdown(n_contours=0, a_min=0.0, penalty=penalty, total=penalty)

    a_min: Optional[float] = None
    if result.selected_index is not None and result.pupil is not None and result.pupil.ellipse is not None:
        hull = result.candidates[result.selected_index].hull
        a_min = abs(hull.area_hull - result.pupil.ellipse.area)
    else:
        gaps = []
        for cand, contour in zip(result.candidates, result.contours):
            if len(contour) < 5:
                continue
            try:
                ell = fit_ellipse(contour)
            except FitDegenerateError:
                continue
            gaps.append(abs(cand.hull.area_hull - ell.area))
        if gaps:
            a_min = min(gaps)
        else:
            # No contour admits a fit: degenerate contours behave as
            # zero-area ellipses.
            a_min = min(c.hull.area_hull for c in result.candidates)

    total = n_c + a_min
    return LossBreakdown(n_contours=n_c, a_min=a_min, penalty=0.0, total=total)


FrameSource = Union[str, Path, Sequence[GrayImage]]


def _load_frames(frames: FrameSource) -> list[GrayImage]:
    if isinstance(frames, (str, Path)):
        paths = list_frames(frames)
        if not paths:
            raise InputError(f"{frames}: no frames found")
        loaded = []
        for p in paths:
            try:
                loaded.append(read_image(p))
            except FormatError:
                raise
            except OSError as exc:
                raise FormatError(f"{p}: unreadable frame ({exc})") from exc
        return loaded
    frames = list(frames)
    if not frames:
        raise InputError("empty frame sequence")
    return frames


def grid_search(
    frames: FrameSource,
    t_values: Sequence[float],
    k_values: Sequence[int],
    base: DetectionParams,
    penalty: Optional[float] = None,
) -> list[LossRecord]:
    """Score every (t, k) pair over the frame set.

    Returns one record per pair, sorted ascending by mean loss with ties
    broken by smaller t then smaller k; the best pair is first.
    """
    if not t_values or not k_values:
        raise InputError("t_values and k_values must be non-empty")
    for k in k_values:
        if k < 1 or k % 2 == 0:
            raise InputError(f"blur kernel values must be odd and >= 1, got {k}")
    loaded = _load_frames(frames)

    records = []
    for t in t_values:
        for k in k_values:
            losses = [frame_loss(f, t, k, base, penalty=penalty) for f in loaded]
            mean_loss = sum(l.total for l in losses) / len(losses)
            records.append(
                LossRecord(t_canny=float(t), k_blur=int(k), mean_loss=mean_loss, frame_losses=losses)
            )
    records.sort(key=lambda r: (r.mean_loss, r.t_canny, r.k_blur))
    return records


def write_loss_csv(records: Sequence[LossRecord], path: str | Path) -> None:
    """CSV summary, one row per (t, k) pair in record order."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t_canny", "k_blur", "mean_loss", "n_frames"])
        for r in records:
            writer.writerow([_fmt(r.t_canny), r.k_blur, f"{r.mean_loss:.6f}", len(r.frame_losses)])


def write_loss_jsonl(records: Sequence[LossRecord], path: str | Path) -> None:
    """Per-frame loss detail as JSON lines."""
    with open(path, "w") as fh:
        for r in records:
            for i, fl in enumerate(r.frame_losses):
                fh.write(
                    json.dumps(
                        {
                            "t_canny": r.t_canny,
                            "k_blur": r.k_blur,
                            "frame": i,
                            "n_contours": fl.n_contours,
                            "a_min": fl.a_min,
                            "penalty": fl.penalty,
                            "total": fl.total,
                        }
                    )
                    + "\n"
                )


def _fmt(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else f"{x:g}"
