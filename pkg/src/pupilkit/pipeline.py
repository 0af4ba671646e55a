"""End-to-end pupil detection: crop, grayscale, blur, optional opening,
edge detection, contour filtering, ellipse fit, with per-stage timings.
"""
from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .edges import CannyConfig, canny
from .errors import ConfigError, InputError, FitDegenerateError, PupilKitError
from .geometry import EllipseFit, HullMetrics, centroid, convex_hull, extract_contours, fit_ellipse
from .raster import GrayImage, RoiRect, StructuringElement, as_gray, crop, median_blur, morph_open, to_grayscale

# Stage names in execution order; "morph" appears only when enabled.
STAGE_ORDER = ("crop", "grayscale", "blur", "morph", "canny", "contours", "filtering", "ellipse_fit", "total")

# Tuned operating points for the two supported camera resolutions (w, h).
_RESOLUTION_DEFAULTS = {
    (640, 480): dict(t_canny=24.0, k_blur=23, min_pupil_area=1000.0, max_pupil_area=2000.0),
    (320, 240): dict(t_canny=30.0, k_blur=7, min_pupil_area=100.0, max_pupil_area=300.0),
}


@dataclass(frozen=True)
class DetectionParams:
    """All tunables of the detection pipeline.

    Defaults are the 640x480 operating point; use `for_resolution` for the
    low-resolution profile. Area bounds are hull areas in px^2.
    """

    t_canny: float = 24.0
    k_blur: int = 23
    min_pupil_area: float = 1000.0
    max_pupil_area: float = 2000.0
    t_circularity: float = 0.6
    roi: Optional[RoiRect] = None
    morph_enabled: bool = True
    morph_se: StructuringElement = field(default_factory=StructuringElement)

    def __post_init__(self):
        if self.t_canny <= 0:
            raise ConfigError(f"t_canny must be positive, got {self.t_canny}")
        if self.k_blur < 1 or self.k_blur % 2 == 0:
            raise ConfigError(f"k_blur must be odd and >= 1, got {self.k_blur}")
        if not 0 < self.min_pupil_area < self.max_pupil_area:
            raise ConfigError(
                f"need 0 < min_pupil_area < max_pupil_area, got "
                f"{self.min_pupil_area} and {self.max_pupil_area}"
            )
        if not 0.0 <= self.t_circularity <= 1.0:
            raise ConfigError(f"t_circularity must lie in [0, 1], got {self.t_circularity}")

    @classmethod
    def for_resolution(cls, width: int, height: int) -> "DetectionParams":
        try:
            return cls(**_RESOLUTION_DEFAULTS[(width, height)])
        except KeyError:
            raise ConfigError(
                f"no default parameters for {width}x{height}; supply explicit values"
            ) from None

    def to_json_dict(self) -> dict:
        d = {
            "t_canny": self.t_canny,
            "k_blur": self.k_blur,
            "min_pupil_area": self.min_pupil_area,
            "max_pupil_area": self.max_pupil_area,
            "t_circularity": self.t_circularity,
            "roi": None
            if self.roi is None
            else {"x": self.roi.x, "y": self.roi.y, "w": self.roi.w, "h": self.roi.h},
            "morph_enabled": self.morph_enabled,
            "morph_se": {"shape": self.morph_se.shape, "radius": self.morph_se.radius},
        }
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "DetectionParams":
        """Build params from a JSON document; unknown keys are rejected at
        every level, missing keys fall back to the defaults."""
        if not isinstance(d, dict):
            raise ConfigError(f"params document must be a JSON object, got {type(d).__name__}")
        known = {
            "t_canny", "k_blur", "min_pupil_area", "max_pupil_area",
            "t_circularity", "roi", "morph_enabled", "morph_se",
        }
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown parameter keys: {sorted(unknown)}")
        kwargs = {}
        for key in ("t_canny", "min_pupil_area", "max_pupil_area", "t_circularity"):
            if key in d:
                kwargs[key] = float(d[key])
        if "k_blur" in d:
            kwargs["k_blur"] = int(d["k_blur"])
        if "morph_enabled" in d:
            kwargs["morph_enabled"] = bool(d["morph_enabled"])
        if "roi" in d and d["roi"] is not None:
            r = d["roi"]
            if not isinstance(r, dict) or set(r) != {"x", "y", "w", "h"}:
                raise ConfigError(f"roi must be an object with exactly x, y, w, h; got {r!r}")
            try:
                kwargs["roi"] = RoiRect(x=int(r["x"]), y=int(r["y"]), w=int(r["w"]), h=int(r["h"]))
            except InputError as exc:
                raise ConfigError(str(exc)) from exc
        if "morph_se" in d:
            s = d["morph_se"]
            if not isinstance(s, dict) or set(s) != {"shape", "radius"}:
                raise ConfigError(f"morph_se must be an object with exactly shape, radius; got {s!r}")
            kwargs["morph_se"] = StructuringElement(shape=str(s["shape"]), radius=int(s["radius"]))
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text: str) -> "DetectionParams":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"params file is not valid JSON: {exc}") from exc
        return cls.from_json_dict(doc)

    @classmethod
    def load(cls, path: str | Path) -> "DetectionParams":
        return cls.from_json(Path(path).read_text())


@dataclass(frozen=True)
class PupilCandidate:
    """Per-contour hull metrics plus the two filter verdicts."""

    contour_index: int
    hull: HullMetrics
    passed_area: bool
    passed_circularity: bool


@dataclass(frozen=True)
class Pupil:
    """Selected pupil: center (x, y) and the fitted ellipse when the fit
    succeeded (center falls back to the hull centroid otherwise)."""

    center: tuple[float, float]
    ellipse: Optional[EllipseFit]


@dataclass(frozen=True)
class DetectionResult:
    """Outcome of one detect() call.

    Coordinates (pupil center, hull vertices) are in the cropped ROI frame;
    roi_offset holds the crop origin so callers can map back to full-frame
    coordinates. "No pupil found" is a valid result with pupil = None.
    """

    pupil: Optional[Pupil]
    n_contours: int
    candidates: list[PupilCandidate]
    stage_timings: dict[str, int]  # stage -> nanoseconds
    roi_offset: tuple[int, int] = (0, 0)
    selected_index: Optional[int] = None
    contours: Optional[list[np.ndarray]] = None

    @property
    def pupil_center_full(self) -> Optional[tuple[float, float]]:
        """Pupil center in full-frame coordinates (ROI offset added back)."""
        if self.pupil is None:
            return None
        cx, cy = self.pupil.center
        return cx + self.roi_offset[0], cy + self.roi_offset[1]


def detect(frame: np.ndarray, params: DetectionParams, *, keep_contours: bool = False) -> DetectionResult:
    """Run the full pipeline on one frame (grayscale or RGB).

    Stages run in fixed order with per-stage wall times from a monotonic
    clock. Among candidates passing the area and circularity filters, the
    one with the highest circularity wins (ties: larger hull area, then
    lower contour index).
    """
    timings: dict[str, int] = {}
    t_total = time.perf_counter_ns()

    frame = np.asarray(frame)
    is_rgb = frame.ndim == 3

    t0 = time.perf_counter_ns()
    if params.roi is not None:
        if is_rgb:
            if frame.shape[2] != 3:
                raise InputError(f"expected an (h, w, 3) RGB raster, got shape {frame.shape}")
            params.roi.check_within(frame.shape[1], frame.shape[0])
            work = frame[params.roi.y : params.roi.y + params.roi.h,
                         params.roi.x : params.roi.x + params.roi.w]
        else:
            work = crop(frame, params.roi)
        offset = (params.roi.x, params.roi.y)
    else:
        work = frame
        offset = (0, 0)
    timings["crop"] = time.perf_counter_ns() - t0

    t0 = time.perf_counter_ns()
    gray = to_grayscale(work) if is_rgb else as_gray(work)
    timings["grayscale"] = time.perf_counter_ns() - t0
    if gray.shape[0] < 3 or gray.shape[1] < 3:
        raise InputError(f"frame is smaller than 3x3 after cropping: {gray.shape}")

    t0 = time.perf_counter_ns()
    blurred = median_blur(gray, params.k_blur)
    timings["blur"] = time.perf_counter_ns() - t0

    if params.morph_enabled:
        t0 = time.perf_counter_ns()
        blurred = morph_open(blurred, params.morph_se)
        timings["morph"] = time.perf_counter_ns() - t0

    t0 = time.perf_counter_ns()
    edge_map = canny(blurred, CannyConfig.from_threshold(params.t_canny))
    timings["canny"] = time.perf_counter_ns() - t0

    t0 = time.perf_counter_ns()
    contours = extract_contours(edge_map)
    timings["contours"] = time.perf_counter_ns() - t0

    t0 = time.perf_counter_ns()
    candidates = []
    selected: Optional[int] = None
    best_key: Optional[tuple] = None
    for i, contour in enumerate(contours):
        hull = convex_hull(contour)
        passed_area = params.min_pupil_area <= hull.area_hull <= params.max_pupil_area
        passed_circ = hull.circularity_hull >= params.t_circularity
        candidates.append(
            PupilCandidate(
                contour_index=i, hull=hull,
                passed_area=passed_area, passed_circularity=passed_circ,
            )
        )
        if passed_area and passed_circ:
            key = (hull.circularity_hull, hull.area_hull, -i)
            if best_key is None or key > best_key:
                best_key = key
                selected = i
    timings["filtering"] = time.perf_counter_ns() - t0

    t0 = time.perf_counter_ns()
    pupil: Optional[Pupil] = None
    if selected is not None:
        try:
            ell = fit_ellipse(contours[selected])
            pupil = Pupil(center=(ell.cx, ell.cy), ellipse=ell)
        except FitDegenerateError:
            pupil = Pupil(center=centroid(candidates[selected].hull.vertices), ellipse=None)
    timings["ellipse_fit"] = time.perf_counter_ns() - t0

    timings["total"] = time.perf_counter_ns() - t_total
    return DetectionResult(
        pupil=pupil,
        n_contours=len(contours),
        candidates=candidates,
        stage_timings=timings,
        roi_offset=offset,
        selected_index=selected,
        contours=contours if keep_contours else None,
    )


def detect_batch(frames: Iterable[np.ndarray], params: DetectionParams) -> list[DetectionResult]:
    """Map detect over an ordered frame source.

    All frames must share one resolution; the first offending frame (or the
    first frame-level error) is reported with its index.
    """
    results = []
    shape = None
    for i, frame in enumerate(frames):
        arr = np.asarray(frame)
        if shape is None:
            shape = arr.shape
        elif arr.shape != shape:
            raise InputError(f"frame {i}: resolution {arr.shape} differs from first frame {shape}")
        try:
            results.append(detect(arr, params))
        except PupilKitError as exc:
            raise type(exc)(f"frame {i}: {exc}") from exc
    return results


def params_with(base: DetectionParams, **overrides) -> DetectionParams:
    """Copy of base with selected fields replaced (validation re-runs)."""
    return dataclasses.replace(base, **overrides)
