"""Edge-analysis pupil detection: preprocessing, Canny edges, contour and
hull filtering, ellipse fitting, plus tuning, evaluation and profiling tools.
"""

from .edges import CannyConfig, canny
from .errors import ConfigError, FitDegenerateError, FormatError, InputError, PupilKitError
from .evaluation import (
    AnnotatedSet,
    EvalReport,
    FrameError,
    assemble_report,
    evaluate,
    load_annotated_set,
    macro_average_rates,
)
from .geometry import EllipseFit, HullMetrics, centroid, convex_hull, extract_contours, fit_ellipse
from .pipeline import (
    DetectionParams,
    DetectionResult,
    Pupil,
    PupilCandidate,
    detect,
    detect_batch,
    params_with,
)
from .profiling import TimingReport, bench
from .raster import RoiRect, StructuringElement, crop, median_blur, morph_open, to_grayscale
from .synth import Reflection, SessionSpec, SynthScene, make_session, render
from .tuning import LossBreakdown, LossRecord, frame_loss, grid_search

__version__ = "0.1.0"

__all__ = [
    "AnnotatedSet",
    "CannyConfig",
    "ConfigError",
    "DetectionParams",
    "DetectionResult",
    "EllipseFit",
    "EvalReport",
    "FitDegenerateError",
    "FormatError",
    "FrameError",
    "HullMetrics",
    "InputError",
    "LossBreakdown",
    "LossRecord",
    "Pupil",
    "PupilCandidate",
    "PupilKitError",
    "Reflection",
    "RoiRect",
    "SessionSpec",
    "StructuringElement",
    "SynthScene",
    "TimingReport",
    "assemble_report",
    "bench",
    "canny",
    "centroid",
    "convex_hull",
    "crop",
    "detect",
    "detect_batch",
    "evaluate",
    "extract_contours",
    "fit_ellipse",
    "frame_loss",
    "grid_search",
    "load_annotated_set",
    "macro_average_rates",
    "make_session",
    "median_blur",
    "morph_open",
    "params_with",
    "render",
    "to_grayscale",
]
