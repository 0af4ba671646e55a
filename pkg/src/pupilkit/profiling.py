"""Per-stage latency measurement for the detection pipeline.

Runs detection over a frame set, collects the per-stage monotonic-clock
durations each result carries, and aggregates them into percentile
summaries. The first full sweep is a warm-up (JIT compilation, cache
population) and is excluded from the samples.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .errors import InputError, PupilKitError
from .imgio import list_frames, read_image
from .pipeline import STAGE_ORDER, DetectionParams, detect
from .raster import GrayImage

_NS_PER_MS = 1e6


@dataclass(frozen=True)
class StageStats:
    """Millisecond percentiles of one stage's duration samples."""

    stage: str
    min_ms: float
    p25_ms: float
    median_ms: float
    p75_ms: float
    max_ms: float


@dataclass(frozen=True)
class TimingReport:
    """Aggregated per-stage timings for one benchmark run."""

    stages: list[StageStats]
    samples_ns: dict[str, list[int]]
    n_frames: int
    repeat: int
    resolution: tuple[int, int]  # (w, h)
    params: DetectionParams
    peak_rss_mb: Optional[float]

    def stat(self, stage: str) -> StageStats:
        for s in self.stages:
            if s.stage == stage:
                return s
        raise KeyError(stage)


def _peak_rss_mb() -> Optional[float]:
    try:
        import resource

        kb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
        return kb / 1024.0
    except Exception:
        return None


FrameSource = Union[str, Path, Sequence[GrayImage]]


def bench(frames: FrameSource, params: DetectionParams, repeat: int = 1) -> TimingReport:
    """Time detection over frames x repeat sweeps (plus a discarded warm-up).

    Frames may be a directory of images or an in-memory sequence. Runs
    single-threaded so per-stage durations stay attributable.
    """
    if isinstance(frames, (str, Path)):
        paths = list_frames(frames)
        if not paths:
            raise InputError(f"{frames}: no frames found")
        loaded = [read_image(p) for p in paths]
    else:
        loaded = [np.asarray(f) for f in frames]
    if not loaded:
        raise InputError("benchmark needs at least one frame")
    if repeat < 1:
        raise InputError(f"repeat must be >= 1, got {repeat}")

    samples: dict[str, list[int]] = {}
    for sweep in range(repeat + 1):  # sweep 0 is the warm-up
        for i, frame in enumerate(loaded):
            try:
                result = detect(frame, params)
            except PupilKitError as exc:
                done = sum(len(v) for v in samples.values())
                raise type(exc)(
                    f"sweep {sweep}, frame {i}: {exc} ({done} stage samples collected)"
                ) from exc
            if sweep == 0:
                continue
            for stage, ns in result.stage_timings.items():
                samples.setdefault(stage, []).append(ns)

    stages = []
    for stage in STAGE_ORDER:
        if stage not in samples:
            continue
        q = np.percentile(np.asarray(samples[stage], dtype=np.float64), [0, 25, 50, 75, 100])
        stages.append(
            StageStats(
                stage=stage,
                min_ms=q[0] / _NS_PER_MS,
                p25_ms=q[1] / _NS_PER_MS,
                median_ms=q[2] / _NS_PER_MS,
                p75_ms=q[3] / _NS_PER_MS,
                max_ms=q[4] / _NS_PER_MS,
            )
        )
    h, w = loaded[0].shape[:2]
    return TimingReport(
        stages=stages,
        samples_ns=samples,
        n_frames=len(loaded),
        repeat=repeat,
        resolution=(w, h),
        params=params,
        peak_rss_mb=_peak_rss_mb(),
    )


def write_timing_csv(report: TimingReport, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["stage", "min_ms", "p25_ms", "median_ms", "p75_ms", "max_ms"])
        for s in report.stages:
            writer.writerow(
                [s.stage]
                + [f"{v:.4f}" for v in (s.min_ms, s.p25_ms, s.median_ms, s.p75_ms, s.max_ms)]
            )


def write_timing_json(report: TimingReport, path: str | Path) -> None:
    """Full sample dump: summary stats plus raw nanosecond samples."""
    doc = {
        "n_frames": report.n_frames,
        "repeat": report.repeat,
        "resolution": {"w": report.resolution[0], "h": report.resolution[1]},
        "params": report.params.to_json_dict(),
        "peak_rss_mb": report.peak_rss_mb,
        "stages": [
            {
                "stage": s.stage,
                "min_ms": s.min_ms,
                "p25_ms": s.p25_ms,
                "median_ms": s.median_ms,
                "p75_ms": s.p75_ms,
                "max_ms": s.max_ms,
            }
            for s in report.stages
        ],
        "samples_ns": report.samples_ns,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
