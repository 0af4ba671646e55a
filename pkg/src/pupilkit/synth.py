"""Deterministic synthetic near-eye frame generator.

Renders a layered eye mock-up (sclera field, iris disc, dark pupil ellipse,
optional corneal glint, optional eyelid band) plus seeded Gaussian noise,
and writes annotated sessions in the layout the evaluation harness reads.
The noise generator is numpy's PCG64, explicitly seeded, so identical
scenes render identical bytes.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError, InputError
from .imgio import write_pgm
from .raster import GrayImage


@dataclass(frozen=True)
class Reflection:
    """Bright glint disc drawn over the eye."""

    x: float
    y: float
    r: float
    intensity: int = 250


@dataclass(frozen=True)
class SynthScene:
    """One renderable frame: geometry, intensity levels, noise and seed.

    The pupil must be darker than the iris, the iris darker than the sclera.
    a >= b > 0; theta in radians; occlusion_fraction is the fraction of
    pupil pixels hidden under the eyelid band.
    """

    width: int
    height: int
    cx: float
    cy: float
    a: float
    b: float
    theta: float = 0.0
    pupil_intensity: int = 20
    iris_intensity: int = 90
    sclera_intensity: int = 170
    noise_sigma: float = 0.0
    reflection: Optional[Reflection] = None
    occlusion_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ConfigError(f"frame extent must be positive, got {self.width}x{self.height}")
        if not 0 < self.b <= self.a:
            raise ConfigError(f"pupil semi-axes need a >= b > 0, got a={self.a}, b={self.b}")
        if not self.pupil_intensity < self.iris_intensity < self.sclera_intensity:
            raise ConfigError(
                "intensity layers must satisfy pupil < iris < sclera, got "
                f"{self.pupil_intensity}, {self.iris_intensity}, {self.sclera_intensity}"
            )
        if not 0.0 <= self.occlusion_fraction <= 1.0:
            raise ConfigError(f"occlusion_fraction must lie in [0, 1], got {self.occlusion_fraction}")
        if self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma must be non-negative, got {self.noise_sigma}")


# Iris disc radius as a multiple of the pupil semi-major axis.
_IRIS_SCALE = 2.5


def _pupil_mask(scene: SynthScene) -> np.ndarray:
    ys, xs = np.mgrid[0 : scene.height, 0 : scene.width]
    dx = xs - scene.cx
    dy = ys - scene.cy
    ct, st = math.cos(scene.theta), math.sin(scene.theta)
    u = dx * ct + dy * st
    v = -dx * st + dy * ct
    return (u / scene.a) ** 2 + (v / scene.b) ** 2 <= 1.0


def render(scene: SynthScene) -> tuple[GrayImage, tuple[float, float]]:
    """Render the scene; returns the frame and the true pupil center."""
    mask = _pupil_mask(scene)
    if not mask.any():
        raise InputError(
            f"pupil at ({scene.cx}, {scene.cy}) lies entirely outside the "
            f"{scene.width}x{scene.height} frame"
        )

    ys, xs = np.mgrid[0 : scene.height, 0 : scene.width]
    img = np.full((scene.height, scene.width), scene.sclera_intensity, dtype=np.float64)
    iris_r = _IRIS_SCALE * scene.a
    iris = (xs - scene.cx) ** 2 + (ys - scene.cy) ** 2 <= iris_r * iris_r
    img[iris] = scene.iris_intensity
    img[mask] = scene.pupil_intensity

    if scene.reflection is not None:
        g = scene.reflection
        glint = (xs - g.x) ** 2 + (ys - g.y) ** 2 <= g.r * g.r
        img[glint] = g.intensity

    if scene.occlusion_fraction > 0.0:
        # Eyelid band from the top: hide exactly the requested share of
        # pupil pixels (full rows, then a partial row down to the count).
        pupil_pts = np.argwhere(mask)  # (y, x) in scan order
        n_cover = int(round(scene.occlusion_fraction * len(pupil_pts)))
        if n_cover > 0:
            y_cut, x_last = (int(v) for v in pupil_pts[n_cover - 1])
            img[:y_cut, :] = scene.sclera_intensity
            img[y_cut, : x_last + 1] = scene.sclera_intensity

    if scene.noise_sigma > 0.0:
        rng = np.random.Generator(np.random.PCG64(scene.seed))
        img = img + rng.standard_normal(img.shape) * scene.noise_sigma

    frame = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    return frame, (float(scene.cx), float(scene.cy))


@dataclass(frozen=True)
class SessionSpec:
    """Distribution over scenes for a written annotated session.

    Pupil hull area is drawn uniformly from area_range (px^2), the axis
    ratio b/a from ratio_range, rotation uniformly from [0, pi). A fixed
    share of frames (occluded_fraction) is rendered with the pupil fully
    hidden; those frames keep their center labels and should be misses.
    """

    width: int = 640
    height: int = 480
    count: int = 150
    seed: int = 0
    area_range: tuple[float, float] = (1100.0, 1900.0)
    ratio_range: tuple[float, float] = (0.75, 1.0)
    noise_sigma: float = 8.0
    pupil_intensity: int = 20
    iris_intensity: int = 90
    sclera_intensity: int = 170
    reflection_prob: float = 0.0
    occluded_fraction: float = 0.0

    def __post_init__(self):
        if self.count < 1:
            raise ConfigError(f"session frame count must be >= 1, got {self.count}")
        if not 0 < self.area_range[0] <= self.area_range[1]:
            raise ConfigError(f"bad area_range {self.area_range}")
        if not 0 < self.ratio_range[0] <= self.ratio_range[1] <= 1.0:
            raise ConfigError(f"bad ratio_range {self.ratio_range}")
        if not 0.0 <= self.occluded_fraction <= 1.0:
            raise ConfigError(f"bad occluded_fraction {self.occluded_fraction}")
        if not 0.0 <= self.reflection_prob <= 1.0:
            raise ConfigError(f"bad reflection_prob {self.reflection_prob}")

    @classmethod
    def from_json_dict(cls, d: dict) -> "SessionSpec":
        if not isinstance(d, dict):
            raise ConfigError(f"session spec must be a JSON object, got {type(d).__name__}")
        known = {
            "width", "height", "count", "seed", "area_range", "ratio_range",
            "noise_sigma", "pupil_intensity", "iris_intensity",
            "sclera_intensity", "reflection_prob", "occluded_fraction",
        }
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown session spec keys: {sorted(unknown)}")
        kwargs = dict(d)
        for rng_key in ("area_range", "ratio_range"):
            if rng_key in kwargs:
                v = kwargs[rng_key]
                if not isinstance(v, (list, tuple)) or len(v) != 2:
                    raise ConfigError(f"{rng_key} must be a [lo, hi] pair, got {v!r}")
                kwargs[rng_key] = (float(v[0]), float(v[1]))
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str | Path) -> "SessionSpec":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"session spec is not valid JSON: {exc}") from exc
        return cls.from_json_dict(doc)


def sample_scenes(spec: SessionSpec) -> list[SynthScene]:
    """The deterministic scene list a session spec expands to."""
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    n_occ = int(round(spec.occluded_fraction * spec.count))
    occluded = np.zeros(spec.count, dtype=bool)
    occluded[rng.permutation(spec.count)[:n_occ]] = True

    scenes = []
    for i in range(spec.count):
        area = rng.uniform(*spec.area_range)
        ratio = rng.uniform(*spec.ratio_range)
        a = math.sqrt(area / (math.pi * ratio))
        b = a * ratio
        theta = rng.uniform(0.0, math.pi)
        margin = _IRIS_SCALE * a + 2.0
        if 2 * margin >= min(spec.width, spec.height):
            raise ConfigError(
                f"pupil area {area:.0f} px^2 leaves no room for the eye in a "
                f"{spec.width}x{spec.height} frame"
            )
        cx = rng.uniform(margin, spec.width - margin)
        cy = rng.uniform(margin, spec.height - margin)
        reflection = None
        if rng.uniform() < spec.reflection_prob:
            # Off-center glint inside the iris, clear of the pupil center.
            ang = rng.uniform(0.0, 2.0 * math.pi)
            d = 1.3 * a
            reflection = Reflection(
                x=cx + d * math.cos(ang), y=cy + d * math.sin(ang), r=max(2.0, 0.15 * a)
            )
        scenes.append(
            SynthScene(
                width=spec.width, height=spec.height,
                cx=cx, cy=cy, a=a, b=b, theta=theta,
                pupil_intensity=spec.pupil_intensity,
                iris_intensity=spec.iris_intensity,
                sclera_intensity=spec.sclera_intensity,
                noise_sigma=spec.noise_sigma,
                reflection=reflection,
                occlusion_fraction=1.0 if occluded[i] else 0.0,
                seed=int(rng.integers(0, 2**63 - 1)),
            )
        )
    return scenes


def make_session(spec: SessionSpec, out_dir: str | Path):
    """Render a session to disk: frames as PGM plus labels.csv.

    Layout matches the harness's marker_session format: numbered frames and
    a labels.csv with header frame,x,y. Returns the loaded AnnotatedSet.
    """
    from .evaluation import load_annotated_set  # local import to avoid a cycle

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scenes = sample_scenes(spec)
    rows = []
    for i, scene in enumerate(scenes):
        frame, (cx, cy) = render(scene)
        name = f"{i:05d}.pgm"
        write_pgm(out / name, frame)
        rows.append((name, f"{cx:.4f}", f"{cy:.4f}"))
    with open(out / "labels.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["frame", "x", "y"])
        writer.writerows(rows)
    return load_annotated_set(out, "marker_session")
