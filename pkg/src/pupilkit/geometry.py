"""Contour extraction, convex hulls, polygon metrics and ellipse fitting.

Contours are (N, 2) integer arrays of (x, y) pixel coordinates. Hull
vertices are ordered so the shoelace area is non-negative.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .edges import EdgeMap
from .errors import FitDegenerateError, InputError

_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class HullMetrics:
    """Convex hull of a contour with the metrics used for pupil filtering.

    circularity_hull = 4*pi*area / circumference**2; 1.0 for a circle,
    0.0 for degenerate (collinear or single-point) hulls.
    """

    vertices: np.ndarray  # (M, 2) float64, shoelace-positive order
    area_hull: float
    circumference_hull: float
    circularity_hull: float


@dataclass(frozen=True)
class EllipseFit:
    """Ellipse in center / semi-axes / rotation form; a >= b > 0, theta in [0, pi)."""

    cx: float
    cy: float
    a: float
    b: float
    theta: float

    @property
    def area(self) -> float:
        return math.pi * self.a * self.b


def extract_contours(edges: EdgeMap) -> list[np.ndarray]:
    """Group edge pixels into 8-connected components.

    Returns one (N, 2) int array of (x, y) points per component, points in
    row-major scan order, components ordered by first-encountered pixel.
    Single-pixel components are retained. The list length is the contour
    count used by the tuning loss.
    """
    edges = np.asarray(edges)
    if edges.ndim != 2 or edges.dtype != np.bool_:
        raise InputError(f"expected a 2D boolean edge map, got {edges.dtype} {edges.shape}")
    labels, n = ndimage.label(edges, structure=_EIGHT)
    if n == 0:
        return []
    ys, xs = np.nonzero(edges)
    labs = labels[ys, xs]
    pts = np.column_stack((xs, ys)).astype(np.int32)
    order = np.argsort(labs, kind="stable")  # stable keeps scan order per label
    sorted_labs = labs[order]
    starts = np.searchsorted(sorted_labs, np.arange(1, n + 2))
    pts = pts[order]
    contours = [pts[starts[i] : starts[i + 1]] for i in range(n)]
    contours.sort(key=lambda c: (int(c[0, 1]), int(c[0, 0])))
    return contours


def _monotone_chain(points: np.ndarray) -> np.ndarray:
    """Convex hull vertices via monotone chain; collinear points dropped."""
    pts = sorted({(float(x), float(y)) for x, y in points})
    if len(pts) <= 2:
        return np.asarray(pts, dtype=np.float64)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[tuple[float, float]] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[tuple[float, float]] = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) <= 2:
        # All input points collinear: keep the two extreme endpoints.
        hull = [pts[0], pts[-1]]
    return np.asarray(hull, dtype=np.float64)


def shoelace_area(vertices: np.ndarray) -> float:
    """Signed shoelace area; positive for the ordering _monotone_chain emits."""
    v = np.asarray(vertices, dtype=np.float64)
    if len(v) < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def perimeter(vertices: np.ndarray) -> float:
    """Closed-cycle perimeter: sum of vertex-to-vertex Euclidean lengths."""
    v = np.asarray(vertices, dtype=np.float64)
    if len(v) < 2:
        return 0.0
    d = np.roll(v, -1, axis=0) - v
    return float(np.hypot(d[:, 0], d[:, 1]).sum())


def convex_hull(contour: np.ndarray) -> HullMetrics:
    """Convex hull metrics of a point set: area, circumference, circularity.

    Degenerate inputs (< 3 non-collinear points) yield area 0 and
    circularity 0, which downstream filtering discards.
    """
    pts = np.asarray(contour)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) == 0:
        raise InputError(f"contour must be a non-empty (N, 2) point array, got shape {pts.shape}")
    hull = _monotone_chain(pts)
    area = shoelace_area(hull)
    circ = perimeter(hull)
    circularity = 0.0 if area <= 0.0 or circ <= 0.0 else 4.0 * math.pi * area / (circ * circ)
    return HullMetrics(
        vertices=hull, area_hull=area, circumference_hull=circ, circularity_hull=circularity
    )


def centroid(vertices: np.ndarray) -> tuple[float, float]:
    """Area-weighted polygon centroid; arithmetic mean for degenerate input."""
    v = np.asarray(vertices, dtype=np.float64)
    if v.ndim != 2 or v.shape[1] != 2 or len(v) == 0:
        raise InputError(f"centroid needs a non-empty (N, 2) point array, got shape {v.shape}")
    if len(v) >= 3:
        x, y = v[:, 0], v[:, 1]
        xn, yn = np.roll(x, -1), np.roll(y, -1)
        cross = x * yn - xn * y
        area2 = cross.sum()
        if abs(area2) > 1e-12:
            cx = float(((x + xn) * cross).sum() / (3.0 * area2))
            cy = float(((y + yn) * cross).sum() / (3.0 * area2))
            return cx, cy
    return float(v[:, 0].mean()), float(v[:, 1].mean())


# Constraint matrix of the ellipse-specific normalization 4AC - B^2 = 1,
# inverted analytically (quadratic coefficient block only).
_C1_INV = np.array([[0.0, 0.0, 0.5], [0.0, -1.0, 0.0], [0.5, 0.0, 0.0]])


def fit_ellipse(points: np.ndarray) -> EllipseFit:
    """Direct least-squares conic fit constrained to ellipses.

    Solves the 6-parameter conic fit with the 4AC - B^2 = 1 normalization
    via the reduced 3x3 eigenproblem, on mean-centered coordinates for
    stability. Raises FitDegenerateError when the input is underdetermined
    (< 5 points), collinear, or the best conic is not a real ellipse.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise InputError(f"expected an (N, 2) point array, got shape {pts.shape}")
    if len(pts) < 5:
        raise FitDegenerateError(f"ellipse fit needs >= 5 points, got {len(pts)}")

    mean = pts.mean(axis=0)
    x = pts[:, 0] - mean[0]
    y = pts[:, 1] - mean[1]

    d1 = np.column_stack((x * x, x * y, y * y))
    d2 = np.column_stack((x, y, np.ones_like(x)))
    s1 = d1.T @ d1
    s2 = d1.T @ d2
    s3 = d2.T @ d2
    try:
        t = -np.linalg.solve(s3, s2.T)
        m = _C1_INV @ (s1 + s2 @ t)
        eigval, eigvec = np.linalg.eig(m)
    except np.linalg.LinAlgError as exc:
        raise FitDegenerateError(f"degenerate point scatter: {exc}") from exc

    if np.iscomplexobj(eigvec):
        real = np.abs(eigval.imag) < 1e-9
        eigval, eigvec = eigval.real, eigvec.real
    else:
        real = np.ones(3, dtype=bool)
    cond = 4.0 * eigvec[0] * eigvec[2] - eigvec[1] ** 2
    valid = np.flatnonzero(real & (cond > 0) & np.isfinite(eigval))
    if len(valid) == 0:
        raise FitDegenerateError("no eigenvector satisfies the ellipse constraint")
    best = valid[np.argmax(cond[valid])]
    a1 = eigvec[:, best]
    a2 = t @ a1
    conic = np.concatenate((a1, a2))
    return _conic_to_ellipse(conic, shift=mean)


def _conic_to_ellipse(conic: np.ndarray, shift: np.ndarray) -> EllipseFit:
    """Convert A x^2 + B xy + C y^2 + D x + E y + F = 0 to center/axes/rotation."""
    A, B, C, D, E, F = (float(v) for v in conic)
    den = 4.0 * A * C - B * B
    if den <= 0 or not math.isfinite(den):
        raise FitDegenerateError("fitted conic is not an ellipse")
    cx = (B * E - 2.0 * C * D) / den
    cy = (B * D - 2.0 * A * E) / den
    # Constant term after translating the conic to its center.
    fc = A * cx * cx + B * cx * cy + C * cy * cy + D * cx + E * cy + F
    if A + C < 0:  # normalize sign so the quadratic form is positive definite
        A, B, C, fc = -A, -B, -C, -fc
    q = np.array([[A, B / 2.0], [B / 2.0, C]])
    lam, vec = np.linalg.eigh(q)
    if lam[0] <= 0 or fc >= 0:
        raise FitDegenerateError("fitted conic is degenerate or imaginary")
    axes = np.sqrt(-fc / lam)  # descending: smaller eigenvalue -> major axis
    major = vec[:, 0]
    theta = math.atan2(major[1], major[0]) % math.pi
    a, b = float(axes[0]), float(axes[1])
    if not (math.isfinite(a) and math.isfinite(b) and a > 0 and b > 0):
        raise FitDegenerateError("fitted axes are not finite and positive")
    if abs(lam[0] - lam[1]) < 1e-12 * max(abs(lam[0]), abs(lam[1])):
        theta = 0.0  # circle: rotation is arbitrary, pin it
    return EllipseFit(cx=float(cx + shift[0]), cy=float(cy + shift[1]), a=a, b=b, theta=theta)
