"""Contour normalization and iterative rotational registration.

A contour becomes a RegisteredContour through a fixed pipeline: resample to
N points at uniform arc length, force clockwise winding (negative shoelace
area in standard xy), rotate the covariance major axis onto +x (180-degree
ambiguity broken by non-negative x-skewness), move the polygon area centroid
to the origin, scale the polygon area to 1, and anchor index 0 at the point
of maximal x (ties: maximal y). Batches are then registered by iterated
rotation-only Procrustes against the running mean shape.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .contour_io import Contour
from .errors import DegenerateContour, NotNormalized

N_POINTS = 100
AREA_TOL = 1e-9
CENTROID_TOL = 1e-9
_VALIDATE_TOL = 1e-8  # registration drifts ~1e-15/rotation; leave headroom


@dataclass
class RegisteredContour:
    id: int
    points: np.ndarray  # (N_POINTS, 2), clockwise, centroid 0, area 1
    class_label: Optional[int] = None
    source: Optional[Contour] = None


@dataclass
class MeanShape:
    points: np.ndarray
    iterations_used: int
    final_delta: float
    objective_history: list[float]


def signed_area(points: np.ndarray) -> float:
    """Shoelace area; positive for counter-clockwise winding."""
    x, y = points[:, 0], points[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    return 0.5 * float(np.sum(x * yn - xn * y))


def area_centroid(points: np.ndarray) -> np.ndarray:
    """Polygon area centroid (not the vertex mean)."""
    x, y = points[:, 0], points[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = 0.5 * np.sum(cross)
    if abs(a) < 1e-300:
        raise DegenerateContour("zero-area polygon has no centroid")
    cx = np.sum((x + xn) * cross) / (6.0 * a)
    cy = np.sum((y + yn) * cross) / (6.0 * a)
    return np.array([cx, cy])


def perimeter(points: np.ndarray) -> float:
    return float(np.sum(np.hypot(*(np.roll(points, -1, axis=0) - points).T)))


def resample(c: Contour, n: int = N_POINTS) -> Contour:
    """Resample the closed polyline to n points at uniform arc-length spacing.

    Linear interpolation along edges; output point 0 is input point 0.
    """
    if n < 3:
        raise DegenerateContour(f"cannot resample to {n} < 3 points")
    pts = c.points
    seg = np.roll(pts, -1, axis=0) - pts
    seglen = np.hypot(seg[:, 0], seg[:, 1])
    total = seglen.sum()
    if total <= 0.0:
        raise DegenerateContour(f"contour {c.id}: zero perimeter")
    cum = np.concatenate([[0.0], np.cumsum(seglen)])  # len(pts)+1, cum[-1]=total
    targets = np.arange(n) * (total / n)
    idx = np.searchsorted(cum, targets, side="right") - 1
    idx = np.clip(idx, 0, len(pts) - 1)
    frac = (targets - cum[idx]) / np.where(seglen[idx] > 0, seglen[idx], 1.0)
    out = pts[idx] + frac[:, None] * seg[idx]
    return Contour(id=c.id, points=out, class_label=c.class_label)


def _rotation(theta: float) -> np.ndarray:
    ct, st = np.cos(theta), np.sin(theta)
    return np.array([[ct, -st], [st, ct]])


def normalize(c: Contour, n: int = N_POINTS) -> RegisteredContour:
    """Run the full normalization pipeline; see module docstring for the order."""
    rs = resample(c, n).points

    a = signed_area(rs)
    if abs(a) < 1e-12 * max(perimeter(rs) ** 2, 1e-30):
        raise DegenerateContour(f"contour {c.id}: zero or collinear area")
    if a > 0:
        rs = rs[::-1].copy()

    centered = rs - rs.mean(axis=0)
    cov = centered.T @ centered / len(rs)
    eigvals, eigvecs = np.linalg.eigh(cov)
    major = eigvecs[:, int(np.argmax(eigvals))]
    rs = rs @ _rotation(-np.arctan2(major[1], major[0])).T
    xc = rs[:, 0] - rs[:, 0].mean()
    if np.sum(xc ** 3) < 0:
        rs = -rs  # 180-degree flip keeps winding, fixes skewness sign

    rs = rs - area_centroid(rs)
    rs = rs / np.sqrt(abs(signed_area(rs)))

    start = int(np.lexsort((rs[:, 1], rs[:, 0]))[-1])  # max x, ties: max y
    rs = np.roll(rs, -start, axis=0)
    return RegisteredContour(id=c.id, points=rs, class_label=c.class_label,
                             source=c)


def _check_registered(batch: Sequence[RegisteredContour]) -> int:
    if not batch:
        raise NotNormalized("empty batch")
    n = len(batch[0].points)
    for rc in batch:
        if len(rc.points) != n:
            raise NotNormalized(f"contour {rc.id}: point count {len(rc.points)} != {n}")
        if abs(signed_area(rc.points) + 1.0) > _VALIDATE_TOL:
            raise NotNormalized(f"contour {rc.id}: area not normalized to 1 (cw)")
        if np.max(np.abs(area_centroid(rc.points))) > _VALIDATE_TOL:
            raise NotNormalized(f"contour {rc.id}: centroid not at origin")
    return n


def optimal_rotation(points: np.ndarray, reference: np.ndarray) -> float:
    """Angle minimizing sum of squared distances to the reference, by index
    correspondence: theta* = atan2(sum(x*vy - y*vx), sum(x*vx + y*vy))."""
    x, y = points[:, 0], points[:, 1]
    vx, vy = reference[:, 0], reference[:, 1]
    return float(np.arctan2(np.sum(x * vy - y * vx), np.sum(x * vx + y * vy)))


def rotate_to_reference(rc: RegisteredContour, reference: np.ndarray) -> RegisteredContour:
    """One-shot best-fit rotation onto a stored reference shape."""
    theta = optimal_rotation(rc.points, reference)
    return RegisteredContour(id=rc.id, points=rc.points @ _rotation(theta).T,
                             class_label=rc.class_label, source=rc.source)


def _normalized_mean(stack: np.ndarray) -> np.ndarray:
    m = stack.mean(axis=0)
    m = m - area_centroid(m)
    return m / np.sqrt(abs(signed_area(m)))


def procrustes_align(
    batch: Sequence[RegisteredContour],
    threshold: float = 1e-6,
    max_iter: int = 100,
) -> tuple[list[RegisteredContour], MeanShape]:
    """Iteratively rotate all contours toward the running mean shape.

    Each iteration recomputes the mean (pointwise, re-centered, re-scaled to
    area 1), rotates every contour by its closed-form optimal angle, and
    stops once the RMS change of the mean falls below the threshold. The
    objective (sum of squared distances to the mean used for that rotation)
    is recorded per iteration.

    The problem is invariant under rotating every contour and the mean
    together, and the bare iteration can pick up a steady drift along that
    null direction (a limit cycle where the mean never stops moving), so
    each new mean is gauge-anchored by rotating the whole system back onto
    the previous mean's orientation. This changes neither the objective nor
    any relative alignment.
    """
    _check_registered(batch)
    stack = np.stack([rc.points for rc in batch])  # (B, N, 2)
    mean = _normalized_mean(stack)
    objective_history: list[float] = []
    iterations = 0
    delta = np.inf
    for iterations in range(1, max_iter + 1):
        sin_num = np.einsum("bn,n->b", stack[:, :, 0], mean[:, 1]) - \
            np.einsum("bn,n->b", stack[:, :, 1], mean[:, 0])
        cos_num = np.einsum("bn,n->b", stack[:, :, 0], mean[:, 0]) + \
            np.einsum("bn,n->b", stack[:, :, 1], mean[:, 1])
        theta = np.arctan2(sin_num, cos_num)
        ct, st = np.cos(theta), np.sin(theta)
        rx = ct[:, None] * stack[:, :, 0] - st[:, None] * stack[:, :, 1]
        ry = st[:, None] * stack[:, :, 0] + ct[:, None] * stack[:, :, 1]
        stack = np.stack([rx, ry], axis=2)
        objective_history.append(float(np.sum((stack - mean) ** 2)))
        new_mean = _normalized_mean(stack)
        # gauge anchor: absorb any common rotation into the old orientation
        phi = optimal_rotation(new_mean, mean)
        if phi != 0.0:
            rot = _rotation(phi)
            new_mean = new_mean @ rot.T
            stack = stack @ rot.T
        delta = float(np.sqrt(np.mean((new_mean - mean) ** 2)))
        mean = new_mean
        if delta < threshold:
            break
    aligned = [
        RegisteredContour(id=rc.id, points=stack[i].copy(),
                          class_label=rc.class_label, source=rc.source)
        for i, rc in enumerate(batch)
    ]
    return aligned, MeanShape(points=mean, iterations_used=iterations,
                              final_delta=delta,
                              objective_history=objective_history)
