"""Shared geometry builders and independent oracles for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from cellshapes.contour_io import Contour


def circle_points(n: int = 500, r: float = 1.0, phase: float = 0.0) -> np.ndarray:
    t = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    return np.column_stack([r * np.cos(t + phase), r * np.sin(t + phase)])


def ellipse_points(a: float, b: float, n: int = 500, phase: float = 0.0) -> np.ndarray:
    t = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    return np.column_stack([a * np.cos(t + phase), b * np.sin(t + phase)])


def polar_shape(harmonics, n: int = 400, base: float = 1.0) -> np.ndarray:
    """Smooth polar curve r = base + sum a_m cos(m t + phi)."""
    t = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    r = np.full(n, float(base))
    for m, amp, phi in harmonics:
        r = r + amp * np.cos(m * t + phi)
    assert r.min() > 0, "polar shape must stay star-shaped"
    return np.column_stack([r * np.cos(t), r * np.sin(t)])


def smooth_random_contours(count: int, seed: int = 0, max_harmonic: int = 6,
                           total_amp: float = 0.35, elongate: bool = False) -> list[Contour]:
    """Low-order random polar shapes: smooth enough for spline/quadrature
    oracles. With elongate=True an affine stretch gives every shape an
    unambiguous major axis."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        k = int(rng.integers(2, 5))
        ms = rng.choice(np.arange(1, max_harmonic + 1), size=k, replace=False)
        amps = rng.uniform(0.2, 1.0, size=k)
        amps *= total_amp * rng.uniform(0.5, 1.0) / amps.sum()
        harm = [(int(m), float(a), float(rng.uniform(0, 2 * np.pi)))
                for m, a in zip(ms, amps)]
        pts = polar_shape(harm, n=int(rng.integers(200, 400)))
        if elongate:
            pts = pts @ np.diag([float(rng.uniform(1.4, 2.2)), 1.0])
        theta = float(rng.uniform(0, 2 * np.pi))
        c, s = np.cos(theta), np.sin(theta)
        pts = pts @ np.array([[c, s], [-s, c]])
        out.append(Contour(id=i, points=pts))
    return out


# --------------------------------------------------------------------------
# rasterization oracle (independent of the package's zernike rasterizer)
# --------------------------------------------------------------------------

def fill_mask_inclusive(points: np.ndarray, height: int, width: int) -> np.ndarray:
    """Pixel (r, c) is filled when its center lies inside the polygon or
    within 1e-9 of an edge. Points are in (x, y) = (c + 0.5, -(r + 0.5))
    convention, matching traced contours."""
    cols = np.arange(width) + 0.5
    rows = -(np.arange(height) + 0.5)
    cx, cy = np.meshgrid(cols, rows)  # (h, w)
    px = cx.ravel()
    py = cy.ravel()
    x0, y0 = points[:, 0], points[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    inside = np.zeros(px.shape, dtype=bool)
    for ex0, ey0, ex1, ey1 in zip(x0, y0, x1, y1):
        if ey0 != ey1:
            crosses = (ey0 > py) != (ey1 > py)
            with np.errstate(invalid="ignore", divide="ignore"):
                xc = ex0 + (py - ey0) * (ex1 - ex0) / (ey1 - ey0)
            inside ^= crosses & (px < xc)
    # distance to edges: on-boundary pixels count as inside
    near = np.zeros(px.shape, dtype=bool)
    for ex0, ey0, ex1, ey1 in zip(x0, y0, x1, y1):
        dx, dy = ex1 - ex0, ey1 - ey0
        L2 = dx * dx + dy * dy
        if L2 == 0:
            continue
        t = np.clip(((px - ex0) * dx + (py - ey0) * dy) / L2, 0.0, 1.0)
        d2 = (px - (ex0 + t * dx)) ** 2 + (py - (ey0 + t * dy)) ** 2
        near |= d2 <= 1e-18
    return (inside | near).reshape(height, width)


def random_blob_map(seed: int, size: int = 48, n_blobs: int = 3) -> np.ndarray:
    """Disjoint random star-shaped blobs rasterized onto an integer grid."""
    rng = np.random.default_rng(seed)
    grid = np.zeros((size, size), dtype=np.int64)
    yy, xx = np.mgrid[0:size, 0:size]
    centers = []
    next_id = 1
    for _ in range(n_blobs * 4):
        if next_id > n_blobs:
            break
        cx = rng.uniform(10, size - 10)
        cy = rng.uniform(10, size - 10)
        r0 = rng.uniform(4.0, 8.0)
        if any(np.hypot(cx - ox, cy - oy) < r0 + orad + 3 for ox, oy, orad in centers):
            continue
        theta = np.arctan2(yy + 0.5 - cy, xx + 0.5 - cx)
        m = int(rng.integers(2, 5))
        radius = r0 * (1 + 0.25 * np.cos(m * theta + rng.uniform(0, 2 * np.pi)))
        mask = np.hypot(xx + 0.5 - cx, yy + 0.5 - cy) <= radius
        grid[mask] = next_id
        centers.append((cx, cy, r0 * 1.25))
        next_id += 1
    return grid


@pytest.fixture(scope="session")
def registered_circle():
    from cellshapes.preprocess import normalize
    return normalize(Contour(id=0, points=circle_points(3000)))
