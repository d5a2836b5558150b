"""Shape descriptor families computed on registered contours.

Families and widths: scalar (23), curvature raw (N), radii raw (N),
fourier10 raw (40), fourier20 raw (80), wavelet raw (200), zernike raw (25),
plus a 32-metric statistical summary of each raw vector. All outputs are
finite by contract; degenerate inputs raise instead of emitting NaN.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from scipy.interpolate import CubicSpline

from .contour_io import Contour, FeatureMatrix
from .errors import (
    DegenerateContour,
    EmptyMask,
    LengthMismatch,
    NonFiniteFeature,
    TooShort,
)
from .preprocess import RegisteredContour, area_centroid, perimeter, signed_area

PointsLike = Union[Contour, RegisteredContour, np.ndarray]


def _points_of(c: PointsLike) -> np.ndarray:
    pts = c if isinstance(c, np.ndarray) else c.points
    pts = np.asarray(pts, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise DegenerateContour("need an (n, 2) array with n >= 3")
    return pts


@dataclass
class FeatureVector:
    names: list[str]
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if len(self.names) != len(self.values):
            raise LengthMismatch("names and values differ in length")
        if len(set(self.names)) != len(self.names):
            raise LengthMismatch("feature names must be unique")
        if not np.all(np.isfinite(self.values)):
            bad = [self.names[i] for i in np.nonzero(~np.isfinite(self.values))[0]]
            raise NonFiniteFeature(f"non-finite feature(s): {bad}")


# --------------------------------------------------------------------------
# polygon geometry
# --------------------------------------------------------------------------

def _cross2(a: np.ndarray, b: np.ndarray) -> float:
    return a[0] * b[1] - a[1] * b[0]


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain; returns hull vertices counter-clockwise."""
    pts = np.unique(points, axis=0)  # sorts lexicographically (x, then y)
    if len(pts) < 3:
        return pts

    def half(iterable):
        chain: list[np.ndarray] = []
        for p in iterable:
            while len(chain) >= 2 and _cross2(chain[-1] - chain[-2],
                                              p - chain[-2]) <= 0:
                chain.pop()
            chain.append(p)
        return chain

    lower = half(pts)
    upper = half(pts[::-1])
    hull = np.array(lower[:-1] + upper[:-1])
    return hull


def max_feret_diameter(hull: np.ndarray) -> float:
    """Largest caliper distance via antipodal-pair rotation around the hull."""
    h = len(hull)
    if h == 1:
        return 0.0
    if h == 2:
        return float(np.hypot(*(hull[1] - hull[0])))
    best = 0.0
    j = 1
    for i in range(h):
        ni = (i + 1) % h
        edge = hull[ni] - hull[i]
        # advance the opposite point while the triangle area keeps growing
        while True:
            nj = (j + 1) % h
            if _cross2(edge, hull[nj] - hull[i]) > _cross2(edge, hull[j] - hull[i]):
                j = nj
            else:
                break
        for p in (hull[i], hull[ni]):
            d = float(np.hypot(*(hull[j] - p)))
            if d > best:
                best = d
    return best


def min_bounding_box(hull: np.ndarray) -> tuple[float, float]:
    """Minimal-area enclosing rectangle (one side flush with a hull edge).

    Returns (long side, short side).
    """
    h = len(hull)
    if h < 3:
        d = float(np.hypot(*(hull[-1] - hull[0]))) if h == 2 else 0.0
        return d, 0.0
    edges = np.roll(hull, -1, axis=0) - hull
    lengths = np.hypot(edges[:, 0], edges[:, 1])
    valid = lengths > 0
    u = edges[valid] / lengths[valid, None]            # (e, 2) edge directions
    v = np.stack([-u[:, 1], u[:, 0]], axis=1)          # normals
    proj_u = u @ hull.T                                # (e, h)
    proj_v = v @ hull.T
    w = proj_u.max(axis=1) - proj_u.min(axis=1)
    d = proj_v.max(axis=1) - proj_v.min(axis=1)
    k = int(np.argmin(w * d))
    a, b = float(w[k]), float(d[k])
    return (a, b) if a >= b else (b, a)


def polygon_moments(points: np.ndarray) -> dict[str, float]:
    """Area moments of the filled polygon up to order 3, by Green's theorem.

    Orientation-independent: a clockwise polygon gives the same values as
    its counter-clockwise reversal.
    """
    x, y = points[:, 0], points[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cr = x * yn - xn * y
    m = {
        "m00": np.sum(cr) / 2.0,
        "m10": np.sum(cr * (x + xn)) / 6.0,
        "m01": np.sum(cr * (y + yn)) / 6.0,
        "m20": np.sum(cr * (x * x + x * xn + xn * xn)) / 12.0,
        "m11": np.sum(cr * (2 * x * y + x * yn + xn * y + 2 * xn * yn)) / 24.0,
        "m02": np.sum(cr * (y * y + y * yn + yn * yn)) / 12.0,
        "m30": np.sum(cr * (x ** 3 + x * x * xn + x * xn * xn + xn ** 3)) / 20.0,
        "m21": np.sum(cr * (x * x * (3 * y + yn) + 2 * x * xn * (y + yn)
                            + xn * xn * (y + 3 * yn))) / 60.0,
        "m12": np.sum(cr * (y * y * (3 * x + xn) + 2 * y * yn * (x + xn)
                            + yn * yn * (x + 3 * xn))) / 60.0,
        "m03": np.sum(cr * (y ** 3 + y * y * yn + y * yn * yn + yn ** 3)) / 20.0,
    }
    if m["m00"] < 0:
        m = {k: -v for k, v in m.items()}
    return {k: float(v) for k, v in m.items()}


def hu_moments(points: np.ndarray) -> np.ndarray:
    """The seven Hu invariants of the filled polygon."""
    m = polygon_moments(points)
    m00 = m["m00"]
    if m00 <= 0:
        raise DegenerateContour("polygon has zero area")
    cx, cy = m["m10"] / m00, m["m01"] / m00
    mu20 = m["m20"] - cx * m["m10"]
    mu02 = m["m02"] - cy * m["m01"]
    mu11 = m["m11"] - cx * m["m01"]
    mu30 = m["m30"] - 3 * cx * m["m20"] + 2 * cx * cx * m["m10"]
    mu21 = m["m21"] - 2 * cx * m["m11"] - cy * m["m20"] + 2 * cx * cx * m["m01"]
    mu12 = m["m12"] - 2 * cy * m["m11"] - cx * m["m02"] + 2 * cy * cy * m["m10"]
    mu03 = m["m03"] - 3 * cy * m["m02"] + 2 * cy * cy * m["m01"]

    n20 = mu20 / m00 ** 2
    n02 = mu02 / m00 ** 2
    n11 = mu11 / m00 ** 2
    n30 = mu30 / m00 ** 2.5
    n21 = mu21 / m00 ** 2.5
    n12 = mu12 / m00 ** 2.5
    n03 = mu03 / m00 ** 2.5

    p = n30 + n12
    q = n21 + n03
    r = n30 - 3 * n12
    s = 3 * n21 - n03
    h1 = n20 + n02
    h2 = (n20 - n02) ** 2 + 4 * n11 ** 2
    h3 = r * r + s * s
    h4 = p * p + q * q
    h5 = r * p * (p * p - 3 * q * q) + s * q * (3 * p * p - q * q)
    h6 = (n20 - n02) * (p * p - q * q) + 4 * n11 * p * q
    h7 = s * p * (p * p - 3 * q * q) - r * q * (3 * p * p - q * q)
    return np.array([h1, h2, h3, h4, h5, h6, h7])


# --------------------------------------------------------------------------
# scalar features (23)
# --------------------------------------------------------------------------

SCALAR_NAMES = [
    "bbox_area", "hull_area", "perimeter", "major_axis", "minor_axis",
    "axis_ratio", "eccentricity", "extent", "solidity", "circularity",
    "roundness", "max_feret", "minbbox_w", "minbbox_h", "bbox_w", "bbox_h",
    "hu_1", "hu_2", "hu_3", "hu_4", "hu_5", "hu_6", "hu_7",
]


def scalar_features(c: PointsLike) -> FeatureVector:
    """The 23 scalar descriptors.

    Axis lengths come from the ellipse with matching second central area
    moments; minbbox_w >= minbbox_h by convention.
    """
    pts = _points_of(c)
    area = abs(signed_area(pts))
    perim = perimeter(pts)
    if area <= 0 or perim <= 0:
        raise DegenerateContour("zero area or perimeter")

    mins = pts.min(axis=0)
    maxs = pts.max(axis=0)
    bbox_w, bbox_h = float(maxs[0] - mins[0]), float(maxs[1] - mins[1])
    bbox_area = bbox_w * bbox_h

    hull = convex_hull(pts)
    if len(hull) < 3:
        raise DegenerateContour("collinear contour")
    hull_area = abs(signed_area(hull))

    m = polygon_moments(pts)
    m00 = m["m00"]
    cx, cy = m["m10"] / m00, m["m01"] / m00
    u20 = m["m20"] / m00 - cx * cx
    u02 = m["m02"] / m00 - cy * cy
    u11 = m["m11"] / m00 - cx * cy
    common = np.sqrt(max((u20 - u02) ** 2 + 4 * u11 * u11, 0.0))
    lam1 = (u20 + u02 + common) / 2.0
    lam2 = (u20 + u02 - common) / 2.0
    major = 4.0 * np.sqrt(max(lam1, 0.0))
    minor = 4.0 * np.sqrt(max(lam2, 0.0))
    if major <= 0:
        raise DegenerateContour("zero-extent moment ellipse")

    axis_ratio = minor / major
    eccentricity = float(np.sqrt(max(1.0 - axis_ratio ** 2, 0.0)))
    feret = max_feret_diameter(hull)
    mb_w, mb_h = min_bounding_box(hull)

    values = np.array([
        bbox_area, hull_area, perim, major, minor,
        axis_ratio, eccentricity, area / bbox_area, area / hull_area,
        4.0 * np.pi * area / perim ** 2, 4.0 * area / (np.pi * major ** 2),
        feret, mb_w, mb_h, bbox_w, bbox_h,
        *hu_moments(pts),
    ])
    return FeatureVector(names=list(SCALAR_NAMES), values=values)


# --------------------------------------------------------------------------
# curvature and radii
# --------------------------------------------------------------------------

def curvature(c: PointsLike) -> np.ndarray:
    """Signed curvature at each vertex from periodic cubic splines x(s), y(s).

    s is cumulative arc length. Sign convention: positive on convex arcs of
    a clockwise-registered contour (a registered circle has curvature
    +1/r everywhere).
    """
    pts = _points_of(c)
    seg = np.roll(pts, -1, axis=0) - pts
    seglen = np.hypot(seg[:, 0], seg[:, 1])
    if np.any(seglen == 0.0):
        keep = seglen > 0.0
        pts = pts[keep]
        if len(pts) < 4:
            raise DegenerateContour("too few distinct points for a spline")
        seg = np.roll(pts, -1, axis=0) - pts
        seglen = np.hypot(seg[:, 0], seg[:, 1])
    s = np.concatenate([[0.0], np.cumsum(seglen)])
    xs = np.concatenate([pts[:, 0], pts[:1, 0]])
    ys = np.concatenate([pts[:, 1], pts[:1, 1]])
    spx = CubicSpline(s, xs, bc_type="periodic")
    spy = CubicSpline(s, ys, bc_type="periodic")
    knots = s[:-1]
    dx, dy = spx(knots, 1), spy(knots, 1)
    ddx, ddy = spx(knots, 2), spy(knots, 2)
    speed_sq = dx * dx + dy * dy
    if np.any(speed_sq == 0.0):
        raise DegenerateContour("stationary spline point")
    return (dy * ddx - dx * ddy) / speed_sq ** 1.5


def radii(c: PointsLike) -> np.ndarray:
    """Distances from the origin (the registered centroid) to each vertex."""
    pts = _points_of(c)
    return np.hypot(pts[:, 0], pts[:, 1])


# --------------------------------------------------------------------------
# elliptical Fourier descriptors
# --------------------------------------------------------------------------

@dataclass
class EfdCoefficients:
    order: int
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    a0: float
    c0: float


def efd(c: PointsLike, order: int) -> EfdCoefficients:
    """Fourier coefficients of the closed polyline, one (a, b, c, d) block
    per harmonic, via exact per-segment integrals of the piecewise-linear
    coordinate functions.

    The contour is parameterized uniformly per vertex (each segment spans an
    equal parameter interval). On arc-length-resampled contours this
    coincides with arc-length parameterization; on raw polylines it makes
    single-harmonic shapes (ellipses sampled uniformly in angle) map to a
    single harmonic exactly.
    """
    if order < 1:
        raise DegenerateContour("order must be >= 1")
    pts = _points_of(c)
    n = len(pts)
    d = np.roll(pts, -1, axis=0) - pts
    # uniform parameter: dt = 1 per segment, period T = n
    phi = 2.0 * np.pi * np.arange(n + 1) / n
    ms = np.arange(1, order + 1)[:, None]          # (M, 1)
    cosm = np.cos(ms * phi)                        # (M, n+1)
    sinm = np.sin(ms * phi)
    dcos = cosm[:, 1:] - cosm[:, :-1]
    dsin = sinm[:, 1:] - sinm[:, :-1]
    const = n / (2.0 * (ms[:, 0] ** 2) * np.pi ** 2)
    a = const * (dcos @ d[:, 0])
    b = const * (dsin @ d[:, 0])
    cc = const * (dcos @ d[:, 1])
    dd = const * (dsin @ d[:, 1])
    a0 = float(np.sum(pts[:, 0] + np.roll(pts[:, 0], -1)) / (2.0 * n))
    c0 = float(np.sum(pts[:, 1] + np.roll(pts[:, 1], -1)) / (2.0 * n))
    return EfdCoefficients(order=order, a=a, b=b, c=cc, d=dd, a0=a0, c0=c0)


def efd_feature_names(order: int) -> list[str]:
    names = []
    for m in range(1, order + 1):
        names += [f"fourier_a{m}", f"fourier_b{m}", f"fourier_c{m}", f"fourier_d{m}"]
    return names


def efd_features(c: PointsLike, order: int) -> FeatureVector:
    """4M coefficients, harmonic-major order, offsets (a0, c0) excluded."""
    e = efd(c, order)
    values = np.column_stack([e.a, e.b, e.c, e.d]).ravel()
    return FeatureVector(names=efd_feature_names(order), values=values)


def reconstruct(e: EfdCoefficients, n_points: int) -> Contour:
    """Evaluate the truncated series (offsets included) at uniform parameters."""
    t = np.arange(n_points) / n_points
    ms = np.arange(1, e.order + 1)[:, None]
    ang = 2.0 * np.pi * ms * t[None, :]
    cosm, sinm = np.cos(ang), np.sin(ang)
    x = e.a0 + e.a @ cosm + e.b @ sinm
    y = e.c0 + e.c @ cosm + e.d @ sinm
    return Contour(id=-1, points=np.column_stack([x, y]))


# --------------------------------------------------------------------------
# Haar wavelet of the radii signal
# --------------------------------------------------------------------------

WAVELET_K = 100


@dataclass
class WaveletCoefficients:
    approx: np.ndarray  # length K
    detail: np.ndarray  # length K


def wavelet_features(r: np.ndarray, k: int = WAVELET_K) -> WaveletCoefficients:
    """Single-level orthonormal Haar transform of the radii signal.

    The signal is first resampled (linear, periodic) from its N samples to
    2K samples, so the output dimension is fixed at 2K regardless of N.
    """
    r = np.asarray(r, dtype=np.float64)
    if r.ndim != 1 or len(r) < 2:
        raise LengthMismatch("radii signal must be a 1D vector of length >= 2")
    n = len(r)
    pos = np.arange(2 * k) * (n / (2.0 * k))
    i0 = np.floor(pos).astype(int) % n
    frac = pos - np.floor(pos)
    resampled = r[i0] * (1.0 - frac) + r[(i0 + 1) % n] * frac
    pairs = resampled.reshape(k, 2)
    sqrt2 = np.sqrt(2.0)
    return WaveletCoefficients(approx=(pairs[:, 0] + pairs[:, 1]) / sqrt2,
                               detail=(pairs[:, 0] - pairs[:, 1]) / sqrt2)


def wavelet_feature_names(k: int = WAVELET_K) -> list[str]:
    return [f"wav_a{i}" for i in range(1, k + 1)] + \
           [f"wav_d{i}" for i in range(1, k + 1)]


# --------------------------------------------------------------------------
# Zernike moments
# --------------------------------------------------------------------------

ZERNIKE_MAX_DEGREE = 8
ZERNIKE_GRID = 64


def zernike_indices(max_degree: int = ZERNIKE_MAX_DEGREE) -> list[tuple[int, int]]:
    return [(n, m) for n in range(max_degree + 1)
            for m in range(n % 2, n + 1, 2)]


ZERNIKE_INDICES = zernike_indices()  # 25 pairs for degree 8


def rasterize_mask(c: PointsLike, grid: int = ZERNIKE_GRID,
                   margin: int = 2) -> np.ndarray:
    """Fill the contour onto a grid x grid boolean mask (even-odd rule)."""
    pts = _points_of(c)
    mins = pts.min(axis=0)
    maxs = pts.max(axis=0)
    side = float(max(maxs[0] - mins[0], maxs[1] - mins[1]))
    if side <= 0:
        raise DegenerateContour("contour has zero extent")
    scale = (grid - 2.0 * margin) / side
    offset = mins - (np.array([grid, grid]) / scale - (maxs - mins)) / 2.0
    poly = (pts - offset) * scale

    centers = np.arange(grid) + 0.5
    px, py = np.meshgrid(centers, centers)        # py: row index, px: col
    x0, y0 = poly[:, 0], poly[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    inside = np.zeros((grid, grid), dtype=bool)
    for ex0, ey0, ex1, ey1 in zip(x0, y0, x1, y1):
        if ey0 == ey1:
            continue
        crosses = (ey0 > py) != (ey1 > py)
        with np.errstate(invalid="ignore", divide="ignore"):
            xcross = ex0 + (py - ey0) * (ex1 - ex0) / (ey1 - ey0)
        inside ^= crosses & (px < xcross)
    return inside


def _radial_poly(n: int, m: int, rho: np.ndarray) -> np.ndarray:
    from math import factorial
    out = np.zeros_like(rho)
    for k in range((n - m) // 2 + 1):
        coef = ((-1) ** k * factorial(n - k)
                / (factorial(k) * factorial((n + m) // 2 - k)
                   * factorial((n - m) // 2 - k)))
        out += coef * rho ** (n - 2 * k)
    return out


def zernike_from_mask(mask: np.ndarray,
                      max_degree: int = ZERNIKE_MAX_DEGREE) -> FeatureVector:
    """Magnitudes |Z_nm| for n <= max_degree, computed over the disk that
    spans the mask (center: foreground centroid, radius: max
    centroid-to-pixel distance)."""
    rows, cols = np.nonzero(mask)
    if len(rows) == 0:
        raise EmptyMask("mask has no foreground pixels")
    y = rows + 0.5
    x = cols + 0.5
    cx, cy = x.mean(), y.mean()
    dx, dy = x - cx, y - cy
    dist = np.hypot(dx, dy)
    radius = dist.max()
    if radius <= 0:
        raise EmptyMask("mask is a single pixel")
    rho = np.minimum(dist / radius, 1.0)
    theta = np.arctan2(dy, dx)
    norm = 1.0 / (np.pi * radius * radius)
    names, values = [], []
    for n, m in zernike_indices(max_degree):
        rad = _radial_poly(n, m, rho)
        zr = np.sum(rad * np.cos(m * theta))
        zi = -np.sum(rad * np.sin(m * theta))
        mag = (n + 1) * norm * np.hypot(zr, zi)
        names.append(f"zernike_{n}_{m}")
        values.append(mag)
    return FeatureVector(names=names, values=np.array(values))


def zernike_features(c: PointsLike, max_degree: int = ZERNIKE_MAX_DEGREE,
                     grid: int = ZERNIKE_GRID) -> FeatureVector:
    return zernike_from_mask(rasterize_mask(c, grid=grid), max_degree)


# --------------------------------------------------------------------------
# 32 statistical metrics
# --------------------------------------------------------------------------

STAT_METRICS = [
    "mean", "std", "var", "min", "max", "range", "median", "q25", "q75",
    "iqr", "skewness", "kurtosis_excess", "rms", "mad_mean", "mad_median",
    "cv", "entropy", "sum_sq", "bending_energy", "zero_cross", "mean_cross",
    "n_maxima", "n_minima", "max_abs", "argmax_pos", "argmin_pos",
    "autocorr1", "autocorr2", "total_var", "total_var_norm",
    "spec_centroid", "spec_flatness",
]


def _circular_autocorr(xc: np.ndarray, lag: int) -> float:
    denom = float(np.sum(xc * xc))
    if denom == 0.0:
        return 0.0
    return float(np.sum(xc * np.roll(xc, -lag)) / denom)


def stats_features(raw: np.ndarray, family_prefix: str) -> FeatureVector:
    """The fixed 32-metric statistical summary of a raw descriptor vector.

    Sequence metrics (crossings, extrema counts, autocorrelation, total
    variation) treat the vector as circular, so every metric except the
    argmax/argmin positions is invariant under cyclic shifts.
    """
    x = np.asarray(raw, dtype=np.float64)
    if x.ndim != 1 or len(x) < 8:
        raise TooShort("need a 1D vector of length >= 8")
    n = len(x)
    mean = float(np.mean(x))
    xc = x - mean
    var = float(np.mean(xc ** 2))
    std = float(np.sqrt(var))
    mn, mx = float(np.min(x)), float(np.max(x))
    rng = mx - mn
    q25, q75 = (float(v) for v in np.quantile(x, [0.25, 0.75]))
    m2 = var
    skew = float(np.mean(xc ** 3) / m2 ** 1.5) if m2 > 0 else 0.0
    kurt = float(np.mean(xc ** 4) / m2 ** 2 - 3.0) if m2 > 0 else 0.0

    # a range below float spacing cannot form 16 distinct bin edges
    if rng > 64 * np.spacing(max(abs(mn), abs(mx), 1.0)):
        hist, _ = np.histogram(x, bins=16, range=(mn, mx))
        p = hist / n
        p = p[p > 0]
        entropy = float(-np.sum(p * np.log2(p)))
    else:
        entropy = 0.0

    nxt = np.roll(x, -1)
    zero_cross = int(np.sum(x * nxt < 0))
    mean_cross = int(np.sum(xc * np.roll(xc, -1) < 0))
    prv = np.roll(x, 1)
    n_maxima = int(np.sum((x > prv) & (x > nxt)))
    n_minima = int(np.sum((x < prv) & (x < nxt)))
    total_var = float(np.sum(np.abs(nxt - x)))

    mag = np.abs(np.fft.rfft(x))
    mag_sum = float(mag.sum())
    spec_centroid = (float(np.sum(np.arange(len(mag)) * mag)) / mag_sum
                     / max(len(mag) - 1, 1)) if mag_sum > 0 else 0.0
    power = mag[1:] ** 2
    pmean = float(power.mean()) if len(power) else 0.0
    if pmean > 0 and np.all(power > 0):
        flatness = float(np.exp(np.mean(np.log(power))) / pmean)
    else:
        flatness = 0.0

    values = np.array([
        mean, std, var, mn, mx, rng, float(np.median(x)), q25, q75, q75 - q25,
        skew, kurt, float(np.sqrt(np.mean(x ** 2))),
        float(np.mean(np.abs(xc))),
        float(np.median(np.abs(x - np.median(x)))),
        std / abs(mean) if mean != 0.0 else 0.0,
        entropy, float(np.sum(x ** 2)), float(np.mean(x ** 2)),
        zero_cross, mean_cross, n_maxima, n_minima,
        float(np.max(np.abs(x))),
        float(np.argmax(x)) / (n - 1), float(np.argmin(x)) / (n - 1),
        _circular_autocorr(xc, 1), _circular_autocorr(xc, 2),
        total_var, total_var / rng if rng > 0 else 0.0,
        spec_centroid, flatness,
    ])
    names = [f"{family_prefix}_stat_{m}" for m in STAT_METRICS]
    return FeatureVector(names=names, values=values)


# --------------------------------------------------------------------------
# family dispatch
# --------------------------------------------------------------------------

FAMILIES = [
    "scalar",
    "curvature_raw", "curvature_stats",
    "radii_raw", "radii_stats",
    "fourier10_raw", "fourier10_stats",
    "fourier20_raw", "fourier20_stats",
    "wavelet_raw", "wavelet_stats",
    "zernike_raw", "zernike_stats",
]

FAMILY_WIDTHS = {
    "scalar": 23,
    "curvature_raw": 100, "curvature_stats": 32,
    "radii_raw": 100, "radii_stats": 32,
    "fourier10_raw": 40, "fourier10_stats": 32,
    "fourier20_raw": 80, "fourier20_stats": 32,
    "wavelet_raw": 200, "wavelet_stats": 32,
    "zernike_raw": 25, "zernike_stats": 32,
}


def _raw_vector(c: RegisteredContour, base: str) -> np.ndarray:
    if base == "curvature":
        return curvature(c)
    if base == "radii":
        return radii(c)
    if base == "fourier10":
        return efd_features(c, 10).values
    if base == "fourier20":
        return efd_features(c, 20).values
    if base == "wavelet":
        w = wavelet_features(radii(c))
        return np.concatenate([w.approx, w.detail])
    if base == "zernike":
        return zernike_features(c).values
    raise KeyError(base)


def _family_vector(c: RegisteredContour, family: str) -> FeatureVector:
    if family == "scalar":
        return scalar_features(c)
    base, _, kind = family.rpartition("_")
    if kind == "raw":
        vec = _raw_vector(c, base)
        if base == "fourier10":
            names = efd_feature_names(10)
        elif base == "fourier20":
            names = efd_feature_names(20)
        elif base == "wavelet":
            names = wavelet_feature_names()
        elif base == "zernike":
            names = [f"zernike_{n}_{m}" for n, m in ZERNIKE_INDICES]
        else:
            names = [f"{base}_{i}" for i in range(1, len(vec) + 1)]
        return FeatureVector(names=names, values=vec)
    if kind == "stats":
        return stats_features(_raw_vector(c, base), base)
    raise KeyError(f"unknown family {family!r}")


def family_names(family: str, n_points: int = 100) -> list[str]:
    if family == "scalar":
        return list(SCALAR_NAMES)
    base, _, kind = family.rpartition("_")
    if kind == "stats":
        return [f"{base}_stat_{m}" for m in STAT_METRICS]
    if base == "fourier10":
        return efd_feature_names(10)
    if base == "fourier20":
        return efd_feature_names(20)
    if base == "wavelet":
        return wavelet_feature_names()
    if base == "zernike":
        return [f"zernike_{n}_{m}" for n, m in ZERNIKE_INDICES]
    return [f"{base}_{i}" for i in range(1, n_points + 1)]


@dataclass
class ExtractResult:
    matrix: FeatureMatrix
    failures: list[tuple[int, str]]


def extract(batch: Sequence[RegisteredContour], family: str) -> ExtractResult:
    """Extract one descriptor family for a batch.

    Per-contour degeneracies do not abort the batch: failing contours are
    dropped from the matrix and reported with their ids.
    """
    if family not in FAMILIES:
        raise KeyError(f"unknown family {family!r}; choose from {FAMILIES}")
    names = family_names(family, n_points=len(batch[0].points) if batch else 100)
    rows, ids, labels = [], [], []
    failures: list[tuple[int, str]] = []
    for rc in batch:
        try:
            fv = _family_vector(rc, family)
        except (DegenerateContour, EmptyMask, TooShort, NonFiniteFeature) as exc:
            failures.append((rc.id, str(exc)))
            continue
        rows.append(fv.values)
        ids.append(rc.id)
        labels.append(rc.class_label)
    values = np.asarray(rows, dtype=np.float64).reshape(len(ids), len(names))
    matrix = FeatureMatrix(names=names, values=values, ids=ids, labels=labels)
    return ExtractResult(matrix=matrix, failures=failures)
