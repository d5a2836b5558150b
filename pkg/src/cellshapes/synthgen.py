"""Balanced synthetic dataset of noisy contours for the five shape classes.

Every contour is built from a class-specific polar base shape r(theta),
multiplied by smooth radial noise, jittered per point, then randomly rotated
and area-scaled (both removed later by normalization). Generation is fully
deterministic: contour i draws from an independent PCG64 stream seeded with
(seed, i), so output is byte-identical across runs and platforms and
independent of generation order.

Base shapes:
  0 circular    r = 1
  1 elliptical  ellipse, axis ratio U[0.25, 0.7], spindle taper
                r *= (1 - tau sin^2 theta), tau ~ U[0, 0.3]
  2 teardrop    r = 1 + p cos theta + q cos^2(theta/2), p ~ U[0.25, 0.55],
                q ~ U[0.1, 0.35]
  3 triangular  r = 1 + t cos(3 theta)^e, t ~ U[0.18, 0.35], e in {1, 3}
  4 multipolar  r = 1 + sum_j a_j cos(k_j theta + phi_j) over 2-3 distinct
                lobe harmonics k_j in {4..7}, a_j ~ U[0.12, 0.3] (dominant
                first harmonic >= 0.15); half the samples also carry a
                subordinate 3-lobe component a ~ U[0.06, 0.18], so the
                triangular/multipolar boundary stays the hard pair

Smooth noise lives at harmonics [noise_harmonics, 3 * noise_harmonics],
skipping any harmonic the class definition itself uses; per-harmonic
amplitude falls off with frequency to keep low-noise classes recognizable.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .contour_io import Contour, ShapeClass
from .errors import InvalidConfig, InvalidParams

N_CLASSES = 5

DEFAULT_CLASS_PARAMS: dict[str, dict[str, tuple[float, float]]] = {
    "elliptical": {"axis_ratio": (0.25, 0.7), "taper": (0.0, 0.3)},
    "teardrop": {"p": (0.25, 0.55), "q": (0.1, 0.35)},
    "triangular": {"t": (0.18, 0.35)},
    "multipolar": {"lobes": (4, 7), "amp": (0.12, 0.3), "n_harmonics": (2, 3),
                   "amp_dominant_min": 0.15, "tri_tinge": (0.06, 0.18)},
}


@dataclass
class GenConfig:
    n_per_class: int
    seed: int = 0
    noise_amplitude: float = 0.06   # fraction of mean radius
    noise_harmonics: int = 8        # noise band is [H, 3H]
    jitter: float = 0.01            # max per-point displacement fraction
    min_points: int = 150
    max_points: int = 250
    class_params: dict = field(default_factory=lambda: DEFAULT_CLASS_PARAMS)

    def validate(self) -> None:
        if self.n_per_class < 1:
            raise InvalidConfig("n_per_class must be >= 1")
        if self.noise_amplitude < 0 or self.jitter < 0:
            raise InvalidConfig("noise amplitudes must be >= 0")
        if self.noise_harmonics < 1:
            raise InvalidConfig("noise_harmonics must be >= 1")
        if not 3 <= self.min_points <= self.max_points:
            raise InvalidConfig("need 3 <= min_points <= max_points")

    def to_dict(self) -> dict:
        return asdict(self)


def _uniform(rng: np.random.Generator, bounds: tuple[float, float]) -> float:
    lo, hi = bounds
    return float(rng.uniform(lo, hi))


def sample_class_params(cls: ShapeClass, rng: np.random.Generator,
                        class_params: Optional[dict] = None) -> dict:
    """Draw one parameter set for a base shape."""
    cp = class_params or DEFAULT_CLASS_PARAMS
    if cls == ShapeClass.CIRCULAR:
        return {}
    if cls == ShapeClass.ELLIPTICAL:
        p = cp["elliptical"]
        return {"axis_ratio": _uniform(rng, p["axis_ratio"]),
                "taper": _uniform(rng, p["taper"])}
    if cls == ShapeClass.TEARDROP:
        p = cp["teardrop"]
        return {"p": _uniform(rng, p["p"]), "q": _uniform(rng, p["q"])}
    if cls == ShapeClass.TRIANGULAR:
        p = cp["triangular"]
        return {"t": _uniform(rng, p["t"]),
                "sharpness": int(rng.choice([1, 3]))}
    if cls == ShapeClass.MULTIPOLAR:
        p = cp["multipolar"]
        lo, hi = (int(v) for v in p["lobes"])
        n_lo, n_hi = (int(v) for v in p["n_harmonics"])
        n_harm = int(rng.integers(n_lo, n_hi + 1))
        freqs = np.sort(rng.choice(np.arange(lo, hi + 1),
                                   size=min(n_harm, hi - lo + 1),
                                   replace=False))
        harmonics = []
        for j, f in enumerate(freqs):
            amp = _uniform(rng, p["amp"])
            if j == 0:
                amp = max(amp, float(p["amp_dominant_min"]))
            harmonics.append((int(f), amp, float(rng.uniform(0.0, 2.0 * np.pi))))
        if rng.uniform() < 0.5:
            harmonics.append((3, _uniform(rng, p["tri_tinge"]),
                              float(rng.uniform(0.0, 2.0 * np.pi))))
        return {"harmonics": harmonics}
    raise InvalidParams(f"unknown class {cls}")


def _base_radius(cls: ShapeClass, params: dict, theta: np.ndarray) -> np.ndarray:
    if cls == ShapeClass.CIRCULAR:
        return np.ones_like(theta)
    if cls == ShapeClass.ELLIPTICAL:
        q = params["axis_ratio"]
        r = q / np.sqrt((q * np.cos(theta)) ** 2 + np.sin(theta) ** 2)
        return r * (1.0 - params["taper"] * np.sin(theta) ** 2)
    if cls == ShapeClass.TEARDROP:
        return 1.0 + params["p"] * np.cos(theta) \
            + params["q"] * np.cos(theta / 2.0) ** 2
    if cls == ShapeClass.TRIANGULAR:
        return 1.0 + params["t"] * np.cos(3.0 * theta) ** params["sharpness"]
    if cls == ShapeClass.MULTIPOLAR:
        r = np.ones_like(theta)
        for freq, amp, phase in params["harmonics"]:
            r = r + amp * np.cos(freq * theta + phase)
        return r
    raise InvalidParams(f"unknown class {cls}")


def _class_frequencies(cls: ShapeClass, params: dict) -> set[int]:
    """Harmonics the class definition occupies; noise must avoid them."""
    if cls == ShapeClass.TRIANGULAR:
        return {3, 9} if params.get("sharpness") == 3 else {3}
    if cls == ShapeClass.MULTIPOLAR:
        return {freq for freq, _, _ in params["harmonics"]}
    return set()


def base_shape(cls: ShapeClass, params: dict, n_points: int = 200) -> Contour:
    """Noise-free parametric shape for one class."""
    if n_points < 3:
        raise InvalidParams("n_points must be >= 3")
    theta = np.linspace(0.0, 2.0 * np.pi, n_points, endpoint=False)
    r = _base_radius(cls, params, theta)
    if np.any(r <= 0):
        raise InvalidParams(f"parameters {params} give non-positive radius")
    pts = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    return Contour(id=-1, points=pts, class_label=int(cls))


def _noise_profile(cls: ShapeClass, params: dict, theta: np.ndarray,
                   cfg: GenConfig, rng: np.random.Generator) -> np.ndarray:
    """Multiplicative smooth radial noise, 1 + sum eps_m cos(m theta + phi)."""
    if cfg.noise_amplitude == 0:
        return np.ones_like(theta)
    h = cfg.noise_harmonics
    band = [m for m in range(h, 3 * h + 1)
            if m not in _class_frequencies(cls, params)]
    n_active = int(rng.integers(4, 7))  # 4 to 6 harmonics
    chosen = rng.choice(len(band), size=min(n_active, len(band)), replace=False)
    profile = np.ones_like(theta)
    for idx in np.sort(chosen):
        m = band[int(idx)]
        # falloff keeps high-frequency ripple from dominating circularity
        eps = cfg.noise_amplitude * float(rng.uniform(0.15, 0.55)) * (h / m)
        phase = float(rng.uniform(0.0, 2.0 * np.pi))
        profile += eps * np.cos(m * theta + phase)
    return profile


def _generate_one(index: int, cls: ShapeClass, cfg: GenConfig) -> Contour:
    rng = np.random.default_rng((cfg.seed, index))
    params = sample_class_params(cls, rng, cfg.class_params)
    n_points = int(rng.integers(cfg.min_points, cfg.max_points + 1))
    theta = np.linspace(0.0, 2.0 * np.pi, n_points, endpoint=False)
    r = _base_radius(cls, params, theta)
    r = r * _noise_profile(cls, params, theta, cfg, rng)
    pts = np.column_stack([r * np.cos(theta), r * np.sin(theta)])

    mean_radius = float(np.mean(r))
    jitter_scale = cfg.jitter * mean_radius * float(rng.uniform(0.2, 1.0))
    pts += rng.uniform(-jitter_scale, jitter_scale, size=pts.shape)

    angle = float(rng.uniform(0.0, 2.0 * np.pi))
    ct, st = np.cos(angle), np.sin(angle)
    pts = pts @ np.array([[ct, st], [-st, ct]])
    pts *= np.sqrt(float(rng.uniform(0.5, 2.0)))  # area scale in [0.5, 2]
    return Contour(id=index, points=pts, class_label=int(cls))


def generate(cfg: GenConfig) -> list[Contour]:
    """Generate 5 * n_per_class contours, class-blocked, ids = indices."""
    cfg.validate()
    out = []
    for cls in ShapeClass:
        for j in range(cfg.n_per_class):
            index = int(cls) * cfg.n_per_class + j
            out.append(_generate_one(index, cls, cfg))
    return out
