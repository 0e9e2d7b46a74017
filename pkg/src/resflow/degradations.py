"""Seeded synthetic HQ patterns and deterministic degradation operators.

Operators: Gaussian blur, bright specks (snow analogue), haze blending,
uniform mid-rise quantization (compression analogue), and a deliberately
many-to-one full-blend haze used to exercise disambiguation. Everything
is a pure function of (spec, input); the seed fully determines RNG draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

KINDS = ("blur", "specks", "haze", "quantize", "many_to_one", "blur_specks")
PATTERNS = ("gradient", "checker", "blobs", "strokes")


@dataclass(frozen=True)
class DegradationSpec:
    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown degradation kind {self.kind!r}; expected one of {KINDS}")
        p = self.params
        checks = {
            "sigma": lambda v: v >= 0,
            "density": lambda v: 0.0 <= v <= 1.0,
            "radius": lambda v: v > 0,
            "airlight": lambda v: 0.0 <= v <= 1.0,
            "alpha": lambda v: 0.0 <= v <= 1.0,
            "levels": lambda v: v >= 2,
        }
        for key, ok in checks.items():
            if key in p and not ok(p[key]):
                raise ValueError(f"degradation param {key}={p[key]} out of range")


@dataclass
class PairedSample:
    x0: np.ndarray
    x1: np.ndarray
    spec: DegradationSpec


def generate_hq(pattern_kind: str, size: int, seed: int, channels: int = 1) -> np.ndarray:
    """Procedural HQ image of shape (channels, size, size), values in [-1, 1]."""
    if size < 8:
        raise ValueError(f"size must be >= 8, got {size}")
    if pattern_kind not in PATTERNS:
        raise ValueError(f"unknown pattern {pattern_kind!r}; expected one of {PATTERNS}")
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size] / (size - 1)
    img = np.zeros((channels, size, size))
    for ch in range(channels):
        if pattern_kind == "gradient":
            theta = rng.uniform(0, 2 * math.pi)
            phase = rng.uniform(-0.5, 0.5)
            ramp = math.cos(theta) * xx + math.sin(theta) * yy + phase
            plane = np.clip(2.0 * ramp - 1.0, -1.0, 1.0)
        elif pattern_kind == "checker":
            ii, jj = np.mgrid[0:size, 0:size]
            sign = 1.0 if rng.integers(2) == 0 else -1.0
            plane = sign * np.where((ii + jj) % 2 == 0, 1.0, -1.0)
        elif pattern_kind == "blobs":
            plane = np.zeros((size, size))
            for _ in range(rng.integers(3, 7)):
                cy, cx = rng.uniform(0, 1, 2)
                amp = rng.uniform(-1.0, 1.0)
                width = rng.uniform(0.08, 0.3)
                plane += amp * np.exp(-(((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * width ** 2)))
            plane = np.tanh(plane)
            plane -= plane.mean()        # keep blob fields centered
        else:  # strokes
            plane = np.full((size, size), rng.uniform(-0.4, 0.4))
            for _ in range(rng.integers(2, 6)):
                y0, x0c = rng.uniform(0, 1, 2)
                ang = rng.uniform(0, math.pi)
                val = rng.choice([-0.9, 0.9])
                length = rng.uniform(0.3, 1.0)
                npts = 3 * size
                ts = np.linspace(0, length, npts)
                py = np.clip(((y0 + ts * math.sin(ang)) * (size - 1)).round().astype(int), 0, size - 1)
                px = np.clip(((x0c + ts * math.cos(ang)) * (size - 1)).round().astype(int), 0, size - 1)
                plane[py, px] = val
        img[ch] = plane
    return np.clip(img, -1.0, 1.0)


def _gaussian_kernel1d(sigma: float) -> np.ndarray:
    radius = max(1, int(math.ceil(3.0 * sigma)))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (xs / sigma) ** 2)
    return k / k.sum()


def _blur(img: np.ndarray, sigma: float) -> np.ndarray:
    if sigma == 0.0:
        return img.copy()
    k = _gaussian_kernel1d(sigma)
    r = len(k) // 2
    out = np.empty_like(img)
    for ch in range(img.shape[0]):
        p = np.pad(img[ch], r, mode="reflect")
        tmp = np.apply_along_axis(lambda row: np.convolve(row, k, mode="valid"), 1, p)
        out[ch] = np.apply_along_axis(lambda col: np.convolve(col, k, mode="valid"), 0, tmp)
    return out


def _specks(img: np.ndarray, density: float, radius: float, rng: np.random.Generator) -> np.ndarray:
    if density == 0.0:
        return img.copy()
    c, h, w = img.shape
    n_specks = int(round(density * h * w / (math.pi * radius ** 2)))
    out = img.copy()
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    for _ in range(n_specks):
        cy = rng.uniform(0, h - 1)
        cx = rng.uniform(0, w - 1)
        ry = radius * rng.uniform(0.6, 1.4)
        rx = radius * rng.uniform(0.6, 1.4)
        val = rng.uniform(0.85, 1.0)
        mask = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
        out[:, mask] = val
    return out


def _haze(img: np.ndarray, airlight: float, alpha: float) -> np.ndarray:
    air_px = 2.0 * airlight - 1.0
    return (1.0 - alpha) * img + alpha * air_px


def _quantize(img: np.ndarray, levels: int) -> np.ndarray:
    # uniform mid-rise quantizer on [-1, 1]
    u = (img + 1.0) / 2.0
    q = (np.floor(u * levels) + 0.5) / levels
    return np.clip(q * 2.0 - 1.0, -1.0, 1.0)


def apply(spec: DegradationSpec, x0: np.ndarray) -> np.ndarray:
    """Degrade an HQ image; output is clamped to [-1, 1]."""
    x0 = np.asarray(x0, dtype=np.float64)
    p = spec.params
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "blur":
        out = _blur(x0, p.get("sigma", 1.5))
    elif spec.kind == "specks":
        out = _specks(x0, p.get("density", 0.1), p.get("radius", 1.5), rng)
    elif spec.kind == "haze":
        out = _haze(x0, p.get("airlight", 0.8), p.get("alpha", 0.7))
    elif spec.kind == "quantize":
        out = _quantize(x0, p.get("levels", 8))
    elif spec.kind == "many_to_one":
        # full blend: every HQ maps to the same constant airlight image
        out = _haze(x0, p.get("airlight", 0.8), p.get("alpha", 1.0))
    else:  # blur_specks
        out = _blur(x0, p.get("sigma", 1.5))
        out = _specks(out, p.get("density", 0.1), p.get("radius", 1.5), rng)
    return np.clip(out, -1.0, 1.0)


def make_dataset(n: int, spec_family: dict, seed: int = 0) -> list:
    """Reproducible paired dataset; per-sample seeds derive from the root seed.

    spec_family keys: kind (required), size, channels, pattern, plus the
    degradation params of the chosen kind. For many_to_one, consecutive
    sample pairs share one LQ image built from two mirrored HQ modes, so
    n must be even and the dataset holds exactly n/2 distinct LQ images.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    family = dict(spec_family)
    kind = family.pop("kind")
    size = family.pop("size", 16)
    channels = family.pop("channels", 1)
    pattern = family.pop("pattern", None)
    root = np.random.SeedSequence(seed)

    if kind == "many_to_one":
        if n % 2 != 0:
            raise ValueError("many_to_one datasets need an even number of samples")
        samples = []
        group_seeds = root.spawn(n // 2)
        for g, ss in enumerate(group_seeds):
            gseed = int(ss.generate_state(1)[0])
            rng = np.random.default_rng(gseed)
            mode = generate_hq(pattern or "blobs", size, gseed, channels)
            mode = mode - mode.mean()            # zero-mean so +/- modes are symmetric
            mode = np.clip(mode, -1.0, 1.0)
            airlight = float(rng.uniform(0.2, 0.8))
            spec = DegradationSpec("many_to_one",
                                   {"airlight": airlight, "alpha": 1.0, **family},
                                   seed=gseed)
            for x0 in (mode, -mode):
                samples.append(PairedSample(x0=x0, x1=apply(spec, x0), spec=spec))
        return samples

    samples = []
    pattern_cycle = PATTERNS if pattern is None else (pattern,)
    for i, ss in enumerate(root.spawn(n)):
        sseed = int(ss.generate_state(1)[0])
        x0 = generate_hq(pattern_cycle[i % len(pattern_cycle)], size, sseed, channels)
        spec = DegradationSpec(kind, dict(family), seed=sseed)
        samples.append(PairedSample(x0=x0, x1=apply(spec, x0), spec=spec))
    return samples
