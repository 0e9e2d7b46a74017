"""Image quality metrics: PSNR, SSIM (box window), MAE."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

PSNR_CAP_DB = 99.0


def _check_same_shape(a: np.ndarray, b: np.ndarray, op: str):
    if a.shape != b.shape:
        raise ValueError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def psnr(a, b, max_val: float = 2.0) -> float:
    """Peak signal-to-noise ratio in dB; identical inputs cap at 99 dB.

    Default max_val of 2.0 matches the [-1, 1] pixel convention.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_same_shape(a, b, "psnr")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * math.log10(max_val ** 2 / mse), PSNR_CAP_DB)


def mae(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_same_shape(a, b, "mae")
    return float(np.mean(np.abs(a - b)))


def ssim(a, b, window: int = 8, max_val: float = 2.0,
         k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean structural similarity over non-overlapping box windows.

    Standard constants c1 = (k1 L)^2, c2 = (k2 L)^2 with L = max_val.
    Inputs may be (h, w) or (c, h, w); channels are averaged.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_same_shape(a, b, "ssim")
    if a.ndim == 2:
        a = a[None]
        b = b[None]
    if a.ndim != 3:
        raise ValueError("ssim: expected (h,w) or (c,h,w) images")
    c, h, w = a.shape
    if h < window or w < window:
        raise ValueError(f"ssim: image extents {(h, w)} smaller than window {window}")
    c1 = (k1 * max_val) ** 2
    c2 = (k2 * max_val) ** 2
    nh, nw = h // window, w // window
    at = a[:, :nh * window, :nw * window].reshape(c, nh, window, nw, window)
    bt = b[:, :nh * window, :nw * window].reshape(c, nh, window, nw, window)
    ax = at.transpose(0, 1, 3, 2, 4).reshape(c, nh * nw, -1)
    bx = bt.transpose(0, 1, 3, 2, 4).reshape(c, nh * nw, -1)
    mu_a = ax.mean(axis=2)
    mu_b = bx.mean(axis=2)
    var_a = ax.var(axis=2)
    var_b = bx.var(axis=2)
    cov = (ax * bx).mean(axis=2) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


@dataclass
class MetricReport:
    """Per-image metric rows plus their arithmetic means."""

    image_ids: list = field(default_factory=list)
    psnr_values: list = field(default_factory=list)
    ssim_values: list = field(default_factory=list)
    mae_values: list = field(default_factory=list)

    def add(self, image_id: str, psnr_db: float, ssim_val: float, mae_val: float):
        self.image_ids.append(image_id)
        self.psnr_values.append(psnr_db)
        self.ssim_values.append(ssim_val)
        self.mae_values.append(mae_val)

    @property
    def mean_psnr(self) -> float:
        return float(np.mean(self.psnr_values))

    @property
    def mean_ssim(self) -> float:
        return float(np.mean(self.ssim_values))

    @property
    def mean_mae(self) -> float:
        return float(np.mean(self.mae_values))

    def rows(self):
        """CSV-ready rows with a trailing aggregate line."""
        out = [(i, p, s, m) for i, p, s, m in
               zip(self.image_ids, self.psnr_values, self.ssim_values, self.mae_values)]
        out.append(("mean", self.mean_psnr, self.mean_ssim, self.mean_mae))
        return out


def evaluate_pairs(restored, reference, ids=None, max_val: float = 2.0,
                   window: int = 8) -> MetricReport:
    if len(restored) != len(reference):
        raise ValueError(f"image count mismatch: {len(restored)} vs {len(reference)}")
    report = MetricReport()
    for k, (r, g) in enumerate(zip(restored, reference)):
        name = ids[k] if ids is not None else str(k)
        report.add(name, psnr(r, g, max_val), ssim(r, g, window, max_val), mae(r, g))
    return report
