"""Degradation schedules, loss weighting, interpolation and the entropy identity.

The data component always follows the linear schedule alpha = 1 - t,
sigma = t. The auxiliary component supports three variants:

* ``entropy_preserving`` (default): sigma_y(t) = beta / (1 - t + beta),
  the regularized form of the constant-entropy solution beta / (1 - t).
* ``constant``: sigma_y == 1 (ablation baseline).
* ``linear``: sigma_y(t) = t.

Note that the entropy-preserving variant gives sigma_y(0) = beta/(1+beta)
rather than 0; the regularized schedule knowingly trades the t=0 boundary
condition for a finite value at t=1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

Y_VARIANTS = ("entropy_preserving", "constant", "linear")


@dataclass(frozen=True)
class DegradationSchedule:
    """Schedule parameters; the x-variant is fixed to linear."""

    y_variant: str = "entropy_preserving"
    beta: float = 10.0
    gamma: float = 1.75

    def __post_init__(self):
        if self.y_variant not in Y_VARIANTS:
            raise ValueError(f"unknown y_variant {self.y_variant!r}; expected one of {Y_VARIANTS}")
        if self.beta <= 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")


@dataclass
class AugmentedState:
    """ODE state: data component x, auxiliary component y, time t in [0,1]."""

    x: np.ndarray
    y: np.ndarray
    t: float

    def __post_init__(self):
        if np.shape(self.x) != np.shape(self.y):
            raise ValueError(f"x and y shapes differ: {np.shape(self.x)} vs {np.shape(self.y)}")
        if not 0.0 <= self.t <= 1.0:
            raise ValueError(f"t must lie in [0,1], got {self.t}")


def _check_t(t) -> None:
    t = np.asarray(t)
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise ValueError(f"t must lie in [0,1], got {t}")


def eval_x(t):
    """Coefficients (alpha, sigma, dalpha, dsigma) of the linear data schedule."""
    _check_t(t)
    t = np.asarray(t, dtype=float)
    one = np.ones_like(t)
    return 1.0 - t, t + 0.0, -one, one


def eval_y(t, sched: DegradationSchedule):
    """Coefficients (alpha, sigma, dalpha, dsigma) of the auxiliary schedule."""
    _check_t(t)
    t = np.asarray(t, dtype=float)
    if sched.y_variant == "entropy_preserving":
        denom = 1.0 - t + sched.beta
        sigma = sched.beta / denom
        dsigma = sched.beta / denom ** 2
    elif sched.y_variant == "constant":
        sigma = np.ones_like(t)
        dsigma = np.zeros_like(t)
    else:  # linear
        sigma = t + 0.0
        dsigma = np.ones_like(t)
    return 1.0 - sigma, sigma, -dsigma, dsigma


def loss_weight(t, gamma: float = 1.75):
    """Time weighting (cos(pi/2 * (t - 2)) + 1) ** gamma; 0 at t=0, 1 at t=1."""
    _check_t(t)
    t = np.asarray(t, dtype=float)
    base = np.cos(0.5 * math.pi * (t - 2.0)) + 1.0
    out = np.clip(base, 0.0, None) ** gamma
    return out if out.ndim else float(out)


def interpolate(x0: np.ndarray, x1: np.ndarray, y1: np.ndarray, t: float,
                sched: DegradationSchedule) -> AugmentedState:
    """State on the flow path: x_t = (1-t) x0 + t x1, y_t = sigma_y(t) y1.

    y0 is fixed to zero, so the y path reduces to the sigma term.
    """
    x0, x1, y1 = np.asarray(x0), np.asarray(x1), np.asarray(y1)
    if x0.shape != x1.shape or x0.shape != y1.shape:
        raise ValueError(f"shape mismatch: x0 {x0.shape}, x1 {x1.shape}, y1 {y1.shape}")
    ax, sx, _, _ = eval_x(t)
    _, sy, _, _ = eval_y(t, sched)
    return AugmentedState(x=ax * x0 + sx * x1, y=sy * y1, t=float(t))


def target_velocity(x0: np.ndarray, x1: np.ndarray, y1: np.ndarray, t: float,
                    sched: DegradationSchedule):
    """Path derivative (vx, vy): vx = x1 - x0, vy = dsigma_y(t) y1."""
    x0, x1, y1 = np.asarray(x0), np.asarray(x1), np.asarray(y1)
    if x0.shape != x1.shape or x0.shape != y1.shape:
        raise ValueError(f"shape mismatch: x0 {x0.shape}, x1 {x1.shape}, y1 {y1.shape}")
    _, _, dax, dsx = eval_x(t)
    _, _, _, dsy = eval_y(t, sched)
    return dax * x0 + dsx * x1, dsy * y1


def entropy_z(t: float, d: int, beta: float = 10.0, exact: bool = False) -> float:
    """Entropy of the augmented state under the idealized endpoint assumptions.

    H = d ln(1-t) + d/2 (1 + ln 2pi) + d ln sigma_y(t). With the exact
    schedule sigma_y = beta/(1-t) the t-terms cancel and
    H = d ln(beta) + d/2 (1 + ln 2pi) for every t < 1.
    """
    if d < 1:
        raise ValueError(f"d must be a positive integer, got {d}")
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if exact:
        if not 0.0 <= t < 1.0:
            raise ValueError("exact schedule is singular at t=1; need 0 <= t < 1")
        sigma = beta / (1.0 - t)
    else:
        _check_t(t)
        if t == 1.0:
            # the uniform-HQ term d ln(1-t) diverges regardless of schedule
            return float("-inf")
        sigma = beta / (1.0 - t + beta)
    return d * math.log(1.0 - t) + 0.5 * d * (1.0 + math.log(2.0 * math.pi)) \
        + d * math.log(sigma)


def schedule_table(sched: DegradationSchedule, resolution: int = 101):
    """Rows (t, alpha_x, sigma_x, sigma_y, dsigma_y, lambda) on a uniform grid."""
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    ts = np.linspace(0.0, 1.0, resolution)
    rows = []
    for t in ts:
        ax, sx, _, _ = eval_x(float(t))
        _, sy, _, dsy = eval_y(float(t), sched)
        rows.append((float(t), float(ax), float(sx), float(sy), float(dsy),
                     loss_weight(float(t), sched.gamma)))
    return rows
