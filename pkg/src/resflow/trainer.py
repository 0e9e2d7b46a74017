"""Weighted velocity-matching training.

Each step samples a time t ~ U[0,1] and an auxiliary endpoint
y1 ~ N(0, I) per batch element, builds the interpolated state and its
analytic path derivative, and regresses the model output onto the
derivative under the time weighting. The loop never integrates the ODE;
an audit hook asserts that.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from . import audit
from . import config as _cfg
from . import schedules
from . import tensor as T
from .model import ModelConfig, VelocityModel, save_checkpoint
from .tensor import Tensor


@dataclass
class TrainConfig:
    iterations: int = 1000
    batch_size: int = 8
    lr_init: float = 1e-4
    lr_final: float = 1e-6
    beta: float = 10.0
    gamma: float = 1.75
    seed: int = 0
    y_variant: str = "entropy_preserving"
    grad_clip: float = 1.0
    weight_decay: float = 0.0
    checkpoint_every: int = 0
    out_dir: str | None = None

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.lr_final > self.lr_init:
            raise ValueError("lr_final must not exceed lr_init")

    def schedule(self) -> schedules.DegradationSchedule:
        return schedules.DegradationSchedule(y_variant=self.y_variant,
                                             beta=self.beta, gamma=self.gamma)


class AdamOptimizer:
    """Adaptive-moment optimizer with decoupled weight decay (off by default)."""

    def __init__(self, params: dict, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8, weight_decay: float = 0.0):
        self.params = params
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self, lr: float):
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.step_count
        bc2 = 1.0 - b2 ** self.step_count
        for k, p in self.params.items():
            g = p.grad
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            mhat = self.m[k] / bc1
            vhat = self.v[k] / bc2
            if self.weight_decay:
                p.data = p.data - lr * self.weight_decay * p.data
            p.data = p.data - lr * mhat / (np.sqrt(vhat) + self.eps)


def lr_at(step: int, cfg: TrainConfig) -> float:
    """Cosine decay from lr_init to lr_final over cfg.iterations."""
    if step < 0 or step > cfg.iterations:
        raise ValueError(f"step {step} outside [0, {cfg.iterations}]")
    cos = np.cos(np.pi * step / cfg.iterations)
    return cfg.lr_final + 0.5 * (cfg.lr_init - cfg.lr_final) * (1.0 + cos)


def clip_gradients(params: dict, max_norm: float) -> float:
    total = np.sqrt(sum(float(np.vdot(p.grad, p.grad)) for p in params.values()))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for p in params.values():
            p.grad = p.grad * scale
    return total


def batch_loss(model: VelocityModel, x0: np.ndarray, x1: np.ndarray,
               y1: np.ndarray, ts: np.ndarray, cfg: TrainConfig) -> Tensor:
    """Weighted velocity-matching loss as a differentiable scalar.

    loss = mean_i lambda(t_i) (||vx_i - dx_i||^2 + ||vy_i - dy_i||^2) / numel
    """
    sched = cfg.schedule()
    n, c = x0.shape[0], x0.shape[1]
    ax, sx, dax, dsx = schedules.eval_x(ts)
    _, sy, _, dsy = schedules.eval_y(ts, sched)
    bshape = (n,) + (1,) * (x0.ndim - 1)
    xt = ax.reshape(bshape) * x0 + sx.reshape(bshape) * x1
    yt = sy.reshape(bshape) * y1
    vx_target = dax.reshape(bshape) * x0 + dsx.reshape(bshape) * x1
    vy_target = dsy.reshape(bshape) * y1

    lam = schedules.loss_weight(ts, cfg.gamma)
    lam2d = np.repeat(np.asarray(lam, dtype=_cfg.dtype()).reshape(n, 1), c, axis=1)
    zeros2d = np.zeros_like(lam2d)

    vx, vy = model.forward(xt.astype(_cfg.dtype()), yt.astype(_cfg.dtype()), ts)
    dx = T.sub(vx, Tensor(vx_target.astype(_cfg.dtype())))
    dy = T.sub(vy, Tensor(vy_target.astype(_cfg.dtype())))
    wx = T.scale_shift(T.mul(dx, dx), Tensor(lam2d), Tensor(zeros2d))
    wy = T.scale_shift(T.mul(dy, dy), Tensor(lam2d), Tensor(zeros2d))
    return T.add(T.mean_all(wx), T.mean_all(wy))


def train_step(model: VelocityModel, opt: AdamOptimizer, batch: list,
               rng: np.random.Generator, cfg: TrainConfig, lr: float) -> float:
    """One optimizer update on a batch of PairedSample; returns the loss."""
    if not batch:
        raise ValueError("batch must be non-empty")
    x0 = np.stack([s.x0 for s in batch])
    x1 = np.stack([s.x1 for s in batch])
    ts = rng.uniform(0.0, 1.0, len(batch))
    y1 = rng.standard_normal(x0.shape)
    loss = batch_loss(model, x0, x1, y1, ts, cfg)
    val = loss.item()
    if not np.isfinite(val):
        raise FloatingPointError(f"non-finite training loss {val}")
    model.zero_grad()
    T.backward(loss)
    clip_gradients(model.params, cfg.grad_clip)
    opt.step(lr)
    return val


@dataclass
class TrainResult:
    model: VelocityModel
    losses: list = field(default_factory=list)
    log_rows: list = field(default_factory=list)    # (step, loss, lr)
    checkpoint_path: str | None = None


def train(model: VelocityModel, dataset: list, cfg: TrainConfig,
          start_step: int = 0) -> TrainResult:
    """Full training loop with CSV logging and periodic checkpoints.

    Raises if anything in the loop touched the sampler: optimization is
    simulation-free by construction and must stay that way.
    """
    if not dataset:
        raise ValueError("dataset must be non-empty")
    audit_before = audit.snapshot().get("sampler.restore", 0)

    ss = np.random.SeedSequence(cfg.seed)
    batch_ss, draw_ss = ss.spawn(2)
    rng_batch = np.random.default_rng(batch_ss)
    rng_draw = np.random.default_rng(draw_ss)

    opt = AdamOptimizer(model.params, weight_decay=cfg.weight_decay)
    result = TrainResult(model=model)
    ckpt_path = None
    if cfg.out_dir:
        os.makedirs(cfg.out_dir, exist_ok=True)
        ckpt_path = os.path.join(cfg.out_dir, "model.ckpt")

    step = start_step
    try:
        for it in range(cfg.iterations):
            step = start_step + it
            lr = lr_at(min(it, cfg.iterations), cfg)
            idx = rng_batch.integers(0, len(dataset), cfg.batch_size)
            batch = [dataset[int(i)] for i in idx]
            loss = train_step(model, opt, batch, rng_draw, cfg, lr)
            result.losses.append(loss)
            result.log_rows.append((step, loss, lr))
            if ckpt_path and cfg.checkpoint_every and (it + 1) % cfg.checkpoint_every == 0:
                save_checkpoint(model, ckpt_path, step=step + 1)
    except FloatingPointError:
        # the last periodic checkpoint stays on disk; log what we have
        _write_log(cfg, result)
        raise

    if ckpt_path:
        save_checkpoint(model, ckpt_path, step=step + 1)
        result.checkpoint_path = ckpt_path
    _write_log(cfg, result)

    audit_after = audit.snapshot().get("sampler.restore", 0)
    if audit_after != audit_before:
        raise RuntimeError("training is simulation-free but the sampler was called")
    return result


def _write_log(cfg: TrainConfig, result: TrainResult):
    if not cfg.out_dir:
        return
    os.makedirs(cfg.out_dir, exist_ok=True)
    with open(os.path.join(cfg.out_dir, "loss_log.csv"), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["step", "loss", "lr"])
        for step, loss, lr in result.log_rows:
            writer.writerow([step, f"{loss:.10e}", f"{lr:.10e}"])
