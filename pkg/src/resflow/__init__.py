"""Deterministic degradation flows for image restoration.

Train a small velocity network by weighted flow matching on synthetic
HQ/LQ pairs, restore degraded images with few-step Euler integration, and
verify the underlying information-theoretic claims exactly on discrete
distributions.
"""

from .config import get_precision, precision, set_precision
from .degradations import DegradationSpec, PairedSample, apply, generate_hq, make_dataset
from .estimator import FlowRestorer
from .metrics import mae, psnr, ssim
from .model import ModelConfig, VelocityModel, build, load_checkpoint, save_checkpoint
from .sampler import SampleConfig, restore, restore_batch, trajectory
from .schedules import (AugmentedState, DegradationSchedule, entropy_z, eval_x,
                        eval_y, interpolate, loss_weight, target_velocity)
from .tensor import Tensor
from .trainer import AdamOptimizer, TrainConfig, lr_at, train, train_step

__version__ = "0.1.0"

__all__ = [
    "AdamOptimizer", "AugmentedState", "DegradationSchedule", "DegradationSpec",
    "FlowRestorer", "ModelConfig", "PairedSample", "SampleConfig", "Tensor",
    "TrainConfig", "VelocityModel", "apply", "build", "entropy_z", "eval_x",
    "eval_y", "generate_hq", "get_precision", "interpolate", "load_checkpoint",
    "loss_weight", "mae", "make_dataset", "precision", "psnr", "restore",
    "restore_batch", "save_checkpoint", "set_precision", "ssim",
    "target_velocity", "train", "train_step", "trajectory",
]
