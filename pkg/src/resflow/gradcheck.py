"""Central finite-difference gradient oracle.

Independent of the reverse-mode implementation: it re-evaluates the loss
closure at perturbed parameter values only.
"""

from __future__ import annotations

import numpy as np


def fd_gradient(loss_fn, param, step: float = 1e-5) -> np.ndarray:
    """Central finite differences of loss_fn() w.r.t. a Tensor parameter."""
    base = param.data.copy()
    grad = np.zeros_like(base, dtype=np.float64)
    flat = base.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        param.data = flat.reshape(base.shape)
        hi = loss_fn()
        flat[i] = orig - step
        param.data = flat.reshape(base.shape)
        lo = loss_fn()
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * step)
    param.data = base
    return grad


def max_rel_error(analytic: np.ndarray, fd: np.ndarray, floor: float = 1e-8) -> float:
    num = np.abs(np.asarray(analytic, dtype=np.float64) - fd)
    den = np.abs(fd) + floor
    return float((num / den).max()) if num.size else 0.0


def model_gradcheck(model, loss_builder, step: float = 1e-5) -> float:
    """Max relative error over every parameter of a model.

    loss_builder() must rebuild the loss graph from scratch and return a
    scalar Tensor; it is re-invoked for each finite-difference probe.
    """
    from . import tensor as T

    model.zero_grad()
    loss = loss_builder()
    T.backward(loss)
    analytic = {k: p.grad.copy() for k, p in model.params.items()}

    worst = 0.0
    for name, p in model.params.items():
        fd = fd_gradient(lambda: loss_builder().item(), p, step)
        worst = max(worst, max_rel_error(analytic[name], fd))
    return worst
