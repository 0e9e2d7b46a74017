"""Dense tensors with reverse-mode automatic differentiation.

The op set is the minimal closure needed by a small convolutional
velocity network: elementwise arithmetic, matmul, conv2d, a
non-overlapping transpose convolution for upsampling, SiLU, group
normalization, full reductions, channel concatenation, and a couple of
fused conditioning ops (``linear``, ``scale_shift``).

Broadcasting is deliberately restricted to scalar-vs-tensor and
equal-shape; anything richer raises. Every op validates that its output
is finite and raises ``FloatingPointError`` otherwise.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from . import config


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_done")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=config.dtype())
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = np.zeros_like(arr) if requires_grad else None
        self._parents: tuple = ()
        self._backward: Optional[Callable] = None
        self._done = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, p):
        return pow_const(self, p)

    def backward(self):
        return backward(self)


def _as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=config.dtype()))


def _check_finite(arr: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"non-finite values produced by op {op!r}")


def _make(out_data: np.ndarray, op: str, parents: Sequence[Tensor],
          bwd: Optional[Callable]) -> Tensor:
    _check_finite(out_data, op)
    out = Tensor.__new__(Tensor)
    out.data = out_data
    out.requires_grad = False
    out.grad = None
    out._done = False
    if any(p.requires_grad or p._parents for p in parents):
        out._parents = tuple(parents)
        out._backward = bwd
    else:
        out._parents = ()
        out._backward = None
    return out


def _binop_shapes(a: Tensor, b: Tensor, op: str):
    if a.data.shape == b.data.shape:
        return
    if a.data.ndim == 0 or b.data.ndim == 0:
        return
    raise ValueError(f"{op}: shapes {a.data.shape} and {b.data.shape} are not "
                     "equal and neither is scalar (only scalar broadcasting is supported)")


def _reduce_to(grad: np.ndarray, shape) -> np.ndarray:
    # only ever needed for the scalar side of a scalar/tensor broadcast
    if grad.shape == tuple(shape):
        return grad
    return np.asarray(grad.sum(), dtype=grad.dtype).reshape(shape)


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binop_shapes(a, b, "add")
    out = a.data + b.data

    def bwd(g):
        return _reduce_to(g, a.data.shape), _reduce_to(g, b.data.shape)

    return _make(out, "add", (a, b), bwd)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binop_shapes(a, b, "sub")
    out = a.data - b.data

    def bwd(g):
        return _reduce_to(g, a.data.shape), _reduce_to(-g, b.data.shape)

    return _make(out, "sub", (a, b), bwd)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binop_shapes(a, b, "mul")
    out = a.data * b.data
    ad, bd = a.data, b.data

    def bwd(g):
        return _reduce_to(g * bd, ad.shape), _reduce_to(g * ad, bd.shape)

    return _make(out, "mul", (a, b), bwd)


def pow_const(a: Tensor, p: float) -> Tensor:
    a = _as_tensor(a)
    out = a.data ** p
    ad = a.data

    def bwd(g):
        return (g * p * ad ** (p - 1),)

    return _make(out, "pow", (a,), bwd)


def silu(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    s = 1.0 / (1.0 + np.exp(-a.data))
    out = a.data * s
    ad = a.data

    def bwd(g):
        return (g * (s * (1.0 + ad * (1.0 - s))),)

    return _make(out, "silu", (a,), bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError("matmul: both inputs must be 2-D")
    if a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul: inner extents differ, {a.data.shape} vs {b.data.shape}")
    out = a.data @ b.data
    ad, bd = a.data, b.data

    def bwd(g):
        return g @ bd.T, ad.T @ g

    return _make(out, "matmul", (a, b), bwd)


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """y = x @ w + b for x of shape (n, d), w (d, k), b (k,)."""
    x, w, b = _as_tensor(x), _as_tensor(w), _as_tensor(b)
    if x.data.shape[1] != w.data.shape[0] or w.data.shape[1] != b.data.shape[0]:
        raise ValueError("linear: incompatible shapes "
                         f"{x.data.shape}, {w.data.shape}, {b.data.shape}")
    out = x.data @ w.data + b.data
    xd, wd = x.data, w.data

    def bwd(g):
        return g @ wd.T, xd.T @ g, g.sum(axis=0)

    return _make(out, "linear", (x, w, b), bwd)


def sum_all(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    out = np.asarray(a.data.sum(), dtype=a.data.dtype)
    shape = a.data.shape

    def bwd(g):
        return (np.broadcast_to(g, shape).astype(g.dtype),)

    return _make(out, "sum", (a,), bwd)


def mean_all(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    out = np.asarray(a.data.mean(), dtype=a.data.dtype)
    shape, n = a.data.shape, a.data.size

    def bwd(g):
        return (np.broadcast_to(g / n, shape).astype(g.dtype),)

    return _make(out, "mean", (a,), bwd)


def reshape(a: Tensor, shape) -> Tensor:
    a = _as_tensor(a)
    old = a.data.shape

    def bwd(g):
        return (g.reshape(old),)

    return _make(a.data.reshape(shape), "reshape", (a,), bwd)


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.ascontiguousarray(p) for p in np.split(g, splits, axis=axis))

    return _make(out, "concat", tuple(tensors), bwd)


def scale_shift(x: Tensor, scale: Tensor, shift: Tensor) -> Tensor:
    """Per-sample, per-channel affine: y[n,c,h,w] = x * scale[n,c] + shift[n,c].

    The one sanctioned exception to the no-broadcasting rule; used for
    time-conditioned modulation and per-sample loss weighting.
    """
    x, scale, shift = _as_tensor(x), _as_tensor(scale), _as_tensor(shift)
    if x.data.ndim != 4 or scale.data.shape != x.data.shape[:2] \
            or shift.data.shape != x.data.shape[:2]:
        raise ValueError("scale_shift: expected x (n,c,h,w) with scale/shift (n,c)")
    s4 = scale.data[:, :, None, None]
    out = x.data * s4 + shift.data[:, :, None, None]
    xd = x.data

    def bwd(g):
        return g * s4, (g * xd).sum(axis=(2, 3)), g.sum(axis=(2, 3))

    return _make(out, "scale_shift", (x, scale, shift), bwd)


# ---------------------------------------------------------------------------
# convolution


def _pad_amount(kh: int, kw: int, pad) -> tuple:
    if pad == "same":
        return kh // 2, kw // 2
    if pad == "valid" or pad == 0:
        return 0, 0
    if isinstance(pad, int):
        return pad, pad
    raise ValueError(f"conv2d: pad must be 'same', 'valid' or int, got {pad!r}")


_COL2IM_CACHE: dict = {}


def _col2im_index(c, hp, wp, kh, kw, ho, wo, stride):
    key = (c, hp, wp, kh, kw, ho, wo, stride)
    idx = _COL2IM_CACHE.get(key)
    if idx is None:
        ci, ki, kj = np.meshgrid(np.arange(c), np.arange(kh), np.arange(kw), indexing="ij")
        patch = (ci * hp * wp + ki * wp + kj).reshape(-1)          # (c*kh*kw,)
        oi, oj = np.meshgrid(np.arange(ho), np.arange(wo), indexing="ij")
        origin = (oi * stride * wp + oj * stride).reshape(-1)      # (ho*wo,)
        idx = origin[:, None] + patch[None, :]                     # (ho*wo, c*kh*kw)
        _COL2IM_CACHE[key] = idx
    return idx


def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int):
    n, c, hp, wp = xp.shape
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    s0, s1, s2, s3 = xp.strides
    cols = np.lib.stride_tricks.as_strided(
        xp, (n, ho, wo, c, kh, kw),
        (s0, s2 * stride, s3 * stride, s1, s2, s3), writeable=False)
    return np.ascontiguousarray(cols).reshape(n, ho * wo, c * kh * kw), ho, wo


def conv2d(x: Tensor, w: Tensor, b: Optional[Tensor] = None,
           stride: int = 1, pad="same") -> Tensor:
    """2-D convolution, NCHW layout; w has shape (c_out, c_in, kh, kw)."""
    x, w = _as_tensor(x), _as_tensor(w)
    squeeze = x.data.ndim == 3
    xd = x.data[None] if squeeze else x.data
    if xd.ndim != 4 or w.data.ndim != 4:
        raise ValueError("conv2d: x must be (n,c,h,w) or (c,h,w), w (c_out,c_in,kh,kw)")
    n, c, h, wdt = xd.shape
    c_out, c_in, kh, kw = w.data.shape
    if c != c_in:
        raise ValueError(f"conv2d: input channels {c} != kernel channels {c_in}")
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError("conv2d: kernel extents must be odd")
    ph, pw = _pad_amount(kh, kw, pad)
    hp, wp = h + 2 * ph, wdt + 2 * pw
    if hp < kh or wp < kw or (hp - kh) // stride + 1 <= 0:
        raise ValueError("conv2d: non-positive output extent")
    xp = np.pad(xd, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if (ph or pw) else xd
    cols, ho, wo = _im2col(xp, kh, kw, stride)
    wmat = w.data.reshape(c_out, -1)
    out = cols @ wmat.T                                            # (n, ho*wo, c_out)
    if b is not None:
        b = _as_tensor(b)
        if b.data.shape != (c_out,):
            raise ValueError("conv2d: bias must have shape (c_out,)")
        out = out + b.data
    out = out.transpose(0, 2, 1).reshape(n, c_out, ho, wo)
    if squeeze:
        out = out[0]

    idx = _col2im_index(c, hp, wp, kh, kw, ho, wo, stride)
    parents = (x, w) if b is None else (x, w, b)

    def bwd(g):
        gd = g[None] if squeeze else g
        gmat = gd.reshape(n, c_out, ho * wo).transpose(0, 2, 1)    # (n, ho*wo, c_out)
        dw = np.tensordot(gmat, cols, axes=([0, 1], [0, 1])).reshape(w.data.shape)
        dcols = gmat @ wmat                                        # (n, ho*wo, c*kh*kw)
        offs = (np.arange(n) * (c * hp * wp))[:, None, None]
        flat = np.bincount((idx[None] + offs).ravel(), weights=dcols.ravel(),
                           minlength=n * c * hp * wp)
        dxp = flat.reshape(n, c, hp, wp).astype(gd.dtype)
        dx = dxp[:, :, ph:ph + h, pw:pw + wdt] if (ph or pw) else dxp
        if squeeze:
            dx = dx[0]
        if b is None:
            return dx, dw
        return dx, dw, gd.sum(axis=(0, 2, 3))

    return _make(out, "conv2d", parents, bwd)


def conv_transpose2d(x: Tensor, w: Tensor, b: Optional[Tensor] = None,
                     stride: int = 2) -> Tensor:
    """Non-overlapping transpose convolution (kernel extent == stride).

    Exact s-fold upsampling: out[n,co,si+di,sj+dj] = sum_ci x[n,ci,i,j] * w[ci,co,di,dj].
    """
    x, w = _as_tensor(x), _as_tensor(w)
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ValueError("conv_transpose2d: x must be (n,c,h,w), w (c_in,c_out,kh,kw)")
    c_in, c_out, kh, kw = w.data.shape
    if kh != stride or kw != stride:
        raise ValueError("conv_transpose2d: kernel extents must equal stride")
    n, c, h, wdt = x.data.shape
    if c != c_in:
        raise ValueError(f"conv_transpose2d: input channels {c} != kernel channels {c_in}")
    pieces = np.einsum("ncij,cokl->noikjl", x.data, w.data)
    out = pieces.reshape(n, c_out, h * kh, wdt * kw)
    if b is not None:
        b = _as_tensor(b)
        if b.data.shape != (c_out,):
            raise ValueError("conv_transpose2d: bias must have shape (c_out,)")
        out = out + b.data[None, :, None, None]
    parents = (x, w) if b is None else (x, w, b)
    xd = x.data

    def bwd(g):
        gp = g.reshape(n, c_out, h, kh, wdt, kw).transpose(0, 1, 2, 4, 3, 5)
        dx = np.einsum("noiwkl,cokl->nciw", gp, w.data)
        dw = np.einsum("nciw,noiwkl->cokl", xd, gp)
        if b is None:
            return dx, dw
        return dx, dw, g.sum(axis=(0, 2, 3))

    return _make(out, "conv_transpose2d", parents, bwd)


def group_norm(x: Tensor, gamma: Tensor, beta: Tensor,
               groups: int, eps: float = 1e-5) -> Tensor:
    """Group normalization over (c/groups, h, w) slices with learned affine."""
    x, gamma, beta = _as_tensor(x), _as_tensor(gamma), _as_tensor(beta)
    if x.data.ndim != 4:
        raise ValueError("group_norm: x must be (n,c,h,w)")
    n, c, h, w = x.data.shape
    if c % groups != 0:
        raise ValueError(f"group_norm: channels {c} not divisible by groups {groups}")
    if gamma.data.shape != (c,) or beta.data.shape != (c,):
        raise ValueError("group_norm: gamma/beta must have shape (c,)")
    xg = x.data.reshape(n, groups, -1)
    mu = xg.mean(axis=2, keepdims=True)
    var = xg.var(axis=2, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = ((xg - mu) * inv).reshape(n, c, h, w)
    out = xhat * gamma.data[None, :, None, None] + beta.data[None, :, None, None]
    m = xg.shape[2]

    def bwd(g):
        dgamma = (g * xhat).sum(axis=(0, 2, 3))
        dbeta = g.sum(axis=(0, 2, 3))
        dxhat = (g * gamma.data[None, :, None, None]).reshape(n, groups, -1)
        xh = xhat.reshape(n, groups, -1)
        dx = inv * (dxhat - dxhat.mean(axis=2, keepdims=True)
                    - xh * (dxhat * xh).mean(axis=2, keepdims=True))
        return dx.reshape(n, c, h, w), dgamma, dbeta

    return _make(out, "group_norm", (x, gamma, beta), bwd)


# ---------------------------------------------------------------------------
# backward pass


def backward(loss: Tensor) -> None:
    """Reverse-mode sweep from a scalar loss; accumulates into leaf .grad.

    The recorded graph is consumed: calling backward twice on the same
    loss raises.
    """
    if loss.data.ndim != 0:
        raise ValueError("backward: loss must be a scalar tensor")
    if loss._done:
        raise RuntimeError("backward: graph already consumed; re-record the ops")
    if loss._backward is None and not loss._parents:
        raise RuntimeError("backward: loss records no ops (empty tape)")

    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen and (p._parents or p.requires_grad):
                stack.append((p, False))

    grads: dict[int, np.ndarray] = {id(loss): np.ones((), dtype=loss.data.dtype)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.requires_grad:
            if node.grad is None:
                node.grad = np.zeros_like(node.data)
            node.grad = node.grad + g
        if node._backward is None:
            continue
        parent_grads = node._backward(g)
        for p, pg in zip(node._parents, parent_grads):
            if not (p._parents or p.requires_grad):
                continue
            prev = grads.get(id(p))
            grads[id(p)] = pg if prev is None else prev + pg

    for node in order:
        node._parents = ()
        node._backward = None
    loss._done = True
