"""Velocity network: a small encoder-decoder backbone with time conditioning
and an auxiliary-conditioning adapter.

Injection modes for the auxiliary input y:

* ``adapter``: y runs through a separate residual trunk; per-level
  zero-initialized 1x1 projections add its features into the encoder, so
  the model is exactly the plain backbone at initialization.
* ``add``: y is added elementwise to x before the stem.
* ``concat``: y is concatenated channel-wise before the stem.
"""

from __future__ import annotations

import math
import struct
from collections import OrderedDict
from dataclasses import dataclass, asdict

import numpy as np

from . import config as _cfg
from . import tensor as T
from .tensor import Tensor

INJECTION_MODES = ("adapter", "add", "concat")

CHECKPOINT_MAGIC = b"RFLW"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    in_channels: int = 1
    width: int = 16
    levels: int = 2
    time_dim: int = 16
    injection_mode: str = "adapter"
    adapter_blocks: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.injection_mode not in INJECTION_MODES:
            raise ValueError(f"injection_mode must be one of {INJECTION_MODES}")
        if self.width < 1 or self.levels < 1 or self.in_channels < 1:
            raise ValueError("width, levels and in_channels must be positive")
        if self.time_dim % 2 != 0 or self.time_dim < 2:
            raise ValueError("time_dim must be even and >= 2")
        if self.adapter_blocks < 1:
            raise ValueError("adapter_blocks must be >= 1")

    @property
    def channels(self):
        # widths per level: base, then doubled once (desk-scale backbone)
        return [self.width * (2 ** min(l, 1)) for l in range(self.levels + 1)]

    @property
    def time_hidden(self):
        return 2 * self.time_dim


def _groups(c: int) -> int:
    for g in (8, 4, 2):
        if c % g == 0:
            return g
    return 1


def time_embed(t, dim: int) -> np.ndarray:
    """Sinusoidal features: [sin(t f_i), cos(t f_i)] at dim/2 frequencies."""
    if dim % 2 != 0:
        raise ValueError("time embedding dim must be even")
    t = np.atleast_1d(np.asarray(t, dtype=_cfg.dtype()))
    half = dim // 2
    exponents = np.arange(half) / max(half - 1, 1)
    freqs = (1000.0 ** exponents).astype(_cfg.dtype())
    ang = t[:, None] * freqs[None, :]
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=1)


class VelocityModel:
    """Parameterized velocity field v(x_t, y_t, t) -> (vx, vy)."""

    def __init__(self, cfg: ModelConfig):
        self.config = cfg
        self.params: OrderedDict[str, Tensor] = OrderedDict()
        self._rng = np.random.default_rng(cfg.seed)
        self._build()
        del self._rng

    # -- parameter construction ------------------------------------------

    def _param(self, name: str, array: np.ndarray) -> Tensor:
        p = Tensor(array.astype(_cfg.dtype()), requires_grad=True)
        self.params[name] = p
        return p

    def _conv(self, name: str, c_in: int, c_out: int, k: int = 3, zero: bool = False,
              bias: bool = False):
        # trunk convs are bias-free: constant offsets are cancelled by the
        # next normalization, so those biases would be dead parameters
        fan_in = c_in * k * k
        w = np.zeros((c_out, c_in, k, k)) if zero else \
            self._rng.normal(0.0, math.sqrt(2.0 / fan_in), (c_out, c_in, k, k))
        self._param(f"{name}.w", w)
        if bias:
            self._param(f"{name}.b", np.zeros(c_out))

    def _convt(self, name: str, c_in: int, c_out: int, k: int = 2):
        fan_in = c_in * k * k
        w = self._rng.normal(0.0, math.sqrt(2.0 / fan_in), (c_in, c_out, k, k))
        self._param(f"{name}.w", w)

    def _linear(self, name: str, d_in: int, d_out: int):
        w = self._rng.normal(0.0, math.sqrt(2.0 / d_in), (d_in, d_out))
        self._param(f"{name}.w", w)
        self._param(f"{name}.b", np.zeros(d_out))

    def _gn(self, name: str, c: int):
        self._param(f"{name}.g", np.ones(c))
        self._param(f"{name}.b", np.zeros(c))

    def _resblock(self, name: str, c: int, timed: bool = True):
        self._gn(f"{name}.gn1", c)
        self._conv(f"{name}.conv1", c, c)
        if timed:
            self._linear(f"{name}.tscale", self.config.time_hidden, c)
            self._linear(f"{name}.tshift", self.config.time_hidden, c)
        self._gn(f"{name}.gn2", c)
        self._conv(f"{name}.conv2", c, c)

    def _build(self):
        cfg = self.config
        ch = cfg.channels
        c_in = cfg.in_channels * (2 if cfg.injection_mode == "concat" else 1)

        self._linear("time.fc1", cfg.time_dim, cfg.time_hidden)
        self._linear("time.fc2", cfg.time_hidden, cfg.time_hidden)

        self._conv("stem", c_in, ch[0])
        for l in range(cfg.levels):
            self._resblock(f"enc{l}.rb", ch[l])
            self._conv(f"enc{l}.down", ch[l], ch[l + 1])
        self._resblock("mid.rb", ch[-1])
        for l in reversed(range(cfg.levels)):
            self._convt(f"dec{l}.up", ch[l + 1], ch[l])
            self._conv(f"dec{l}.fuse", 2 * ch[l], ch[l])
            self._resblock(f"dec{l}.rb", ch[l])
        self._gn("out.gn", ch[0])
        self._conv("out.head_x", ch[0], cfg.in_channels, bias=True)
        self._conv("out.head_y", ch[0], cfg.in_channels, bias=True)

        if cfg.injection_mode == "adapter":
            self._conv("adapter.stem", cfg.in_channels, ch[0])
            for l in range(cfg.levels + 1):
                for b in range(cfg.adapter_blocks):
                    self._resblock(f"adapter.l{l}.rb{b}", ch[l], timed=False)
                self._conv(f"adapter.l{l}.proj", ch[l], ch[l], k=1, zero=True)
                if l < cfg.levels:
                    self._conv(f"adapter.l{l}.down", ch[l], ch[l + 1])

    # -- forward -----------------------------------------------------------

    def _p(self, name: str) -> Tensor:
        return self.params[name]

    def _apply_resblock(self, name: str, h: Tensor, temb: Tensor | None) -> Tensor:
        c = self._p(f"{name}.gn1.g").shape[0]
        g = _groups(c)
        u = T.group_norm(h, self._p(f"{name}.gn1.g"), self._p(f"{name}.gn1.b"), g)
        u = T.conv2d(T.silu(u), self._p(f"{name}.conv1.w"), None)
        u = T.group_norm(u, self._p(f"{name}.gn2.g"), self._p(f"{name}.gn2.b"), g)
        if temb is not None:
            scale = T.linear(temb, self._p(f"{name}.tscale.w"), self._p(f"{name}.tscale.b"))
            shift = T.linear(temb, self._p(f"{name}.tshift.w"), self._p(f"{name}.tshift.b"))
            u = T.scale_shift(u, T.add(scale, 1.0), shift)
        u = T.conv2d(T.silu(u), self._p(f"{name}.conv2.w"), None)
        return T.add(h, u)

    def _time_features(self, t, n: int) -> Tensor:
        t = np.asarray(t, dtype=_cfg.dtype())
        if t.ndim == 0:
            t = np.full(n, float(t), dtype=_cfg.dtype())
        if t.shape != (n,):
            raise ValueError(f"t must be scalar or shape ({n},), got {t.shape}")
        if np.any(t < 0) or np.any(t > 1):
            raise ValueError("t must lie in [0,1]")
        emb = Tensor(time_embed(t, self.config.time_dim))
        h = T.silu(T.linear(emb, self._p("time.fc1.w"), self._p("time.fc1.b")))
        return T.silu(T.linear(h, self._p("time.fc2.w"), self._p("time.fc2.b")))

    def forward(self, x, y, t):
        """Velocity estimate (vx, vy) as Tensors; x, y are (n,c,h,w) or (c,h,w)."""
        cfg = self.config
        x = x if isinstance(x, Tensor) else Tensor(x)
        y = y if isinstance(y, Tensor) else Tensor(y)
        squeeze = x.data.ndim == 3
        if squeeze:
            x, y = Tensor(x.data[None]), Tensor(y.data[None])
        if x.data.shape != y.data.shape:
            raise ValueError(f"x and y shapes differ: {x.data.shape} vs {y.data.shape}")
        n, c, h, w = x.data.shape
        if c != cfg.in_channels:
            raise ValueError(f"expected {cfg.in_channels} input channels, got {c}")
        if h % (2 ** cfg.levels) or w % (2 ** cfg.levels):
            raise ValueError(f"spatial extents {(h, w)} must be divisible by {2 ** cfg.levels}")

        temb = self._time_features(t, n)

        if cfg.injection_mode == "add":
            u = T.add(x, y)
        elif cfg.injection_mode == "concat":
            u = T.concat([x, y], axis=1)
        else:
            u = x
        u = T.conv2d(u, self._p("stem.w"), None)

        injections = None
        if cfg.injection_mode == "adapter":
            injections = []
            a = T.conv2d(y, self._p("adapter.stem.w"), None)
            for l in range(cfg.levels + 1):
                for b in range(cfg.adapter_blocks):
                    a = self._apply_resblock(f"adapter.l{l}.rb{b}", a, None)
                injections.append(T.conv2d(a, self._p(f"adapter.l{l}.proj.w"),
                                           None, pad=0))
                if l < cfg.levels:
                    a = T.conv2d(a, self._p(f"adapter.l{l}.down.w"),
                                 None, stride=2)

        skips = []
        for l in range(cfg.levels):
            if injections is not None:
                u = T.add(u, injections[l])
            u = self._apply_resblock(f"enc{l}.rb", u, temb)
            skips.append(u)
            u = T.conv2d(u, self._p(f"enc{l}.down.w"), None, stride=2)
        if injections is not None:
            u = T.add(u, injections[cfg.levels])
        u = self._apply_resblock("mid.rb", u, temb)
        for l in reversed(range(cfg.levels)):
            u = T.conv_transpose2d(u, self._p(f"dec{l}.up.w"), None)
            u = T.conv2d(T.concat([u, skips[l]], axis=1),
                         self._p(f"dec{l}.fuse.w"), None)
            u = self._apply_resblock(f"dec{l}.rb", u, temb)
        u = T.silu(T.group_norm(u, self._p("out.gn.g"), self._p("out.gn.b"),
                                _groups(self.config.channels[0])))
        vx = T.conv2d(u, self._p("out.head_x.w"), self._p("out.head_x.b"))
        vy = T.conv2d(u, self._p("out.head_y.w"), self._p("out.head_y.b"))
        if squeeze:
            return T.reshape(vx, vx.data.shape[1:]), T.reshape(vy, vy.data.shape[1:])
        return vx, vy

    def velocity(self, x: np.ndarray, y: np.ndarray, t) -> tuple:
        """Inference-only forward returning plain arrays."""
        vx, vy = self.forward(x, y, t)
        return vx.data, vy.data

    # -- bookkeeping -------------------------------------------------------

    def param_count(self) -> int:
        return sum(p.size for p in self.params.values())

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def flat_parameters(self) -> np.ndarray:
        return np.concatenate([p.data.reshape(-1) for p in self.params.values()])

    def load_flat(self, flat: np.ndarray):
        if flat.size != self.param_count():
            raise ValueError(f"parameter blob has {flat.size} values, "
                             f"model expects {self.param_count()}")
        off = 0
        for p in self.params.values():
            p.data = flat[off:off + p.size].reshape(p.data.shape).astype(_cfg.dtype())
            off += p.size


def build(cfg: ModelConfig) -> VelocityModel:
    """Deterministically initialized model; adapter projections start at zero."""
    return VelocityModel(cfg)


# ---------------------------------------------------------------------------
# checkpoint format: magic, version, manifest text, f32 LE parameter blob


def save_checkpoint(model: VelocityModel, path: str, step: int = 0):
    cfg = model.config
    manifest_lines = [f"{k}={v}" for k, v in asdict(cfg).items()]
    manifest_lines.append(f"step={step}")
    manifest = ("\n".join(manifest_lines) + "\n").encode()
    flat = model.flat_parameters().astype("<f4")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", CHECKPOINT_VERSION))
        f.write(struct.pack("<I", len(manifest)))
        f.write(manifest)
        f.write(struct.pack("<Q", flat.size))
        f.write(flat.tobytes())


def load_checkpoint(path: str) -> tuple:
    """Returns (model, step). Validates magic, version and parameter count."""
    with open(path, "rb") as f:
        if f.read(4) != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: bad checkpoint magic")
        (version,) = struct.unpack("<I", f.read(4))
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        (mlen,) = struct.unpack("<I", f.read(4))
        manifest = f.read(mlen).decode()
        (count,) = struct.unpack("<Q", f.read(8))
        blob = f.read(count * 4)
        if len(blob) != count * 4:
            raise ValueError(f"{path}: truncated parameter blob")
    kv = dict(line.split("=", 1) for line in manifest.strip().splitlines())
    step = int(kv.pop("step", "0"))
    cfg = ModelConfig(
        in_channels=int(kv["in_channels"]),
        width=int(kv["width"]),
        levels=int(kv["levels"]),
        time_dim=int(kv["time_dim"]),
        injection_mode=kv["injection_mode"],
        adapter_blocks=int(kv["adapter_blocks"]),
        seed=int(kv["seed"]),
    )
    model = VelocityModel(cfg)
    flat = np.frombuffer(blob, dtype="<f4").astype(_cfg.dtype())
    model.load_flat(flat)
    return model, step
