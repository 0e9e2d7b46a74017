"""Binary PPM (P6) / PGM (P5) readers and writers.

Pixel values use the [-1, 1] float convention everywhere else in the
package; files store 8-bit samples.
"""

from __future__ import annotations

import os

import numpy as np


def to_uint8(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    return np.clip(np.round((img + 1.0) * 127.5), 0, 255).astype(np.uint8)


def from_uint8(u8: np.ndarray) -> np.ndarray:
    return u8.astype(np.float64) / 127.5 - 1.0


def write_image(path: str, img: np.ndarray) -> None:
    """Write (1,h,w) as PGM or (3,h,w) as PPM."""
    img = np.asarray(img)
    if img.ndim == 2:
        img = img[None]
    if img.ndim != 3 or img.shape[0] not in (1, 3):
        raise ValueError(f"expected (1,h,w) or (3,h,w) image, got shape {img.shape}")
    c, h, w = img.shape
    u8 = to_uint8(img)
    magic = b"P5" if c == 1 else b"P6"
    payload = u8[0] if c == 1 else u8.transpose(1, 2, 0)
    with open(path, "wb") as f:
        f.write(magic + b"\n%d %d\n255\n" % (w, h))
        f.write(payload.tobytes())


def _read_token(f) -> bytes:
    tok = b""
    while True:
        ch = f.read(1)
        if not ch:
            raise ValueError("unexpected end of file in header")
        if ch in b" \t\r\n":
            if tok:
                return tok
            continue
        if ch == b"#":
            while f.read(1) not in (b"\n", b""):
                pass
            continue
        tok += ch


def read_image(path: str) -> np.ndarray:
    """Read a P5/P6 file into a (c,h,w) float array in [-1, 1]."""
    with open(path, "rb") as f:
        magic = f.read(2)
        if magic not in (b"P5", b"P6"):
            raise ValueError(f"{os.path.basename(path)}: not a binary PGM/PPM file")
        w = int(_read_token(f))
        h = int(_read_token(f))
        maxval = int(_read_token(f))
        if maxval != 255:
            raise ValueError(f"only 8-bit images supported, maxval={maxval}")
        c = 1 if magic == b"P5" else 3
        raw = f.read(w * h * c)
        if len(raw) != w * h * c:
            raise ValueError("truncated pixel data")
    u8 = np.frombuffer(raw, dtype=np.uint8)
    if c == 1:
        u8 = u8.reshape(1, h, w)
    else:
        u8 = u8.reshape(h, w, 3).transpose(2, 0, 1)
    return from_uint8(u8)
