"""Global float precision used by the tensor library.

Defaults to 32-bit for training; tests and gradient oracles switch to
64-bit, either through ``set_precision`` / the ``precision`` context
manager or via the ``RESFLOW_PRECISION`` environment variable.
"""

import os
from contextlib import contextmanager

import numpy as np

_DTYPES = {"f32": np.float32, "f64": np.float64}

_current = os.environ.get("RESFLOW_PRECISION", "f32")
if _current not in _DTYPES:
    raise ValueError(f"RESFLOW_PRECISION must be one of {sorted(_DTYPES)}, got {_current!r}")


def get_precision() -> str:
    return _current


def set_precision(name: str) -> None:
    global _current
    if name not in _DTYPES:
        raise ValueError(f"precision must be one of {sorted(_DTYPES)}, got {name!r}")
    _current = name


def dtype() -> np.dtype:
    """The numpy dtype new tensors are created with."""
    return np.dtype(_DTYPES[_current])


@contextmanager
def precision(name: str):
    old = _current
    set_precision(name)
    try:
        yield
    finally:
        set_precision(old)
