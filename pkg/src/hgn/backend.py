"""Kernel backend selection: numba-compiled twins with a pure-numpy fallback.

The span kernels in gang_kernels.py are plain numpy functions; this module
either hands them out untouched ("numpy" backend) or compiles them once with
numba.njit ("numba" backend).  Selection order: set_backend() override, then
the HGN_NUMBA environment variable (0/false -> numpy, 1/true -> numba), then
auto: numba when importable.  parallel/fastmath stay off so repeated runs are
bitwise reproducible.
"""

from __future__ import annotations

import os
from typing import Callable

from . import gang_kernels
from .errors import ConfigError

KERNEL_NAMES = (
    "rnn_window_fwd", "rnn_window_bwd",
    "gru_window_fwd", "gru_window_bwd",
    "lstm_window_fwd", "lstm_window_bwd",
    "cnn_window_fwd", "cnn_window_bwd",
    "mlp_window_fwd", "mlp_window_bwd",
)

_PLAIN: dict[str, Callable] = {name: getattr(gang_kernels, name) for name in KERNEL_NAMES}
_compiled: dict[str, Callable] | None = None
_forced: str | None = None


def numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def set_backend(name: str | None) -> None:
    """Force "numpy" or "numba" for this process; None restores env/auto."""
    global _forced
    if name not in (None, "numpy", "numba"):
        raise ConfigError(f"unknown backend {name!r}; expected numpy or numba")
    if name == "numba" and not numba_available():
        raise ConfigError("numba backend requested but numba is not importable")
    _forced = name


def active_backend() -> str:
    if _forced is not None:
        return _forced
    env = os.environ.get("HGN_NUMBA", "").strip().lower()
    if env in ("0", "false", "off", "no"):
        return "numpy"
    if env in ("1", "true", "on", "yes"):
        if not numba_available():
            raise ConfigError("HGN_NUMBA=1 but numba is not importable")
        return "numba"
    return "numba" if numba_available() else "numpy"


def _numba_kernels() -> dict[str, Callable]:
    global _compiled
    if _compiled is None:
        from numba import njit

        _compiled = {name: njit(cache=True)(fn) for name, fn in _PLAIN.items()}
    return _compiled


def kernels(backend: str | None = None) -> dict[str, Callable]:
    """The kernel table for the requested (default: active) backend."""
    name = backend or active_backend()
    if name == "numpy":
        return _PLAIN
    if name == "numba":
        return _numba_kernels()
    raise ConfigError(f"unknown backend {name!r}")


def get(kernel_name: str, backend: str | None = None) -> Callable:
    table = kernels(backend)
    if kernel_name not in table:
        raise ConfigError(f"unknown kernel {kernel_name!r}")
    return table[kernel_name]
